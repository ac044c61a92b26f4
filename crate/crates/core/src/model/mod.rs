//! The multi-channel diffractive network: forward model, detector readout,
//! loss and analytic phase gradients.

mod checkpoint;
mod detector;
mod network;
mod readout;
mod task;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, METADATA_FILE};
pub use detector::{DetectorLayout, Region};
pub use network::{
    backward, check_gaps, default_gaps, loss_and_gradient, ChannelGradient, ChannelPass, ForwardPass,
    NetworkModel, DEFAULT_LAYER_GAP,
};
pub use readout::{
    loss_ce, predict, region_energies, softmax_probabilities, IntensityMap, RegionEnergies,
};
pub use task::{validate_tasks, ChannelTask, DatasetId, Encoding};
