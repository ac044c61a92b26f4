//! Polarization-multiplexed metasurface layers and their realization as
//! rectangular nanopillars.

mod bifocal;
mod layer;
mod layout;
mod library;
mod realize;

pub use bifocal::{
    bifocal_phases, focal_readout, lens_phase, nearest_sample, sample_coordinate, simulate_bifocal,
    FocusReport, Point3,
};
pub use layer::{apply_layer, MetaLayer};
pub use layout::{export_layout, LAYOUT_HEADER};
pub use library::{load_library, synth_library, wrap_phase, MetaUnit, MetaUnitLibrary, HEADER};
pub use realize::{
    circular_distance, nearest_brute_force, realize, realize_layer, wrapped_difference,
    GeometryMap, RealizationStats,
};
