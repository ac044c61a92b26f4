use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Channel, OpticalConfig};
use crate::metasurface::MetaLayer;

use super::network::NetworkModel;
use super::task::{validate_tasks, ChannelTask};

pub const METADATA_FILE: &str = "model.json";
const FORMAT_VERSION: u32 = 1;

/// Everything needed to rebuild and evaluate a trained model besides the
/// per-layer arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub wavelength: f64,
    pub pitch: f64,
    pub n: usize,
    pub gaps: Vec<f64>,
    pub layer_count: usize,
    pub tasks: Vec<ChannelTask>,
    pub gain: f64,
    pub seed: u64,
}

impl CheckpointMeta {
    pub fn describe(model: &NetworkModel, tasks: &[ChannelTask], gain: f64, seed: u64) -> Self {
        let cfg = model.config();
        Self {
            format_version: FORMAT_VERSION,
            wavelength: cfg.wavelength,
            pitch: cfg.pitch,
            n: cfg.grid_n,
            gaps: model.gaps().to_vec(),
            layer_count: model.num_layers(),
            tasks: tasks.to_vec(),
            gain,
            seed,
        }
    }

    pub fn optical_config(&self) -> OpticalConfig {
        OpticalConfig {
            wavelength: self.wavelength,
            pitch: self.pitch,
            grid_n: self.n,
        }
    }
}

fn array_file(layer: usize, ch: Channel, quantity: &str) -> String {
    format!("layer{layer}_{}_{quantity}.f64", ch.name())
}

fn write_f64s(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_f64s(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected * 8 {
        return Err(Error::parse(
            path,
            format!("expected {} bytes, found {}", expected * 8, bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Writes `model.json` plus one little-endian f64 file per layer, channel
/// and quantity (`phi` or `a`) into `dir`, creating it if needed.
pub fn save_checkpoint(dir: &Path, model: &NetworkModel, meta: &CheckpointMeta) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join(METADATA_FILE);
    let mut json = serde_json::to_string_pretty(meta)?;
    json.push('\n');
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    for (l, layer) in model.layers().iter().enumerate() {
        for ch in Channel::ALL {
            write_f64s(&dir.join(array_file(l, ch, "phi")), layer.phase(ch))?;
            write_f64s(&dir.join(array_file(l, ch, "a")), layer.amplitude(ch))?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(NetworkModel, CheckpointMeta)> {
    let json_path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let meta: CheckpointMeta =
        serde_json::from_str(&text).map_err(|e| Error::parse(&json_path, e.to_string()))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::parse(
            &json_path,
            format!("unsupported format_version {}", meta.format_version),
        ));
    }
    let cfg = meta.optical_config();
    cfg.validate()?;
    validate_tasks(&meta.tasks, meta.n)?;
    if meta.gaps.len() != meta.layer_count + 1 {
        return Err(Error::parse(&json_path, "gaps do not match layer_count"));
    }
    let nn = meta.n * meta.n;
    let mut layers = Vec::with_capacity(meta.layer_count);
    for l in 0..meta.layer_count {
        let read = |ch, q| read_f64s(&dir.join(array_file(l, ch, q)), nn);
        layers.push(MetaLayer::from_parts(
            meta.n,
            meta.pitch,
            read(Channel::X, "a")?,
            read(Channel::Y, "a")?,
            read(Channel::X, "phi")?,
            read(Channel::Y, "phi")?,
        )?);
    }
    let model = NetworkModel::new(cfg, layers, meta.gaps.clone())?;
    Ok((model, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DatasetId, DetectorLayout, Encoding};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> (NetworkModel, CheckpointMeta) {
        let cfg = OpticalConfig::visible(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model = NetworkModel::random(cfg, 2, vec![0.0, 1e-5, 2e-5], &mut rng).unwrap();
        model.layer_mut(1).phase_mut(Channel::Y)[5] = 1.0 / 3.0 + 1e-300;
        model
            .layer_mut(0)
            .set_amplitude(Channel::X, vec![0.7; 64])
            .unwrap();
        let tasks = vec![ChannelTask {
            channel: Channel::X,
            dataset: DatasetId::Mnist,
            encoding: Encoding::Phase {
                max_phase: std::f64::consts::PI,
            },
            detector: DetectorLayout::standard(8, 4, 0.8).unwrap(),
        }];
        let meta = CheckpointMeta::describe(&model, &tasks, 10.0 / 3.0, 42);
        (model, meta)
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let (model, meta) = sample();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &model, &meta).unwrap();
        let (back, back_meta) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back_meta, meta);
        for (a, b) in model.layers().iter().zip(back.layers()) {
            for ch in Channel::ALL {
                let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(a.phase(ch)), bits(b.phase(ch)));
                assert_eq!(bits(a.amplitude(ch)), bits(b.amplitude(ch)));
            }
        }
        assert_eq!(back.gaps(), model.gaps());
        assert!(dir.path().join("layer1_y_phi.f64").exists());
        assert_eq!(
            std::fs::metadata(dir.path().join("layer0_x_a.f64")).unwrap().len(),
            64 * 8
        );
    }

    #[test]
    fn truncated_array_is_rejected() {
        let (model, meta) = sample();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &model, &meta).unwrap();
        std::fs::write(dir.path().join("layer0_x_phi.f64"), [0u8; 12]).unwrap();
        assert!(matches!(
            load_checkpoint(dir.path()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn missing_directory_is_io_error() {
        assert!(matches!(
            load_checkpoint(Path::new("/nonexistent/checkpoint")),
            Err(Error::Io { .. })
        ));
    }
}
