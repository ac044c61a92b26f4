//! Mini-batch SGD over layer phases, evaluation and the phase-only versus
//! realized-library comparison.

mod metrics;
mod report;

use serde::{Deserialize, Serialize};

use crate::dataset::{batches, LabeledImageSet};
use crate::error::{Error, Result};
use crate::field::{upsample_nearest, Channel, ComplexGrid, Image, OpticalConfig};
use crate::metasurface::{realize_layer, GeometryMap, MetaUnitLibrary};
use crate::model::{
    loss_and_gradient, predict, region_energies, ChannelTask, NetworkModel, RegionEnergies,
};
use crate::par;

pub use metrics::{compare_confusions, ConfusionMatrix, EnergyReport, PercentageErrorMatrix};
pub use report::{
    write_confusion_csv, write_energy_csv, write_epoch_csv, write_percentage_error_csv,
    write_pgm16, write_records_csv,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub rng_seed: u64,
    /// Use only the first `train_subset` training items; `None` uses all.
    pub train_subset: Option<usize>,
    /// Softmax sharpness applied to the region energy fractions.
    pub gain: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            learning_rate: 0.1,
            epochs: 30,
            rng_seed: 0,
            train_subset: Some(10_000),
            gain: 10.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config("learning_rate", "must be a non-negative number"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(Error::config("gain", "must be positive"));
        }
        if self.train_subset == Some(0) {
            return Err(Error::config("train_subset", "must be at least 1"));
        }
        Ok(())
    }
}

/// A task together with its training and (optional) held-out data.
#[derive(Debug, Clone, Copy)]
pub struct TaskData<'a> {
    pub task: &'a ChannelTask,
    pub train: &'a LabeledImageSet,
    pub test: Option<&'a LabeledImageSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub channel: Channel,
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

/// Encodes dataset item `i` for `task`. Images whose side divides the
/// grid are replicated into blocks; other sizes are resampled by nearest
/// neighbour.
pub fn input_field(
    task: &ChannelTask,
    set: &LabeledImageSet,
    i: usize,
    config: &OpticalConfig,
) -> Result<ComplexGrid> {
    let n = config.grid_n;
    let side = set.side();
    if n.is_multiple_of(side) {
        let grid = task.encoding.encode(&set.image(i), config.pitch)?;
        return if n == side {
            Ok(grid)
        } else {
            upsample_nearest(&grid, n / side)
        };
    }
    let image = set.image(i);
    let mut pixels = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            pixels.push(image.get(r * side / n, c * side / n));
        }
    }
    task.encoding.encode(&Image::new(n, pixels)?, config.pitch)
}

/// Checks that every label of `set` has a detector region in `task`.
pub fn check_data(task: &ChannelTask, set: &LabeledImageSet) -> Result<()> {
    let classes = task.classes();
    if let Some(bad) = set.labels().find(|&l| l >= classes) {
        return Err(Error::config(
            "dataset",
            format!(
                "label {bad} has no detector region ({} {} regions)",
                classes, task.channel
            ),
        ));
    }
    Ok(())
}

/// Trains every task's channel by mini-batch SGD on the phases. Channels
/// share no parameters, so each channel only sees its own task's data.
pub fn train(
    mut model: NetworkModel,
    tasks: &[TaskData<'_>],
    cfg: &TrainConfig,
) -> Result<(NetworkModel, Vec<EpochRecord>)> {
    cfg.validate()?;
    crate::model::validate_tasks(
        &tasks.iter().map(|t| t.task.clone()).collect::<Vec<_>>(),
        model.config().grid_n,
    )?;
    let mut train_sets = Vec::with_capacity(tasks.len());
    for t in tasks {
        check_data(t.task, t.train)?;
        if let Some(test) = t.test {
            check_data(t.task, test)?;
        }
        train_sets.push(match cfg.train_subset {
            Some(k) if k < t.train.len() => t.train.take(k),
            _ => t.train.clone(),
        });
    }
    if train_sets.iter().any(LabeledImageSet::is_empty) {
        return Err(Error::config("dataset", "training set is empty"));
    }

    let mut records = Vec::new();
    for epoch in 0..cfg.epochs {
        for (t, set) in tasks.iter().zip(&train_sets) {
            let (loss, train_acc) = train_epoch(&mut model, t.task, set, cfg, epoch)?;
            let test_acc = match t.test {
                Some(test) => Some(evaluate(&model, t.task, test)?.confusion.accuracy()),
                None => None,
            };
            log::info!(
                "epoch {epoch} channel {}: loss {loss:.4} train {:.2}%{}",
                t.task.channel,
                train_acc * 100.0,
                test_acc.map_or(String::new(), |a| format!(" test {:.2}%", a * 100.0))
            );
            records.push(EpochRecord {
                epoch,
                channel: t.task.channel,
                loss,
                train_acc,
                test_acc,
            });
        }
    }
    Ok((model, records))
}

/// One pass over `set`; returns the mean loss and the running accuracy
/// measured before each batch's update.
fn train_epoch(
    model: &mut NetworkModel,
    task: &ChannelTask,
    set: &LabeledImageSet,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<(f64, f64)> {
    let config = *model.config();
    let channel = task.channel;
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for batch in batches(set.len(), cfg.batch_size, cfg.rng_seed, epoch as u64)? {
        let current = &*model;
        let grads = par::map(&batch, |&i| {
            let input = input_field(task, set, i, &config)?;
            loss_and_gradient(current, &input, channel, &task.detector, set.label(i), cfg.gain)
        });
        // reduce in sample order so the sum does not depend on scheduling
        let mut sum: Vec<Vec<f64>> = vec![vec![0.0; config.grid_n * config.grid_n]; model.num_layers()];
        for (g, &i) in grads.into_iter().zip(&batch) {
            let g = g?;
            loss_sum += g.loss;
            if predict(&g.energies.energies) == set.label(i) {
                correct += 1;
            }
            for (acc, layer) in sum.iter_mut().zip(&g.phase) {
                for (a, v) in acc.iter_mut().zip(layer) {
                    *a += v;
                }
            }
        }
        let step = cfg.learning_rate / batch.len() as f64;
        for (l, grad) in sum.iter().enumerate() {
            for (p, g) in model.layer_mut(l).phase_mut(channel).iter_mut().zip(grad) {
                *p -= step * g;
            }
        }
    }
    Ok((loss_sum / set.len() as f64, correct as f64 / set.len() as f64))
}

/// Outcome of one test sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub index: usize,
    pub label: usize,
    pub predicted: usize,
    pub target_fraction: f64,
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub energy: EnergyReport,
    pub records: Vec<SampleRecord>,
}

/// Detector readout of one sample.
pub fn readout(
    model: &NetworkModel,
    task: &ChannelTask,
    set: &LabeledImageSet,
    i: usize,
) -> Result<RegionEnergies> {
    let input = input_field(task, set, i, model.config())?;
    let pass = model.forward_channel(&input, task.channel, false)?;
    region_energies(&pass.intensity(), &task.detector)
}

pub fn evaluate(model: &NetworkModel, task: &ChannelTask, test: &LabeledImageSet) -> Result<Evaluation> {
    check_data(task, test)?;
    let outcomes = par::map_range(test.len(), |i| readout(model, task, test, i));
    let classes = task.classes();
    let mut confusion = ConfusionMatrix::new(classes);
    let mut records = Vec::with_capacity(test.len());
    for (i, e) in outcomes.into_iter().enumerate() {
        let e = e?;
        let label = test.label(i);
        let predicted = predict(&e.energies);
        confusion.record(label, predicted);
        records.push(SampleRecord {
            index: i,
            label,
            predicted,
            target_fraction: e.fractions[label],
            fractions: e.fractions,
        });
    }
    let energy = EnergyReport::from_samples(
        classes,
        records.iter().map(|r| (r.label, r.target_fraction)),
    );
    Ok(Evaluation {
        confusion,
        energy,
        records,
    })
}

/// Realizes every layer against `lib` and returns the resulting model
/// (library amplitudes and quantized phases) with its geometries.
pub fn realize_model(
    model: &NetworkModel,
    lib: &MetaUnitLibrary,
) -> Result<(NetworkModel, Vec<GeometryMap>)> {
    let mut layers = Vec::with_capacity(model.num_layers());
    let mut geoms = Vec::with_capacity(model.num_layers());
    for layer in model.layers() {
        let (g, l) = realize_layer(layer, lib, model.config())?;
        geoms.push(g);
        layers.push(l);
    }
    Ok((model.with_layers(layers)?, geoms))
}

/// Evaluates the model as it would be fabricated from `lib`.
pub fn crosstalk_evaluate(
    model: &NetworkModel,
    lib: &MetaUnitLibrary,
    task: &ChannelTask,
    test: &LabeledImageSet,
) -> Result<Evaluation> {
    let (realized, _) = realize_model(model, lib)?;
    evaluate(&realized, task, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DatasetId, DetectorLayout, Encoding};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_data(n: usize, count: usize, seed: u64) -> LabeledImageSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let mut levels = Vec::new();
        let mut labels = Vec::new();
        for i in 0..count {
            let label = (i % 2) as u8;
            for r in 0..n {
                for c in 0..n {
                    let on = if label == 0 { c < n / 2 } else { r < n / 2 };
                    let noise: u8 = rng.gen_range(0..40);
                    levels.push(if on { 215 + noise } else { noise });
                }
            }
            labels.push(label);
        }
        LabeledImageSet::from_levels(n, levels, labels).unwrap()
    }

    fn toy_task(n: usize) -> ChannelTask {
        ChannelTask {
            channel: Channel::X,
            dataset: DatasetId::Custom,
            encoding: Encoding::Amplitude,
            detector: DetectorLayout::standard(n, 2, 0.8).unwrap(),
        }
    }

    fn toy_model(n: usize) -> NetworkModel {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        NetworkModel::random(OpticalConfig::visible(n), 1, vec![0.0, 20e-6], &mut rng).unwrap()
    }

    #[test]
    fn zero_learning_rate_leaves_phases() {
        let data = toy_data(12, 20, 1);
        let task = toy_task(12);
        let model = toy_model(12);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 2,
            ..TrainConfig::default()
        };
        let tasks = [TaskData {
            task: &task,
            train: &data,
            test: None,
        }];
        let (trained, records) = train(model.clone(), &tasks, &cfg).unwrap();
        assert_eq!(trained, model);
        assert_eq!(records.len(), 2);
    }

    #[test]
    fn learns_toy_task() {
        let data = toy_data(12, 40, 2);
        let test = toy_data(12, 20, 3);
        let task = toy_task(12);
        let cfg = TrainConfig {
            epochs: 10,
            gain: 20.0,
            ..TrainConfig::default()
        };
        let tasks = [TaskData {
            task: &task,
            train: &data,
            test: Some(&test),
        }];
        let (trained, records) = train(toy_model(12), &tasks, &cfg).unwrap();
        assert!(records.last().unwrap().loss < records[0].loss);
        let eval = evaluate(&trained, &task, &test).unwrap();
        assert!(eval.confusion.accuracy() >= 0.9, "{:?}", eval.confusion);
        assert_eq!(eval.confusion.row_sums(), vec![10, 10]);
    }

    #[test]
    fn unmapped_label_is_config_error() {
        let task = toy_task(12);
        let three = LabeledImageSet::from_levels(12, vec![0; 144], vec![2]).unwrap();
        assert!(check_data(&task, &toy_data(12, 4, 1)).is_ok());
        let tasks = [TaskData {
            task: &task,
            train: &three,
            test: None,
        }];
        assert!(matches!(
            train(toy_model(12), &tasks, &TrainConfig::default()),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn inputs_are_scaled_to_the_grid() {
        let task = toy_task(12);
        let set = toy_data(6, 1, 1);
        let up = input_field(&task, &set, 0, &OpticalConfig::visible(12)).unwrap();
        assert_eq!(up.n(), 12);
        assert_eq!(up.get(1, 1), up.get(0, 0));
        let down = input_field(&task, &set, 0, &OpticalConfig::visible(4)).unwrap();
        assert_eq!(down.n(), 4);
        assert_eq!(down.get(1, 2).re, set.image(0).get(1, 3));
    }

    #[test]
    fn invalid_train_configs() {
        let base = TrainConfig::default();
        assert!(base.validate().is_ok());
        for bad in [
            TrainConfig { batch_size: 0, ..base.clone() },
            TrainConfig { epochs: 0, ..base.clone() },
            TrainConfig { learning_rate: -1.0, ..base.clone() },
            TrainConfig { gain: 0.0, ..base.clone() },
            TrainConfig { train_subset: Some(0), ..base.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
