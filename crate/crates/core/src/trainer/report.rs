use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::IntensityMap;

use super::metrics::{ConfusionMatrix, EnergyReport, PercentageErrorMatrix};
use super::{EpochRecord, SampleRecord};

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, e.into())
}

/// `epoch,channel,loss,train_acc,test_acc`; `test_acc` is empty when no
/// held-out set was supplied.
pub fn write_epoch_csv(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epoch", "channel", "loss", "train_acc", "test_acc"])
        .map_err(csv_err(path))?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            r.channel.to_string(),
            r.loss.to_string(),
            r.train_acc.to_string(),
            r.test_acc.map_or(String::new(), |a| a.to_string()),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// C × C counts, rows = true class, columns = predicted class, no header.
pub fn write_confusion_csv(path: &Path, m: &ConfusionMatrix) -> Result<()> {
    let mut w = writer(path)?;
    for row in m.rows() {
        w.write_record(row.iter().map(u64::to_string))
            .map_err(csv_err(path))?;
    }
    finish(w, path)
}

pub fn write_percentage_error_csv(path: &Path, m: &PercentageErrorMatrix) -> Result<()> {
    let mut w = writer(path)?;
    for row in m.values.chunks(m.classes.max(1)) {
        w.write_record(row.iter().map(f64::to_string))
            .map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// `class,count,mean_target_fraction,std_target_fraction`.
pub fn write_energy_csv(path: &Path, report: &EnergyReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["class", "count", "mean_target_fraction", "std_target_fraction"])
        .map_err(csv_err(path))?;
    for k in 0..report.mean.len() {
        w.write_record([
            k.to_string(),
            report.counts[k].to_string(),
            report.mean[k].to_string(),
            report.std[k].to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// `index,label,predicted,target_fraction`.
pub fn write_records_csv(path: &Path, records: &[SampleRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["index", "label", "predicted", "target_fraction"])
        .map_err(csv_err(path))?;
    for r in records {
        w.write_record([
            r.index.to_string(),
            r.label.to_string(),
            r.predicted.to_string(),
            r.target_fraction.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Binary 16-bit PGM scaled so the brightest sample maps to 65535.
pub fn write_pgm16(path: &Path, map: &IntensityMap) -> Result<()> {
    let max = map.values.iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    let mut bytes = format!("P5\n{} {}\n65535\n", map.n, map.n).into_bytes();
    for v in &map.values {
        let level = (v * scale).round().clamp(0.0, 65535.0) as u16;
        bytes.extend_from_slice(&level.to_be_bytes());
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}
