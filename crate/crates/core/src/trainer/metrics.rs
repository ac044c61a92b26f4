use serde::Serialize;

use crate::error::{Error, Result};

/// Counts indexed by `(true class, predicted class)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::config("confusion", "counts must be C × C"));
        }
        Ok(Self { classes, counts })
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    /// `trace / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.correct() as f64 / total as f64
        }
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts
            .chunks(self.classes.max(1))
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks(self.classes.max(1))
    }
}

/// Element-wise `(b − a) / total × 100` between two confusion matrices of
/// the same test set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercentageErrorMatrix {
    pub classes: usize,
    pub values: Vec<f64>,
}

impl PercentageErrorMatrix {
    pub fn get(&self, truth: usize, predicted: usize) -> f64 {
        self.values[truth * self.classes + predicted]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn compare_confusions(a: &ConfusionMatrix, b: &ConfusionMatrix) -> Result<PercentageErrorMatrix> {
    if a.classes != b.classes {
        return Err(Error::config(
            "confusion",
            format!("{0}×{0} and {1}×{1} matrices differ in shape", a.classes, b.classes),
        ));
    }
    let total = a.total();
    if total != b.total() {
        return Err(Error::config(
            "confusion",
            format!("matrices count {} and {} samples", total, b.total()),
        ));
    }
    let scale = if total == 0 { 0.0 } else { 100.0 / total as f64 };
    let values = a
        .counts
        .iter()
        .zip(&b.counts)
        .map(|(&x, &y)| (y as f64 - x as f64) * scale)
        .collect();
    Ok(PercentageErrorMatrix {
        classes: a.classes,
        values,
    })
}

/// Per-class mean and population standard deviation of the fraction of
/// output energy landing in the true class's region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub counts: Vec<usize>,
}

impl EnergyReport {
    pub fn from_samples(classes: usize, samples: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut sum = vec![0.0; classes];
        let mut sum_sq = vec![0.0; classes];
        let mut counts = vec![0usize; classes];
        for (label, f) in samples {
            sum[label] += f;
            sum_sq[label] += f * f;
            counts[label] += 1;
        }
        let mut mean = vec![0.0; classes];
        let mut std = vec![0.0; classes];
        for k in 0..classes {
            if counts[k] > 0 {
                let c = counts[k] as f64;
                mean[k] = sum[k] / c;
                std[k] = (sum_sq[k] / c - mean[k] * mean[k]).max(0.0).sqrt();
            }
        }
        Self { mean, std, counts }
    }

    pub fn min_mean(&self) -> f64 {
        self.mean
            .iter()
            .zip(&self.counts)
            .filter(|(_, &c)| c > 0)
            .fold(f64::INFINITY, |m, (&v, _)| m.min(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accuracy_and_rows() {
        let mut m = ConfusionMatrix::new(3);
        for (t, p) in [(0, 0), (0, 1), (1, 1), (2, 2), (2, 0)] {
            m.record(t, p);
        }
        assert_eq!(m.total(), 5);
        assert_eq!(m.row_sums(), vec![2, 1, 2]);
        assert!((m.accuracy() - 0.6).abs() < 1e-15);
        assert_eq!(ConfusionMatrix::new(3).accuracy(), 0.0);
    }

    #[test]
    fn identical_matrices_compare_to_zero() {
        let m = ConfusionMatrix::from_counts(2, vec![5, 1, 2, 7]).unwrap();
        let d = compare_confusions(&m, &m).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn comparison_values_and_errors() {
        let a = ConfusionMatrix::from_counts(2, vec![5, 0, 0, 5]).unwrap();
        let b = ConfusionMatrix::from_counts(2, vec![4, 1, 0, 5]).unwrap();
        let d = compare_confusions(&a, &b).unwrap();
        assert_eq!(d.values, vec![-10.0, 10.0, 0.0, 0.0]);
        assert_eq!(d.max_abs(), 10.0);
        let c = ConfusionMatrix::new(3);
        assert!(compare_confusions(&a, &c).is_err());
        let e = ConfusionMatrix::from_counts(2, vec![5, 0, 0, 4]).unwrap();
        assert!(compare_confusions(&a, &e).is_err());
        assert!(ConfusionMatrix::from_counts(2, vec![1]).is_err());
    }

    #[test]
    fn energy_statistics() {
        let r = EnergyReport::from_samples(3, [(0, 0.2), (0, 0.4), (2, 0.5)]);
        assert!((r.mean[0] - 0.3).abs() < 1e-15);
        assert!((r.std[0] - 0.1).abs() < 1e-12);
        assert_eq!(r.counts, vec![2, 0, 1]);
        assert_eq!(r.min_mean(), r.mean[0]);
    }

    proptest! {
        #[test]
        fn equal_totals_sum_to_zero(
            a in proptest::collection::vec(0u64..50, 16),
            perm in Just((0..16usize).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let b: Vec<u64> = perm.iter().map(|&i| a[i]).collect();
            let ma = ConfusionMatrix::from_counts(4, a).unwrap();
            let mb = ConfusionMatrix::from_counts(4, b).unwrap();
            let d = compare_confusions(&ma, &mb).unwrap();
            prop_assert!(d.values.iter().sum::<f64>().abs() < 1e-9);
        }
    }
}
