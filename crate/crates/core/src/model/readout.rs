use crate::error::{Error, Result};

use super::detector::DetectorLayout;

/// Detector-plane intensity `|U|²` with its sampling pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMap {
    pub n: usize,
    pub pitch: f64,
    pub values: Vec<f64>,
}

impl IntensityMap {
    pub fn total_energy(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.pitch * self.pitch
    }

    pub fn scaled(&self, factor: f64) -> IntensityMap {
        IntensityMap {
            n: self.n,
            pitch: self.pitch,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Per-class energies `E_k` and their fractions of the whole plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionEnergies {
    pub energies: Vec<f64>,
    pub fractions: Vec<f64>,
    pub total: f64,
    /// Set when the plane carries no energy; fractions are then all zero.
    pub degenerate: bool,
}

pub fn region_energies(intensity: &IntensityMap, layout: &DetectorLayout) -> Result<RegionEnergies> {
    if intensity.n != layout.n() || intensity.values.len() != intensity.n * intensity.n {
        return Err(Error::config(
            "detector",
            format!(
                "layout is for a {0}×{0} plane, intensity is {1}×{1}",
                layout.n(),
                intensity.n
            ),
        ));
    }
    layout.validate()?;
    let n = intensity.n;
    let area = intensity.pitch * intensity.pitch;
    let energies: Vec<f64> = layout
        .regions()
        .iter()
        .map(|reg| {
            let mut sum = 0.0;
            for r in reg.row..reg.row + reg.height {
                sum += intensity.values[r * n + reg.col..r * n + reg.col + reg.width]
                    .iter()
                    .sum::<f64>();
            }
            sum * area
        })
        .collect();
    let total = intensity.total_energy();
    let degenerate = total <= 0.0;
    let fractions = if degenerate {
        vec![0.0; energies.len()]
    } else {
        energies.iter().map(|e| e / total).collect()
    };
    Ok(RegionEnergies {
        energies,
        fractions,
        total,
        degenerate,
    })
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn predict(energies: &[f64]) -> usize {
    let mut best = 0;
    for (k, &e) in energies.iter().enumerate().skip(1) {
        if e > energies[best] {
            best = k;
        }
    }
    best
}

/// Softmax probabilities of `gain · fractions`.
pub fn softmax_probabilities(fractions: &[f64], gain: f64) -> Vec<f64> {
    let logits: Vec<f64> = fractions.iter().map(|f| gain * f).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Cross-entropy `−log softmax(gain · f)_label` over the energy fractions.
pub fn loss_ce(energies: &RegionEnergies, label: usize, gain: f64) -> Result<f64> {
    if label >= energies.fractions.len() {
        return Err(Error::Domain(format!(
            "label {label} outside 0..{}",
            energies.fractions.len()
        )));
    }
    if energies.degenerate || energies.energies.iter().all(|&e| e == 0.0) {
        return Err(Error::Degenerate("detector plane carries no energy".into()));
    }
    let logits: Vec<f64> = energies.fractions.iter().map(|f| gain * f).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    Ok(lse - logits[label])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform(n: usize, v: f64) -> IntensityMap {
        IntensityMap {
            n,
            pitch: 400e-9,
            values: vec![v; n * n],
        }
    }

    #[test]
    fn uniform_plane_fraction_is_area_ratio() {
        let layout = DetectorLayout::new(
            10,
            1.0,
            vec![super::super::detector::Region {
                class_id: 0,
                row: 0,
                col: 0,
                height: 2,
                width: 2,
            }],
        )
        .unwrap();
        let e = region_energies(&uniform(10, 3.0), &layout).unwrap();
        assert!((e.fractions[0] - 0.04).abs() < 1e-15);
        assert!(!e.degenerate);
    }

    #[test]
    fn zero_plane_is_flagged() {
        let layout = DetectorLayout::standard(28, 10, 0.8).unwrap();
        let e = region_energies(&uniform(28, 0.0), &layout).unwrap();
        assert!(e.degenerate);
        assert!(e.energies.iter().all(|&v| v == 0.0));
        assert!(e.fractions.iter().all(|&v| v == 0.0));
        assert!(matches!(loss_ce(&e, 0, 10.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn mismatched_plane_is_rejected() {
        let layout = DetectorLayout::standard(28, 10, 0.8).unwrap();
        assert!(region_energies(&uniform(16, 1.0), &layout).is_err());
    }

    #[test]
    fn predict_examples() {
        let mut one_hot = vec![0.0; 10];
        one_hot[7] = 1.0;
        assert_eq!(predict(&one_hot), 7);
        assert_eq!(predict(&[2.0; 10]), 0);
        assert_eq!(predict(&[1.0, 3.0, 2.0, 0.0]), 1);
    }

    fn energies_from(fractions: Vec<f64>) -> RegionEnergies {
        RegionEnergies {
            energies: fractions.clone(),
            fractions,
            total: 1.0,
            degenerate: false,
        }
    }

    #[test]
    fn equal_fractions_give_log_ten() {
        for gain in [0.1, 1.0, 10.0, 100.0] {
            let l = loss_ce(&energies_from(vec![0.05; 10]), 3, gain).unwrap();
            assert!((l - 10f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_target_drives_loss_to_zero() {
        let mut f = vec![0.0; 10];
        f[4] = 0.9;
        let l = loss_ce(&energies_from(f), 4, 1e3).unwrap();
        assert!((0.0..1e-12).contains(&l));
    }

    #[test]
    fn label_out_of_range() {
        assert!(loss_ce(&energies_from(vec![0.1; 10]), 10, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn loss_matches_naive_softmax(
            f in proptest::collection::vec(0.0f64..0.1, 10),
            label in 0usize..10,
            gain in 0.1f64..50.0,
        ) {
            prop_assume!(f.iter().any(|&v| v > 0.0));
            let l = loss_ce(&energies_from(f.clone()), label, gain).unwrap();
            let z: f64 = f.iter().map(|v| (gain * v).exp()).sum();
            let naive = -((gain * f[label]).exp() / z).ln();
            prop_assert!((l - naive).abs() <= 1e-12 * naive.abs().max(1.0));
        }

        #[test]
        fn prediction_is_scale_invariant(
            v in proptest::collection::vec(0.0f64..1.0, 64),
            s in 1e-6f64..1e6,
        ) {
            let layout = DetectorLayout::standard(8, 4, 0.8).unwrap();
            let map = IntensityMap { n: 8, pitch: 1e-6, values: v };
            let a = region_energies(&map, &layout).unwrap();
            let b = region_energies(&map.scaled(s), &layout).unwrap();
            prop_assert_eq!(predict(&a.energies), predict(&b.energies));
        }

        #[test]
        fn fractions_sum_to_at_most_one(v in proptest::collection::vec(0.0f64..1.0, 784)) {
            let layout = DetectorLayout::standard(28, 10, 0.8).unwrap();
            let map = IntensityMap { n: 28, pitch: 4e-7, values: v };
            let e = region_energies(&map, &layout).unwrap();
            prop_assert!(e.fractions.iter().sum::<f64>() <= 1.0 + 1e-12);
        }
    }
}
