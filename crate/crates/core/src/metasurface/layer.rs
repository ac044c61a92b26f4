use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{Channel, ComplexGrid, PolarizedField};

/// One hidden layer of meta-neurons. Each pixel acts on the incident Jones
/// vector through `diag(a_x e^{jφ_x}, a_y e^{jφ_y})`; the pillar axes are
/// aligned with x/y (θ = 0), so the two channels never mix.
///
/// Phases are stored unwrapped and only enter through `e^{jφ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaLayer {
    n: usize,
    pitch: f64,
    amplitude: [Vec<f64>; 2],
    phase: [Vec<f64>; 2],
}

impl MetaLayer {
    /// Unit amplitude, zero phase: the identity in both channels.
    pub fn identity(n: usize, pitch: f64) -> Self {
        Self {
            n,
            pitch,
            amplitude: [vec![1.0; n * n], vec![1.0; n * n]],
            phase: [vec![0.0; n * n], vec![0.0; n * n]],
        }
    }

    /// Unit amplitude with phases drawn uniformly from `[0, 2π)`.
    pub fn random_phase(n: usize, pitch: f64, rng: &mut impl Rng) -> Self {
        let mut layer = Self::identity(n, pitch);
        for ch in Channel::ALL {
            for v in layer.phase[ch.index()].iter_mut() {
                *v = rng.gen_range(0.0..TAU);
            }
        }
        layer
    }

    pub fn from_parts(
        n: usize,
        pitch: f64,
        a_x: Vec<f64>,
        a_y: Vec<f64>,
        phi_x: Vec<f64>,
        phi_y: Vec<f64>,
    ) -> Result<Self> {
        let mut layer = Self::identity(n, pitch);
        layer.set_amplitude(Channel::X, a_x)?;
        layer.set_amplitude(Channel::Y, a_y)?;
        layer.set_phase(Channel::X, phi_x)?;
        layer.set_phase(Channel::Y, phi_y)?;
        Ok(layer)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn amplitude(&self, ch: Channel) -> &[f64] {
        &self.amplitude[ch.index()]
    }

    pub fn phase(&self, ch: Channel) -> &[f64] {
        &self.phase[ch.index()]
    }

    /// Mutable phase map; any finite value is a valid phase.
    pub fn phase_mut(&mut self, ch: Channel) -> &mut [f64] {
        &mut self.phase[ch.index()]
    }

    pub fn set_phase(&mut self, ch: Channel, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n * self.n {
            return Err(Error::config("phase", "shape does not match the layer"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("phase {i} is not finite")));
        }
        self.phase[ch.index()] = values;
        Ok(())
    }

    pub fn set_amplitude(&mut self, ch: Channel, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n * self.n {
            return Err(Error::config("amplitude", "shape does not match the layer"));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!(
                "amplitude {i} = {} is outside [0, 1]",
                values[i]
            )));
        }
        self.amplitude[ch.index()] = values;
        Ok(())
    }

    /// Complex transmission `a e^{jφ}` of one channel.
    pub fn transmission(&self, ch: Channel) -> Vec<Complex64> {
        self.amplitude[ch.index()]
            .iter()
            .zip(&self.phase[ch.index()])
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect()
    }

    /// Jones matrix of pixel `idx`.
    pub fn jones(&self, idx: usize) -> [[Complex64; 2]; 2] {
        let zero = Complex64::new(0.0, 0.0);
        let tx = Complex64::from_polar(self.amplitude[0][idx], self.phase[0][idx]);
        let ty = Complex64::from_polar(self.amplitude[1][idx], self.phase[1][idx]);
        [[tx, zero], [zero, ty]]
    }

    fn check_grid(&self, grid: &ComplexGrid) -> Result<()> {
        if grid.n() != self.n || grid.pitch() != self.pitch {
            return Err(Error::config(
                "layer",
                format!(
                    "layer is {}x{} at pitch {}, field is {}x{} at pitch {}",
                    self.n,
                    self.n,
                    self.pitch,
                    grid.n(),
                    grid.n(),
                    grid.pitch()
                ),
            ));
        }
        Ok(())
    }

    /// Modulates a single channel.
    pub fn apply_channel(&self, grid: &ComplexGrid, ch: Channel) -> Result<ComplexGrid> {
        self.check_grid(grid)?;
        let data = self.modulate(grid.as_slice(), ch);
        Ok(ComplexGrid::from_raw(self.n, self.pitch, data))
    }

    pub(crate) fn modulate(&self, src: &[Complex64], ch: Channel) -> Vec<Complex64> {
        src.iter()
            .zip(&self.amplitude[ch.index()])
            .zip(&self.phase[ch.index()])
            .map(|((u, &a), &p)| u * Complex64::from_polar(a, p))
            .collect()
    }
}

/// Applies the layer's diagonal Jones transmission to both channels.
pub fn apply_layer(field: &PolarizedField, layer: &MetaLayer) -> Result<PolarizedField> {
    let x = layer.apply_channel(field.channel(Channel::X), Channel::X)?;
    let y = layer.apply_channel(field.channel(Channel::Y), Channel::Y)?;
    PolarizedField::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::total_energy;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const P: f64 = 400e-9;

    fn random_field(n: usize, seed: u64) -> PolarizedField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut grid = || {
            let d = (0..n * n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            ComplexGrid::from_data(n, P, d).unwrap()
        };
        let x = grid();
        let y = grid();
        PolarizedField::new(x, y).unwrap()
    }

    #[test]
    fn identity_layer_is_identity() {
        let f = random_field(6, 1);
        let out = apply_layer(&f, &MetaLayer::identity(6, P)).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn y_phase_never_touches_x_channel() {
        let f = random_field(6, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layer = MetaLayer::random_phase(6, P, &mut rng);
        let mut other = layer.clone();
        for v in other.phase_mut(Channel::Y) {
            *v += 1.234;
        }
        let a = apply_layer(&f, &layer).unwrap();
        let b = apply_layer(&f, &other).unwrap();
        assert_eq!(a.channel(Channel::X), b.channel(Channel::X));
        assert_ne!(a.channel(Channel::Y), b.channel(Channel::Y));
    }

    #[test]
    fn half_amplitude_quarters_energy() {
        let f = random_field(5, 3);
        let mut layer = MetaLayer::identity(5, P);
        layer.set_amplitude(Channel::X, vec![0.5; 25]).unwrap();
        let out = apply_layer(&f, &layer).unwrap();
        let before = total_energy(f.channel(Channel::X));
        let after = total_energy(out.channel(Channel::X));
        assert!((after - 0.25 * before).abs() <= 1e-15 * before);
    }

    #[test]
    fn shape_and_range_errors() {
        let f = random_field(5, 4);
        assert!(apply_layer(&f, &MetaLayer::identity(4, P)).is_err());
        let mut layer = MetaLayer::identity(4, P);
        assert!(layer.set_amplitude(Channel::X, vec![1.5; 16]).is_err());
        assert!(layer.set_phase(Channel::Y, vec![0.0; 15]).is_err());
        assert!(layer.set_phase(Channel::Y, vec![f64::NAN; 16]).is_err());
    }

    #[test]
    fn jones_matrix_is_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = MetaLayer::random_phase(3, P, &mut rng);
        let j = layer.jones(4);
        assert_eq!(j[0][1], Complex64::new(0.0, 0.0));
        assert_eq!(j[1][0], Complex64::new(0.0, 0.0));
        assert!((j[0][0].arg().rem_euclid(TAU) - layer.phase(Channel::X)[4]).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn unit_amplitude_preserves_energy(seed in 0u64..1000) {
            let f = random_field(4, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let layer = MetaLayer::random_phase(4, P, &mut rng);
            let out = apply_layer(&f, &layer).unwrap();
            for ch in Channel::ALL {
                let (a, b) = (total_energy(f.channel(ch)), total_energy(out.channel(ch)));
                prop_assert!((a - b).abs() <= 1e-12 * a);
            }
        }

        #[test]
        fn phases_act_modulo_two_pi(seed in 0u64..1000, turns in -3i32..4) {
            let f = random_field(4, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let layer = MetaLayer::random_phase(4, P, &mut rng);
            let mut shifted = layer.clone();
            for ch in Channel::ALL {
                for v in shifted.phase_mut(ch) {
                    *v += turns as f64 * TAU;
                }
            }
            let a = apply_layer(&f, &layer).unwrap();
            let b = apply_layer(&f, &shifted).unwrap();
            for ch in Channel::ALL {
                for (u, v) in a.channel(ch).as_slice().iter().zip(b.channel(ch).as_slice()) {
                    prop_assert!((u - v).norm() <= 1e-12 * (1.0 + u.norm()));
                }
            }
        }
    }
}
