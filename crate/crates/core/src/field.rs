//! Complex field grids, input encodings and energy accounting.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Illumination and sampling parameters shared by every plane of a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalConfig {
    /// Free-space wavelength in metres.
    pub wavelength: f64,
    /// Sampling period of every plane (the meta-unit period) in metres.
    pub pitch: f64,
    /// Samples per side.
    pub grid_n: usize,
}

impl OpticalConfig {
    pub const VISIBLE_GREEN: f64 = 532e-9;
    pub const PILLAR_PERIOD: f64 = 400e-9;

    pub fn new(wavelength: f64, pitch: f64, grid_n: usize) -> Result<Self> {
        let cfg = Self {
            wavelength,
            pitch,
            grid_n,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 532 nm illumination on a 400 nm lattice.
    pub fn visible(grid_n: usize) -> Self {
        Self {
            wavelength: Self::VISIBLE_GREEN,
            pitch: Self::PILLAR_PERIOD,
            grid_n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::config("wavelength", "must be a positive length"));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::config("pitch", "must be a positive length"));
        }
        if self.grid_n < 2 {
            return Err(Error::config("grid_n", "need at least 2 samples per side"));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Physical side length of the sampled plane.
    pub fn aperture(&self) -> f64 {
        self.pitch * self.grid_n as f64
    }
}

/// Polarization channel addressed by linearly polarized illumination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    X,
    Y,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::X, Channel::Y];

    pub fn index(self) -> usize {
        match self {
            Channel::X => 0,
            Channel::Y => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::X => "x",
            Channel::Y => "y",
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Square, row-major grayscale image with pixel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    side: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(side: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != side * side {
            return Err(Error::Domain(format!(
                "image of side {side} needs {} pixels, got {}",
                side * side,
                pixels.len()
            )));
        }
        if let Some((i, v)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Domain(format!("pixel {i} = {v} is outside [0, 1]")));
        }
        Ok(Self { side, pixels })
    }

    pub fn filled(side: usize, value: f64) -> Result<Self> {
        Self::new(side, vec![value; side * side])
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.side + col]
    }
}

/// Square array of complex field samples on a lattice of period `pitch`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    n: usize,
    pitch: f64,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(n: usize, pitch: f64) -> Self {
        Self {
            n,
            pitch,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_data(n: usize, pitch: f64, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Domain(format!(
                "grid of side {n} needs {} samples, got {}",
                n * n,
                data.len()
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::config("pitch", "must be a positive length"));
        }
        if let Some(i) = data.iter().position(|z| !z.is_finite()) {
            return Err(Error::Domain(format!("sample {i} is not finite")));
        }
        Ok(Self { n, pitch, data })
    }

    pub(crate) fn from_raw(n: usize, pitch: f64, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, pitch, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.n + col] = value;
    }

    /// `|u|²` per sample.
    pub fn intensity(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn same_geometry(&self, other: &ComplexGrid) -> bool {
        self.n == other.n && self.pitch == other.pitch
    }

    pub fn scale(&self, factor: Complex64) -> ComplexGrid {
        Self::from_raw(
            self.n,
            self.pitch,
            self.data.iter().map(|z| z * factor).collect(),
        )
    }

    /// Elementwise `self + factor * other`.
    pub fn axpy(&self, factor: Complex64, other: &ComplexGrid) -> ComplexGrid {
        debug_assert!(self.same_geometry(other));
        Self::from_raw(
            self.n,
            self.pitch,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + factor * b)
                .collect(),
        )
    }

    /// `Σ conj(self_i) · other_i`.
    pub fn inner(&self, other: &ComplexGrid) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Jones-vector field: one complex grid per polarization channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizedField {
    x: ComplexGrid,
    y: ComplexGrid,
}

impl PolarizedField {
    pub fn new(x: ComplexGrid, y: ComplexGrid) -> Result<Self> {
        if !x.same_geometry(&y) {
            return Err(Error::config(
                "field",
                "x and y channels must share size and pitch",
            ));
        }
        Ok(Self { x, y })
    }

    /// Field that is dark in every channel except `channel`.
    pub fn single(channel: Channel, grid: ComplexGrid) -> Self {
        let dark = ComplexGrid::zeros(grid.n(), grid.pitch());
        match channel {
            Channel::X => Self { x: grid, y: dark },
            Channel::Y => Self { x: dark, y: grid },
        }
    }

    pub fn channel(&self, channel: Channel) -> &ComplexGrid {
        match channel {
            Channel::X => &self.x,
            Channel::Y => &self.y,
        }
    }

    pub fn channel_mut(&mut self, channel: Channel) -> &mut ComplexGrid {
        match channel {
            Channel::X => &mut self.x,
            Channel::Y => &mut self.y,
        }
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn pitch(&self) -> f64 {
        self.x.pitch()
    }

    pub fn into_channels(self) -> (ComplexGrid, ComplexGrid) {
        (self.x, self.y)
    }
}

/// Transmits the image as a real amplitude with zero phase.
pub fn encode_amplitude(image: &Image, pitch: f64) -> Result<ComplexGrid> {
    let data = image
        .pixels()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    ComplexGrid::from_data(image.side(), pitch, data)
}

/// Unit-amplitude field with phase `max_phase · pixel`.
pub fn encode_phase(image: &Image, pitch: f64, max_phase: f64) -> Result<ComplexGrid> {
    if !(max_phase > 0.0 && max_phase <= 2.0 * PI) {
        return Err(Error::config("max_phase", "must lie in (0, 2π]"));
    }
    let data = image
        .pixels()
        .iter()
        .map(|&v| Complex64::from_polar(1.0, max_phase * v))
        .collect();
    ComplexGrid::from_data(image.side(), pitch, data)
}

/// Replicates every sample into a `factor × factor` block. The pitch is kept,
/// so the neuron count grows while the pixel size stays fixed.
pub fn upsample_nearest(grid: &ComplexGrid, factor: usize) -> Result<ComplexGrid> {
    if factor == 0 {
        return Err(Error::config("factor", "must be at least 1"));
    }
    let n = grid.n();
    let m = n * factor;
    let mut data = Vec::with_capacity(m * m);
    for r in 0..m {
        let src = &grid.as_slice()[(r / factor) * n..(r / factor + 1) * n];
        for c in 0..m {
            data.push(src[c / factor]);
        }
    }
    Ok(ComplexGrid::from_raw(m, grid.pitch(), data))
}

/// Averages non-overlapping `factor × factor` blocks; inverse of
/// [`upsample_nearest`].
pub fn downsample_average(grid: &ComplexGrid, factor: usize) -> Result<ComplexGrid> {
    if factor == 0 || !grid.n().is_multiple_of(factor) {
        return Err(Error::config(
            "factor",
            format!("must be a nonzero divisor of {}", grid.n()),
        ));
    }
    let m = grid.n() / factor;
    let norm = (factor * factor) as f64;
    let mut data = Vec::with_capacity(m * m);
    for br in 0..m {
        for bc in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in br * factor..(br + 1) * factor {
                for c in bc * factor..(bc + 1) * factor {
                    acc += grid.get(r, c);
                }
            }
            data.push(acc / norm);
        }
    }
    Ok(ComplexGrid::from_raw(m, grid.pitch(), data))
}

/// `Σ|u|² · pitch²`.
pub fn total_energy(grid: &ComplexGrid) -> f64 {
    let sum: f64 = grid.as_slice().iter().map(|z| z.norm_sqr()).sum();
    sum * grid.pitch() * grid.pitch()
}
