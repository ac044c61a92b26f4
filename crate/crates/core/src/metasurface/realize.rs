//! Phase-to-geometry compilation.
//!
//! Each pixel picks the library entry minimizing the squared circular phase
//! distance summed over both polarization axes. Amplitude is not part of
//! the metric; it comes along as crosstalk. Ties resolve to the lowest
//! entry index.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::field::{Channel, OpticalConfig};
use crate::par;

use super::layer::MetaLayer;
use super::library::{wrap_phase, MetaUnit, MetaUnitLibrary};

/// Per-pixel library selection produced by [`realize`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryMap {
    n: usize,
    indices: Vec<usize>,
    units: Vec<MetaUnit>,
    /// Signed realized-minus-target phase error per axis, in `(−π, π]`.
    pub error_x: Vec<f64>,
    pub error_y: Vec<f64>,
}

impl GeometryMap {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn units(&self) -> &[MetaUnit] {
        &self.units
    }

    pub fn unit(&self, row: usize, col: usize) -> &MetaUnit {
        &self.units[row * self.n + col]
    }

    pub fn error(&self, ch: Channel) -> &[f64] {
        match ch {
            Channel::X => &self.error_x,
            Channel::Y => &self.error_y,
        }
    }
}

/// Circular distance between two phases, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Signed wrapped difference `a − b` in `(−π, π]`.
pub fn wrapped_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

fn cost(unit: &MetaUnit, tx: f64, ty: f64) -> f64 {
    let dx = circular_distance(unit.phi_xx, tx);
    let dy = circular_distance(unit.phi_yy, ty);
    dx * dx + dy * dy
}

/// Reference selection by scanning every entry.
pub fn nearest_brute_force(lib: &MetaUnitLibrary, tx: f64, ty: f64) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, u) in lib.entries().iter().enumerate() {
        let c = cost(u, tx, ty);
        if c < best.0 {
            best = (c, i);
        }
    }
    best.1
}

/// Bucket grid over the phase torus `[0, 2π)²` for nearest-entry queries.
struct PhaseIndex<'a> {
    lib: &'a MetaUnitLibrary,
    bins: usize,
    width: f64,
    cells: Vec<Vec<usize>>,
}

impl<'a> PhaseIndex<'a> {
    fn new(lib: &'a MetaUnitLibrary) -> Self {
        let bins = ((lib.len() as f64).sqrt() / 2.0).ceil().clamp(1.0, 512.0) as usize;
        let width = TAU / bins as f64;
        let mut cells = vec![Vec::new(); bins * bins];
        for (i, u) in lib.entries().iter().enumerate() {
            let (cx, cy) = (Self::bin(u.phi_xx, bins), Self::bin(u.phi_yy, bins));
            cells[cx * bins + cy].push(i);
        }
        Self {
            lib,
            bins,
            width,
            cells,
        }
    }

    fn bin(phi: f64, bins: usize) -> usize {
        ((wrap_phase(phi) / TAU * bins as f64) as usize).min(bins - 1)
    }

    /// Same answer as [`nearest_brute_force`], including tie-breaking.
    fn nearest(&self, tx: f64, ty: f64) -> usize {
        let b = self.bins as isize;
        let (cx, cy) = (Self::bin(tx, self.bins) as isize, Self::bin(ty, self.bins) as isize);
        let entries = self.lib.entries();
        let mut best = (f64::INFINITY, usize::MAX);
        let mut ring = 0isize;
        loop {
            if 2 * ring + 1 > b {
                // the ring would wrap onto visited cells
                return nearest_brute_force(self.lib, tx, ty);
            }
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    let x = (cx + dx).rem_euclid(b) as usize;
                    let y = (cy + dy).rem_euclid(b) as usize;
                    for &i in &self.cells[x * self.bins + y] {
                        let c = cost(&entries[i], tx, ty);
                        if c < best.0 || (c == best.0 && i < best.1) {
                            best = (c, i);
                        }
                    }
                }
            }
            // unvisited cells are ≥ ring + 1 cells away along some axis,
            // so their entries are at least ring·width away in phase (less a
            // sliver for rounding in the bin computation)
            let reach = ring as f64 * self.width * (1.0 - 1e-9);
            if best.0 < reach * reach {
                return best.1;
            }
            ring += 1;
        }
    }
}

/// Compiles target phase maps to library geometries. The returned layer
/// carries each selected entry's `(t_xx, t_yy, φ_xx, φ_yy)`.
pub fn realize(
    n: usize,
    pitch: f64,
    phi_x_target: &[f64],
    phi_y_target: &[f64],
    lib: &MetaUnitLibrary,
) -> Result<(GeometryMap, MetaLayer)> {
    if phi_x_target.len() != n * n || phi_y_target.len() != n * n {
        return Err(Error::config("phase", "target maps must be n × n"));
    }
    if lib.is_empty() {
        return Err(Error::config("library", "library is empty"));
    }
    let index = PhaseIndex::new(lib);
    let indices: Vec<usize> = par::map_range(n * n, |i| {
        index.nearest(phi_x_target[i], phi_y_target[i])
    });
    let units: Vec<MetaUnit> = indices.iter().map(|&i| lib.entries()[i]).collect();
    let error_x = units
        .iter()
        .zip(phi_x_target)
        .map(|(u, &t)| wrapped_difference(u.phi_xx, t))
        .collect();
    let error_y = units
        .iter()
        .zip(phi_y_target)
        .map(|(u, &t)| wrapped_difference(u.phi_yy, t))
        .collect();
    let layer = MetaLayer::from_parts(
        n,
        pitch,
        units.iter().map(|u| u.t_xx).collect(),
        units.iter().map(|u| u.t_yy).collect(),
        units.iter().map(|u| u.phi_xx).collect(),
        units.iter().map(|u| u.phi_yy).collect(),
    )?;
    Ok((
        GeometryMap {
            n,
            indices,
            units,
            error_x,
            error_y,
        },
        layer,
    ))
}

/// Realizes a trained layer after checking the library was simulated
/// under the model's wavelength and period.
pub fn realize_layer(
    layer: &MetaLayer,
    lib: &MetaUnitLibrary,
    config: &OpticalConfig,
) -> Result<(GeometryMap, MetaLayer)> {
    lib.check_compatible(config)?;
    realize(
        layer.n(),
        layer.pitch(),
        layer.phase(Channel::X),
        layer.phase(Channel::Y),
        lib,
    )
}

/// Summary of a realization's phase errors and amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationStats {
    pub max_abs_error: [f64; 2],
    pub mean_abs_error: [f64; 2],
    pub min_amplitude: [f64; 2],
    pub mean_amplitude: [f64; 2],
}

impl RealizationStats {
    pub fn of(geom: &GeometryMap) -> Self {
        let mut s = Self {
            max_abs_error: [0.0; 2],
            mean_abs_error: [0.0; 2],
            min_amplitude: [f64::INFINITY; 2],
            mean_amplitude: [0.0; 2],
        };
        let count = geom.units.len().max(1) as f64;
        for ch in Channel::ALL {
            let k = ch.index();
            for &e in geom.error(ch) {
                s.max_abs_error[k] = s.max_abs_error[k].max(e.abs());
                s.mean_abs_error[k] += e.abs() / count;
            }
            for u in &geom.units {
                let a = if ch == Channel::X { u.t_xx } else { u.t_yy };
                s.min_amplitude[k] = s.min_amplitude[k].min(a);
                s.mean_amplitude[k] += a / count;
            }
        }
        s
    }
}
