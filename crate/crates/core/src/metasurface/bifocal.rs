//! Polarization-dependent bifocal lens: the x channel focuses to one point
//! and the y channel to another, from a single layer of meta-units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Channel, ComplexGrid, OpticalConfig};
use crate::propagation::{PropagationSpec, Propagator};

use super::layer::MetaLayer;
use super::library::wrap_phase;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// Transverse coordinate of sample `i` on an `n`-sample axis centered on
/// the optical axis.
pub fn sample_coordinate(i: usize, n: usize, pitch: f64) -> f64 {
    (i as f64 - (n as f64 - 1.0) / 2.0) * pitch
}

/// Grid index nearest to transverse coordinate `x` (inverse of
/// [`sample_coordinate`], rounded).
pub fn nearest_sample(x: f64, n: usize, pitch: f64) -> isize {
    (x / pitch + (n as f64 - 1.0) / 2.0).round() as isize
}

/// Hyperbolic focusing phase `−k(√((x−x_f)² + (y−y_f)² + z_f²) − z_f)`,
/// wrapped to `[0, 2π)`. Rows index y, columns index x.
pub fn lens_phase(focus: Point3, config: &OpticalConfig, n: usize) -> Result<Vec<f64>> {
    config.validate()?;
    if !(focus.z.is_finite() && focus.z > 0.0) {
        return Err(Error::Domain(format!(
            "focal distance {} must be positive",
            focus.z
        )));
    }
    let k = config.wavenumber();
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        let y = sample_coordinate(r, n, config.pitch) - focus.y;
        for c in 0..n {
            let x = sample_coordinate(c, n, config.pitch) - focus.x;
            let path = (x * x + y * y + focus.z * focus.z).sqrt() - focus.z;
            out.push(wrap_phase(-k * path));
        }
    }
    Ok(out)
}

/// Phase maps `(φ_x, φ_y)` focusing x-polarized light to `focus_x` and
/// y-polarized light to `focus_y`.
pub fn bifocal_phases(
    focus_x: Point3,
    focus_y: Point3,
    config: &OpticalConfig,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((
        lens_phase(focus_x, config, n)?,
        lens_phase(focus_y, config, n)?,
    ))
}

/// Focal-plane readout of one illumination channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FocusReport {
    pub channel: Channel,
    pub designed: Point3,
    /// Grid cell `(row, col)` nearest the designed focus.
    pub designed_cell: (isize, isize),
    pub peak_cell: (usize, usize),
    pub peak_intensity: f64,
    /// Intensity of the other channel at `designed_cell` in this focal plane.
    pub cross_intensity: f64,
    /// Co-polarized intensity map in this channel's focal plane.
    #[serde(skip)]
    pub intensity: Vec<f64>,
}

impl FocusReport {
    /// Chebyshev distance in cells between the found and designed foci.
    pub fn peak_offset(&self) -> usize {
        let dr = (self.peak_cell.0 as isize - self.designed_cell.0).unsigned_abs();
        let dc = (self.peak_cell.1 as isize - self.designed_cell.1).unsigned_abs();
        dr.max(dc)
    }

    pub fn cross_ratio(&self) -> f64 {
        self.cross_intensity / self.peak_intensity
    }
}

/// Illuminates `layer` with unit plane waves in each polarization and
/// propagates to each channel's focal plane.
pub fn focal_readout(
    layer: &MetaLayer,
    config: &OpticalConfig,
    focus_x: Point3,
    focus_y: Point3,
) -> Result<[FocusReport; 2]> {
    let n = layer.n();
    let plane = ComplexGrid::from_data(n, config.pitch, vec![num_complex::Complex64::new(1.0, 0.0); n * n])?;
    let fields = [
        layer.apply_channel(&plane, Channel::X)?,
        layer.apply_channel(&plane, Channel::Y)?,
    ];
    let report = |ch: Channel, focus: Point3| -> Result<FocusReport> {
        let prop = Propagator::new(PropagationSpec::new(focus.z, *config)?, n)?;
        let co = prop.forward(&fields[ch.index()])?.intensity();
        let cross = prop.forward(&fields[1 - ch.index()])?.intensity();
        let (peak, &peak_intensity) = co
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let designed_cell = (
            nearest_sample(focus.y, n, config.pitch),
            nearest_sample(focus.x, n, config.pitch),
        );
        let inside = |v: isize| v >= 0 && (v as usize) < n;
        let cross_intensity = if inside(designed_cell.0) && inside(designed_cell.1) {
            cross[designed_cell.0 as usize * n + designed_cell.1 as usize]
        } else {
            0.0
        };
        Ok(FocusReport {
            channel: ch,
            designed: focus,
            designed_cell,
            peak_cell: (peak / n, peak % n),
            peak_intensity,
            cross_intensity,
            intensity: co,
        })
    };
    Ok([report(Channel::X, focus_x)?, report(Channel::Y, focus_y)?])
}

/// Designs the bifocal layer on an `n × n` grid and reads out both foci.
pub fn simulate_bifocal(
    config: &OpticalConfig,
    n: usize,
    focus_x: Point3,
    focus_y: Point3,
) -> Result<(MetaLayer, [FocusReport; 2])> {
    let (phi_x, phi_y) = bifocal_phases(focus_x, focus_y, config, n)?;
    let layer = MetaLayer::from_parts(
        n,
        config.pitch,
        vec![1.0; n * n],
        vec![1.0; n * n],
        phi_x,
        phi_y,
    )?;
    let reports = focal_readout(&layer, config, focus_x, focus_y)?;
    Ok((layer, reports))
}
