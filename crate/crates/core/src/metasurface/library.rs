//! Meta-unit response tables.
//!
//! On disk a library is a CSV file preceded by `#` metadata lines:
//!
//! ```text
//! # pitch_nm=400
//! # height_nm=600
//! # wavelength_nm=532
//! dx_nm,dy_nm,t_xx,t_yy,phi_xx_rad,phi_yy_rad
//! 120,80,0.93,0.97,1.2566370614359172,0.6283185307179586
//! ```

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::OpticalConfig;

pub const HEADER: [&str; 6] = ["dx_nm", "dy_nm", "t_xx", "t_yy", "phi_xx_rad", "phi_yy_rad"];

/// A single rectangular nanopillar and its simulated response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaUnit {
    pub dx_nm: f64,
    pub dy_nm: f64,
    pub t_xx: f64,
    pub t_yy: f64,
    pub phi_xx: f64,
    pub phi_yy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaUnitLibrary {
    entries: Vec<MetaUnit>,
    pub pitch_nm: f64,
    pub height_nm: f64,
    pub wavelength_nm: f64,
}

/// Relative tolerance when matching library metadata against a config.
const METADATA_RTOL: f64 = 1e-6;

impl MetaUnitLibrary {
    /// Validates and builds a library. Phases are wrapped into `[0, 2π)`.
    pub fn new(
        entries: Vec<MetaUnit>,
        pitch_nm: f64,
        height_nm: f64,
        wavelength_nm: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("pitch_nm", pitch_nm),
            ("height_nm", height_nm),
            ("wavelength_nm", wavelength_nm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, "must be a positive length"));
            }
        }
        if entries.is_empty() {
            return Err(Error::config("entries", "library is empty"));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        let mut wrapped = Vec::with_capacity(entries.len());
        for (row, mut unit) in entries.into_iter().enumerate() {
            validate_unit(&unit, pitch_nm).map_err(|m| Error::Domain(format!("row {row}: {m}")))?;
            if !seen.insert((unit.dx_nm.to_bits(), unit.dy_nm.to_bits())) {
                return Err(Error::Domain(format!(
                    "row {row}: duplicate geometry ({}, {})",
                    unit.dx_nm, unit.dy_nm
                )));
            }
            unit.phi_xx = wrap_phase(unit.phi_xx);
            unit.phi_yy = wrap_phase(unit.phi_yy);
            wrapped.push(unit);
        }
        Ok(Self {
            entries: wrapped,
            pitch_nm,
            height_nm,
            wavelength_nm,
        })
    }

    pub fn entries(&self) -> &[MetaUnit] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Refuses a config whose wavelength or pitch differs from the
    /// conditions the responses were simulated under.
    pub fn check_compatible(&self, config: &OpticalConfig) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= METADATA_RTOL * b.abs();
        if !close(config.wavelength * 1e9, self.wavelength_nm) {
            return Err(Error::config(
                "wavelength",
                format!(
                    "library was simulated at {} nm, model uses {} nm",
                    self.wavelength_nm,
                    config.wavelength * 1e9
                ),
            ));
        }
        if !close(config.pitch * 1e9, self.pitch_nm) {
            return Err(Error::config(
                "pitch",
                format!(
                    "library period is {} nm, model uses {} nm",
                    self.pitch_nm,
                    config.pitch * 1e9
                ),
            ));
        }
        Ok(())
    }

    /// Serializes to the library CSV format.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# pitch_nm={}\n", self.pitch_nm));
        out.push_str(&format!("# height_nm={}\n", self.height_nm));
        out.push_str(&format!("# wavelength_nm={}\n", self.wavelength_nm));
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(HEADER).expect("in-memory write");
        for u in &self.entries {
            w.write_record(
                [u.dx_nm, u.dy_nm, u.t_xx, u.t_yy, u.phi_xx, u.phi_yy].map(|v| v.to_string()),
            )
            .expect("in-memory write");
        }
        let body = w.into_inner().expect("in-memory flush");
        out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv_string().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut pitch = None;
        let mut height = None;
        let mut wavelength = None;
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let trimmed = line.trim();
            if let Some(meta) = trimmed.strip_prefix('#') {
                if let Some((key, value)) = meta.split_once('=') {
                    let value: f64 = value.trim().parse().map_err(|_| {
                        Error::parse(origin, format!("metadata `{}` is not a number", key.trim()))
                    })?;
                    match key.trim() {
                        "pitch_nm" => pitch = Some(value),
                        "height_nm" => height = Some(value),
                        "wavelength_nm" => wavelength = Some(value),
                        other => log::debug!("ignoring library metadata `{other}`"),
                    }
                }
                body_start += line.len();
            } else if trimmed.is_empty() {
                body_start += line.len();
            } else {
                break;
            }
        }
        let missing = |name: &str| Error::parse(origin, format!("missing `# {name}=` metadata"));
        let pitch = pitch.ok_or_else(|| missing("pitch_nm"))?;
        let height = height.ok_or_else(|| missing("height_nm"))?;
        let wavelength = wavelength.ok_or_else(|| missing("wavelength_nm"))?;

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(&text.as_bytes()[body_start..]);
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(origin, e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != HEADER {
            return Err(Error::parse(
                origin,
                format!("expected header `{}`", HEADER.join(",")),
            ));
        }
        let mut entries = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| Error::parse(origin, format!("row {row}: {e}")))?;
            if record.len() != HEADER.len() {
                return Err(Error::parse(
                    origin,
                    format!("row {row}: expected {} fields, got {}", HEADER.len(), record.len()),
                ));
            }
            let mut v = [0.0; 6];
            for (i, field) in record.iter().enumerate() {
                v[i] = field.parse().map_err(|_| {
                    Error::parse(origin, format!("row {row}: `{}` = `{field}` is not a number", HEADER[i]))
                })?;
            }
            let unit = MetaUnit {
                dx_nm: v[0],
                dy_nm: v[1],
                t_xx: v[2],
                t_yy: v[3],
                phi_xx: v[4],
                phi_yy: v[5],
            };
            entries.push(unit);
        }
        Self::new(entries, pitch, height, wavelength).map_err(|e| match e {
            Error::Domain(m) | Error::Config { message: m, .. } => Error::parse(origin, m),
            other => other,
        })
    }
}

fn validate_unit(u: &MetaUnit, pitch_nm: f64) -> std::result::Result<(), String> {
    for (name, v) in [("dx_nm", u.dx_nm), ("dy_nm", u.dy_nm)] {
        if !(v > 0.0 && v < pitch_nm) {
            return Err(format!("{name} = {v} must lie in (0, {pitch_nm})"));
        }
    }
    for (name, v) in [("t_xx", u.t_xx), ("t_yy", u.t_yy)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("{name} = {v} is outside [0, 1]"));
        }
    }
    for (name, v) in [("phi_xx_rad", u.phi_xx), ("phi_yy_rad", u.phi_yy)] {
        if !v.is_finite() {
            return Err(format!("{name} is not finite"));
        }
    }
    Ok(())
}

/// Maps any finite phase into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Reads and validates a library file.
pub fn load_library(path: &Path) -> Result<MetaUnitLibrary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MetaUnitLibrary::parse(&text, path)
}

/// Ideal `steps × steps` library at 532 nm / 400 nm period / 600 nm height:
/// `D_x, D_y` sweep `50 + 300·i/steps` nm and each phase grows linearly with
/// its own axis (`φ = 2π·i/steps`) at unit transmission.
pub fn synth_library(steps: usize) -> Result<MetaUnitLibrary> {
    if steps < 2 {
        return Err(Error::config("steps", "need at least 2 steps per axis"));
    }
    let mut entries = Vec::with_capacity(steps * steps);
    let s = steps as f64;
    for i in 0..steps {
        for j in 0..steps {
            entries.push(MetaUnit {
                dx_nm: 50.0 + 300.0 * i as f64 / s,
                dy_nm: 50.0 + 300.0 * j as f64 / s,
                t_xx: 1.0,
                t_yy: 1.0,
                phi_xx: TAU * i as f64 / s,
                phi_yy: TAU * j as f64 / s,
            });
        }
    }
    MetaUnitLibrary::new(entries, 400.0, 600.0, 532.0)
}
