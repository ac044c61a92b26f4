//! Free-space propagation between parallel, co-axial planes using the first
//! Rayleigh-Sommerfeld impulse response
//!
//! ```text
//! h(x, y) = 1/(2π) · (Δz/R) · (1/R − jk) · e^{jkR} / R,   R = √(x² + y² + Δz²)
//! ```
//!
//! Three routes are provided: a literal double sum ([`propagate_direct`]),
//! a zero-padded FFT convolution ([`Propagator::forward`]) and its exact
//! adjoint ([`Propagator::adjoint`]). The padded support is `2n` per side,
//! so the circular convolution realizes the linear one without wrap-around
//! and the FFT path agrees with the double sum to rounding error.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{ComplexGrid, OpticalConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationSpec {
    /// Axial separation between source and target plane, metres.
    pub dz: f64,
    pub config: OpticalConfig,
}

impl PropagationSpec {
    pub fn new(dz: f64, config: OpticalConfig) -> Result<Self> {
        let spec = Self { dz, config };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if !(self.dz.is_finite() && self.dz > 0.0) {
            return Err(Error::Domain(format!(
                "dz = {} must be positive; R vanishes on axis otherwise",
                self.dz
            )));
        }
        Ok(())
    }

    pub fn diagnostics(&self) -> SamplingDiagnostics {
        let half_aperture = 0.5 * self.config.aperture();
        SamplingDiagnostics {
            pitch_over_wavelength: self.config.pitch / self.config.wavelength,
            fresnel_number: half_aperture * half_aperture / (self.config.wavelength * self.dz),
            undersampled: self.config.pitch > 0.5 * self.config.wavelength,
        }
    }
}

/// How faithfully the sampled kernel represents the continuous integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingDiagnostics {
    pub pitch_over_wavelength: f64,
    /// `a² / (λ Δz)` with `a` the half-width of the sampled plane.
    pub fresnel_number: f64,
    /// The pitch exceeds λ/2, so the highest transverse frequencies the
    /// kernel carries alias.
    pub undersampled: bool,
}

/// Kernel value at transverse offset `(x, y)`.
pub fn kernel_value(dz: f64, wavenumber: f64, x: f64, y: f64) -> Complex64 {
    let r2 = x * x + y * y + dz * dz;
    let r = r2.sqrt();
    let radial = Complex64::new(1.0 / r, -wavenumber);
    let phase = Complex64::from_polar(1.0, wavenumber * r);
    radial * phase * (dz / (2.0 * PI * r2))
}

/// Samples `h` on a centered `support_n × support_n` lattice of the config's
/// pitch; entry `(support_n − 1)/2, (support_n − 1)/2` is the on-axis value.
pub fn rs_kernel(spec: &PropagationSpec, support_n: usize) -> Result<ComplexGrid> {
    spec.validate()?;
    if support_n.is_multiple_of(2) {
        return Err(Error::config("support_n", "must be odd so the kernel is centered"));
    }
    let half = (support_n / 2) as isize;
    let k = spec.config.wavenumber();
    let p = spec.config.pitch;
    let mut data = Vec::with_capacity(support_n * support_n);
    for r in -half..=half {
        for c in -half..=half {
            data.push(kernel_value(spec.dz, k, r as f64 * p, c as f64 * p));
        }
    }
    Ok(ComplexGrid::from_raw(support_n, p, data))
}

fn check_field(field: &ComplexGrid, spec: &PropagationSpec) -> Result<()> {
    spec.validate()?;
    if field.pitch() != spec.config.pitch {
        return Err(Error::config(
            "pitch",
            format!(
                "field pitch {} differs from configured pitch {}",
                field.pitch(),
                spec.config.pitch
            ),
        ));
    }
    Ok(())
}

/// Reference propagation by literal summation over every source sample.
/// Cost is `O(n⁴)`; intended as an oracle for small grids.
pub fn propagate_direct(field: &ComplexGrid, spec: &PropagationSpec) -> Result<ComplexGrid> {
    check_field(field, spec)?;
    let n = field.n();
    let support = 2 * n - 1;
    let kernel = rs_kernel(spec, support)?;
    let area = spec.config.pitch * spec.config.pitch;
    let src = field.as_slice();
    let mut out = Vec::with_capacity(n * n);
    for pr in 0..n {
        for pc in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for ir in 0..n {
                // offset (pr − ir) maps to kernel row (pr − ir) + n − 1
                let krow = pr + n - 1 - ir;
                for ic in 0..n {
                    let kcol = pc + n - 1 - ic;
                    acc += src[ir * n + ic] * kernel.get(krow, kcol);
                }
            }
            out.push(acc * area);
        }
    }
    Ok(ComplexGrid::from_raw(n, field.pitch(), out))
}

/// Precomputed FFT plans and kernel spectrum for one `(spec, n)` pair.
/// Immutable after construction and shareable across threads.
pub struct Propagator {
    spec: PropagationSpec,
    n: usize,
    padded: usize,
    /// Kernel spectrum (including the pitch² area element), stored
    /// column-major to match the transposed working layout.
    spectrum_t: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("spec", &self.spec)
            .field("n", &self.n)
            .field("padded", &self.padded)
            .finish()
    }
}

impl Propagator {
    pub fn new(spec: PropagationSpec, n: usize) -> Result<Self> {
        spec.validate()?;
        if n == 0 {
            return Err(Error::config("grid_n", "must be positive"));
        }
        let diag = spec.diagnostics();
        if diag.undersampled {
            log::debug!(
                "pitch/λ = {:.3} exceeds 1/2 (Fresnel number {:.3}); sampled kernel approximates the continuous integral",
                diag.pitch_over_wavelength,
                diag.fresnel_number
            );
        }

        let m = 2 * n;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);

        // offsets d ∈ [−(n−1), n−1] stored at index d mod m; the remaining
        // index d = ±n is never reached by an n × n source and stays zero
        let k = spec.config.wavenumber();
        let p = spec.config.pitch;
        let area = p * p;
        let offset = |i: usize| -> Option<isize> {
            if i < n {
                Some(i as isize)
            } else if i > n {
                Some(i as isize - m as isize)
            } else {
                None
            }
        };
        let mut kernel = vec![Complex64::new(0.0, 0.0); m * m];
        for r in 0..m {
            let Some(dr) = offset(r) else { continue };
            for c in 0..m {
                let Some(dc) = offset(c) else { continue };
                kernel[r * m + c] = kernel_value(spec.dz, k, dr as f64 * p, dc as f64 * p) * area;
            }
        }

        let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len()];
        fwd.process_with_scratch(&mut kernel, &mut scratch);
        let mut spectrum_t = vec![Complex64::new(0.0, 0.0); m * m];
        transpose(&kernel, &mut spectrum_t, m, m, m);
        fwd.process_with_scratch(&mut spectrum_t, &mut scratch);

        Ok(Self {
            spec,
            n,
            padded: m,
            spectrum_t,
            fwd,
            inv,
        })
    }

    /// Process-wide cached instance for `(spec, n)`.
    pub fn shared(spec: PropagationSpec, n: usize) -> Result<Arc<Self>> {
        type Key = (u64, u64, u64, usize);
        static CACHE: OnceLock<RwLock<HashMap<Key, Arc<Propagator>>>> = OnceLock::new();
        let key = (
            spec.dz.to_bits(),
            spec.config.wavelength.to_bits(),
            spec.config.pitch.to_bits(),
            n,
        );
        let cache = CACHE.get_or_init(Default::default);
        if let Some(p) = cache.read().expect("propagator cache poisoned").get(&key) {
            return Ok(Arc::clone(p));
        }
        let built = Arc::new(Self::new(spec, n)?);
        let mut w = cache.write().expect("propagator cache poisoned");
        Ok(Arc::clone(w.entry(key).or_insert(built)))
    }

    pub fn spec(&self) -> &PropagationSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check(&self, field: &ComplexGrid) -> Result<()> {
        if field.n() != self.n {
            return Err(Error::config(
                "grid_n",
                format!("propagator built for n = {}, field has n = {}", self.n, field.n()),
            ));
        }
        check_field(field, &self.spec)
    }

    pub fn forward(&self, field: &ComplexGrid) -> Result<ComplexGrid> {
        self.check(field)?;
        Ok(ComplexGrid::from_raw(
            self.n,
            field.pitch(),
            self.apply(field.as_slice(), false),
        ))
    }

    /// Conjugate transpose of [`Propagator::forward`].
    pub fn adjoint(&self, field: &ComplexGrid) -> Result<ComplexGrid> {
        self.check(field)?;
        Ok(ComplexGrid::from_raw(
            self.n,
            field.pitch(),
            self.apply(field.as_slice(), true),
        ))
    }

    /// Unchecked forward/adjoint on a row-major `n × n` slice.
    pub(crate) fn apply(&self, src: &[Complex64], adjoint: bool) -> Vec<Complex64> {
        let n = self.n;
        let m = self.padded;
        let zero = Complex64::new(0.0, 0.0);
        let mut scratch = vec![zero; self.fwd.get_inplace_scratch_len()];

        // rows ≥ n of the padded input are zero, so only n row transforms
        let mut rows = vec![zero; n * m];
        for r in 0..n {
            rows[r * m..r * m + n].copy_from_slice(&src[r * n..(r + 1) * n]);
        }
        self.fwd.process_with_scratch(&mut rows, &mut scratch);

        let mut cols = vec![zero; m * m];
        transpose(&rows, &mut cols, n, m, m);
        self.fwd.process_with_scratch(&mut cols, &mut scratch);

        if adjoint {
            for (z, h) in cols.iter_mut().zip(&self.spectrum_t) {
                *z *= h.conj();
            }
        } else {
            for (z, h) in cols.iter_mut().zip(&self.spectrum_t) {
                *z *= h;
            }
        }
        self.inv.process_with_scratch(&mut cols, &mut scratch);

        // only the first n rows survive the crop
        let mut out_rows = vec![zero; n * m];
        for c in 0..m {
            for r in 0..n {
                out_rows[r * m + c] = cols[c * m + r];
            }
        }
        self.inv.process_with_scratch(&mut out_rows, &mut scratch);

        let norm = 1.0 / (m * m) as f64;
        let mut out = Vec::with_capacity(n * n);
        for r in 0..n {
            out.extend(out_rows[r * m..r * m + n].iter().map(|z| z * norm));
        }
        out
    }
}

/// Writes the transpose of a `rows × cols` row-major block (row stride
/// `stride`) into `dst`, laid out with row stride `stride` as well.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize, stride: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * stride + r] = src[r * stride + c];
        }
    }
}

/// FFT-based propagation; agrees with [`propagate_direct`].
pub fn propagate_fft(field: &ComplexGrid, spec: &PropagationSpec) -> Result<ComplexGrid> {
    check_field(field, spec)?;
    Propagator::shared(*spec, field.n())?.forward(field)
}

/// Adjoint of [`propagate_fft`]: correlation with the conjugated kernel.
pub fn propagate_adjoint(field: &ComplexGrid, spec: &PropagationSpec) -> Result<ComplexGrid> {
    check_field(field, spec)?;
    Propagator::shared(*spec, field.n())?.adjoint(field)
}
