use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{Channel, ComplexGrid, OpticalConfig, PolarizedField};
use crate::metasurface::MetaLayer;
use crate::propagation::{PropagationSpec, Propagator};

use super::detector::DetectorLayout;
use super::readout::{loss_ce, region_energies, softmax_probabilities, IntensityMap, RegionEnergies};

/// Spacing between hidden layers used by default.
pub const DEFAULT_LAYER_GAP: f64 = 100e-6;

/// Stack of metasurface layers separated by free-space gaps.
/// `gaps[0]` is input → first layer, `gaps[l]` follows layer `l − 1`, and
/// the last gap reaches the detector. A zero gap means contact.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    config: OpticalConfig,
    layers: Vec<MetaLayer>,
    gaps: Vec<f64>,
    propagators: Vec<Option<Arc<Propagator>>>,
}

impl PartialEq for NetworkModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.layers == other.layers && self.gaps == other.gaps
    }
}

/// Contact input followed by `DEFAULT_LAYER_GAP` everywhere else.
pub fn default_gaps(num_layers: usize) -> Vec<f64> {
    let mut gaps = vec![DEFAULT_LAYER_GAP; num_layers + 1];
    if num_layers > 0 {
        gaps[0] = 0.0;
    }
    gaps
}

/// `num_layers + 1` finite gaps: the first ≥ 0, the rest > 0.
pub fn check_gaps(gaps: &[f64], num_layers: usize) -> Result<()> {
    if gaps.len() != num_layers + 1 {
        return Err(Error::config(
            "gaps",
            format!(
                "need {} gaps for {num_layers} layers, got {}",
                num_layers + 1,
                gaps.len()
            ),
        ));
    }
    for (i, &g) in gaps.iter().enumerate() {
        let ok = g.is_finite() && if i == 0 { g >= 0.0 } else { g > 0.0 };
        if !ok {
            return Err(Error::config(
                format!("gaps[{i}]"),
                if i == 0 { "must be ≥ 0" } else { "must be > 0" },
            ));
        }
    }
    Ok(())
}

impl NetworkModel {
    pub fn new(config: OpticalConfig, layers: Vec<MetaLayer>, gaps: Vec<f64>) -> Result<Self> {
        config.validate()?;
        check_gaps(&gaps, layers.len())?;
        for (i, layer) in layers.iter().enumerate() {
            if layer.n() != config.grid_n || layer.pitch() != config.pitch {
                return Err(Error::config(
                    format!("layers[{i}]"),
                    "layer grid differs from the optical config",
                ));
            }
        }
        let propagators = gaps
            .iter()
            .map(|&dz| {
                if dz == 0.0 {
                    Ok(None)
                } else {
                    Propagator::shared(PropagationSpec::new(dz, config)?, config.grid_n).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            layers,
            gaps,
            propagators,
        })
    }

    /// Layers with unit amplitude and phases uniform in `[0, 2π)`.
    pub fn random(
        config: OpticalConfig,
        num_layers: usize,
        gaps: Vec<f64>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let layers = (0..num_layers)
            .map(|_| MetaLayer::random_phase(config.grid_n, config.pitch, rng))
            .collect();
        Self::new(config, layers, gaps)
    }

    /// Layers with unit amplitude and zero phase.
    pub fn identity(config: OpticalConfig, num_layers: usize, gaps: Vec<f64>) -> Result<Self> {
        let layers = (0..num_layers)
            .map(|_| MetaLayer::identity(config.grid_n, config.pitch))
            .collect();
        Self::new(config, layers, gaps)
    }

    pub fn config(&self) -> &OpticalConfig {
        &self.config
    }

    pub fn layers(&self) -> &[MetaLayer] {
        &self.layers
    }

    pub fn layer_mut(&mut self, index: usize) -> &mut MetaLayer {
        &mut self.layers[index]
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Same geometry with the layers replaced.
    pub fn with_layers(&self, layers: Vec<MetaLayer>) -> Result<Self> {
        Self::new(self.config, layers, self.gaps.clone())
    }

    fn propagate(&self, gap: usize, src: Vec<Complex64>, adjoint: bool) -> Vec<Complex64> {
        match &self.propagators[gap] {
            Some(p) => p.apply(&src, adjoint),
            None => src,
        }
    }

    fn check_input(&self, grid: &ComplexGrid) -> Result<()> {
        if grid.n() != self.config.grid_n || grid.pitch() != self.config.pitch {
            return Err(Error::config(
                "input",
                format!(
                    "field is {0}×{0} at pitch {1:e} m, model expects {2}×{2} at {3:e} m",
                    grid.n(),
                    grid.pitch(),
                    self.config.grid_n,
                    self.config.pitch
                ),
            ));
        }
        Ok(())
    }

    /// Runs one channel through the stack. With `keep_cache` the field
    /// leaving every layer is retained for [`backward`].
    pub fn forward_channel(
        &self,
        input: &ComplexGrid,
        channel: Channel,
        keep_cache: bool,
    ) -> Result<ChannelPass> {
        self.check_input(input)?;
        let mut cache = keep_cache.then(|| Vec::with_capacity(self.layers.len()));
        let mut u = input.as_slice().to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            u = layer.modulate(&self.propagate(l, u, false), channel);
            if let Some(c) = cache.as_mut() {
                c.push(u.clone());
            }
        }
        let output = self.propagate(self.layers.len(), u, false);
        Ok(ChannelPass {
            channel,
            n: self.config.grid_n,
            pitch: self.config.pitch,
            layer_outputs: cache,
            output,
        })
    }

    pub fn forward(&self, input: &PolarizedField, keep_cache: bool) -> Result<ForwardPass> {
        Ok(ForwardPass {
            x: self.forward_channel(input.channel(Channel::X), Channel::X, keep_cache)?,
            y: self.forward_channel(input.channel(Channel::Y), Channel::Y, keep_cache)?,
        })
    }
}

/// Result of one channel's forward sweep.
#[derive(Debug, Clone)]
pub struct ChannelPass {
    pub channel: Channel,
    n: usize,
    pitch: f64,
    layer_outputs: Option<Vec<Vec<Complex64>>>,
    output: Vec<Complex64>,
}

impl ChannelPass {
    pub fn output(&self) -> ComplexGrid {
        ComplexGrid::from_raw(self.n, self.pitch, self.output.clone())
    }

    pub fn intensity(&self) -> IntensityMap {
        IntensityMap {
            n: self.n,
            pitch: self.pitch,
            values: self.output.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    pub fn has_cache(&self) -> bool {
        self.layer_outputs.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub x: ChannelPass,
    pub y: ChannelPass,
}

impl ForwardPass {
    pub fn channel(&self, ch: Channel) -> &ChannelPass {
        match ch {
            Channel::X => &self.x,
            Channel::Y => &self.y,
        }
    }
}

/// Loss and phase gradients of one channel for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGradient {
    pub channel: Channel,
    pub loss: f64,
    pub energies: RegionEnergies,
    /// `∂L/∂φ` per layer, row-major.
    pub phase: Vec<Vec<f64>>,
}

/// Reverse sweep for the cross-entropy loss of `pass`. Requires a pass
/// produced with `keep_cache = true`.
pub fn backward(
    model: &NetworkModel,
    pass: &ChannelPass,
    layout: &DetectorLayout,
    label: usize,
    gain: f64,
) -> Result<ChannelGradient> {
    let cache = pass.layer_outputs.as_ref().ok_or_else(|| {
        Error::Usage("backward needs a forward pass run with the layer cache".into())
    })?;
    if cache.len() != model.num_layers() || pass.n != model.config.grid_n {
        return Err(Error::Usage("forward pass belongs to a different model".into()));
    }
    let intensity = pass.intensity();
    let energies = region_energies(&intensity, layout)?;
    let loss = loss_ce(&energies, label, gain)?;

    // ∂L/∂f_k = gain·(p_k − δ_k); ∂f_k/∂I(q) = pitch²/T·(1[q ∈ R_k] − f_k)
    let probs = softmax_probabilities(&energies.fractions, gain);
    let g: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(k, p)| gain * (p - if k == label { 1.0 } else { 0.0 }))
        .collect();
    let mean_g: f64 = g.iter().zip(&energies.fractions).map(|(a, f)| a * f).sum();
    let scale = pass.pitch * pass.pitch / energies.total;
    let mut dl_di = vec![-mean_g * scale; pass.output.len()];
    let n = pass.n;
    for reg in layout.regions() {
        let v = (g[reg.class_id] - mean_g) * scale;
        for r in reg.row..reg.row + reg.height {
            dl_di[r * n + reg.col..r * n + reg.col + reg.width].fill(v);
        }
    }

    // G = ∂L/∂conj(U) = ∂L/∂I · U, pulled back through each gap and layer
    let mut grad: Vec<Complex64> = pass
        .output
        .iter()
        .zip(&dl_di)
        .map(|(u, d)| u * *d)
        .collect();
    let mut phase = vec![Vec::new(); model.num_layers()];
    for l in (0..model.num_layers()).rev() {
        grad = model.propagate(l + 1, grad, true);
        let w = &cache[l];
        phase[l] = w
            .iter()
            .zip(&grad)
            .map(|(w, g)| 2.0 * (w.conj() * g).im)
            .collect();
        let t = model.layers[l].transmission(pass.channel);
        for (g, t) in grad.iter_mut().zip(&t) {
            *g *= t.conj();
        }
    }
    Ok(ChannelGradient {
        channel: pass.channel,
        loss,
        energies,
        phase,
    })
}

/// Forward with cache, then [`backward`].
pub fn loss_and_gradient(
    model: &NetworkModel,
    input: &ComplexGrid,
    channel: Channel,
    layout: &DetectorLayout,
    label: usize,
    gain: f64,
) -> Result<ChannelGradient> {
    let pass = model.forward_channel(input, channel, true)?;
    backward(model, &pass, layout, label, gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::propagate_fft;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_grid(n: usize, rng: &mut ChaCha8Rng) -> ComplexGrid {
        let data = (0..n * n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexGrid::from_data(n, 400e-9, data).unwrap()
    }

    #[test]
    fn zero_layers_is_one_propagation() {
        let cfg = OpticalConfig::visible(12);
        let model = NetworkModel::new(cfg, vec![], vec![50e-6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = random_grid(12, &mut rng);
        let out = model.forward_channel(&input, Channel::X, false).unwrap();
        let spec = PropagationSpec::new(50e-6, cfg).unwrap();
        let direct = propagate_fft(&input, &spec).unwrap();
        assert_eq!(out.output().as_slice(), direct.as_slice());
    }

    #[test]
    fn identity_layer_composes_two_gaps() {
        let cfg = OpticalConfig::visible(12);
        let model = NetworkModel::identity(cfg, 1, vec![30e-6, 40e-6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input = random_grid(12, &mut rng);
        let out = model.forward_channel(&input, Channel::Y, false).unwrap();
        let a = propagate_fft(&input, &PropagationSpec::new(30e-6, cfg).unwrap()).unwrap();
        let b = propagate_fft(&a, &PropagationSpec::new(40e-6, cfg).unwrap()).unwrap();
        assert_eq!(out.output().as_slice(), b.as_slice());
    }

    #[test]
    fn invalid_models() {
        let cfg = OpticalConfig::visible(8);
        assert!(NetworkModel::identity(cfg, 2, vec![0.0, 1e-6]).is_err());
        assert!(NetworkModel::identity(cfg, 1, vec![0.0, 0.0]).is_err());
        assert!(NetworkModel::identity(cfg, 1, vec![-1e-6, 1e-6]).is_err());
        let wrong = MetaLayer::identity(6, 400e-9);
        assert!(NetworkModel::new(cfg, vec![wrong], vec![0.0, 1e-6]).is_err());
        let model = NetworkModel::identity(cfg, 1, default_gaps(1)).unwrap();
        let input = ComplexGrid::zeros(6, 400e-9);
        assert!(matches!(
            model.forward_channel(&input, Channel::X, false),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn backward_without_cache_is_usage_error() {
        let cfg = OpticalConfig::visible(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = NetworkModel::random(cfg, 2, vec![0.0, 20e-6, 20e-6], &mut rng).unwrap();
        let layout = DetectorLayout::standard(16, 10, 0.8).unwrap();
        let input = random_grid(16, &mut rng);
        let pass = model.forward_channel(&input, Channel::X, false).unwrap();
        assert!(matches!(
            backward(&model, &pass, &layout, 0, 10.0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = OpticalConfig::visible(16);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = NetworkModel::random(cfg, 2, vec![10e-6, 20e-6, 20e-6], &mut rng).unwrap();
        let layout = DetectorLayout::standard(16, 10, 0.8).unwrap();
        let input = random_grid(16, &mut rng);
        let grad = loss_and_gradient(&model, &input, Channel::X, &layout, 3, 10.0).unwrap();
        let h = 1e-5;
        for _ in 0..10 {
            let l = rng.gen_range(0..2);
            let i = rng.gen_range(0..256);
            let eval = |delta: f64| {
                let mut m = model.clone();
                m.layer_mut(l).phase_mut(Channel::X)[i] += delta;
                let pass = m.forward_channel(&input, Channel::X, false).unwrap();
                let e = region_energies(&pass.intensity(), &layout).unwrap();
                loss_ce(&e, 3, 10.0).unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let an = grad.phase[l][i];
            let rel = (fd - an).abs() / an.abs().max(1e-8);
            assert!(rel <= 1e-3, "layer {l} pixel {i}: fd {fd} analytic {an}");
        }
    }
}
