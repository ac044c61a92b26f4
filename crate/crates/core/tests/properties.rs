use std::f64::consts::TAU;

use metanet::field::{total_energy, Channel, ComplexGrid, OpticalConfig, PolarizedField};
use metanet::model::{
    loss_and_gradient, predict, region_energies, DetectorLayout, IntensityMap, NetworkModel, Region,
};
use metanet::par;
use metanet::propagation::{propagate_adjoint, propagate_direct, propagate_fft, PropagationSpec};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_grid(n: usize, pitch: f64, rng: &mut ChaCha8Rng) -> ComplexGrid {
    let data = (0..n * n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ComplexGrid::from_data(n, pitch, data).unwrap()
}

fn random_model(n: usize, layers: usize, rng: &mut ChaCha8Rng) -> NetworkModel {
    let gaps = (0..=layers)
        .map(|i| if i == 0 { 0.0 } else { rng.gen_range(5e-6..120e-6) })
        .collect();
    NetworkModel::random(OpticalConfig::visible(n), layers, gaps, rng).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fft_matches_direct(n in 2usize..=32, dz in 1e-6f64..200e-6, seed: u64) {
        let config = OpticalConfig::visible(n);
        let spec = PropagationSpec::new(dz, config).unwrap();
        let f = random_grid(n, config.pitch, &mut ChaCha8Rng::seed_from_u64(seed));
        let a = propagate_fft(&f, &spec).unwrap();
        let b = propagate_direct(&f, &spec).unwrap();
        let scale = b.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn adjoint_is_conjugate_transpose(n in 2usize..=24, dz in 1e-6f64..200e-6, seed: u64) {
        let config = OpticalConfig::visible(n);
        let spec = PropagationSpec::new(dz, config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_grid(n, config.pitch, &mut rng);
        let y = random_grid(n, config.pitch, &mut rng);
        let lhs = y.inner(&propagate_fft(&x, &spec).unwrap());
        let rhs = propagate_adjoint(&y, &spec).unwrap().inner(&x);
        prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1e-300));
    }

    #[test]
    fn x_channel_ignores_y_parameters(n in 4usize..=16, layers in 0usize..=3, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(n, layers, &mut rng);
        let mut other = model.clone();
        for l in 0..layers {
            let layer = other.layer_mut(l);
            let phase = (0..n * n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let amp = (0..n * n).map(|_| rng.gen_range(0.0..=1.0)).collect();
            layer.set_phase(Channel::Y, phase).unwrap();
            layer.set_amplitude(Channel::Y, amp).unwrap();
        }
        let pitch = model.config().pitch;
        let input = PolarizedField::new(random_grid(n, pitch, &mut rng), random_grid(n, pitch, &mut rng)).unwrap();
        let a = model.forward(&input, false).unwrap();
        let b = other.forward(&input, false).unwrap();
        prop_assert_eq!(a.channel(Channel::X).output(), b.channel(Channel::X).output());
    }

    #[test]
    fn prediction_ignores_positive_scale(
        values in prop::collection::vec(0.0f64..10.0, 256),
        scale in 1e-6f64..1e6,
    ) {
        let layout = DetectorLayout::standard(16, 10, 0.8).unwrap();
        let map = IntensityMap { n: 16, pitch: 4e-7, values };
        if let Ok(e) = region_energies(&map, &layout) {
            let scaled = IntensityMap { values: map.values.iter().map(|v| v * scale).collect(), ..map.clone() };
            let s = region_energies(&scaled, &layout).unwrap();
            prop_assert_eq!(predict(&e.energies), predict(&s.energies));
        }
    }

    #[test]
    fn partition_energies_add_up(n in 2usize..=20, cut_r in 1usize..20, cut_c in 1usize..20, seed: u64) {
        let (cut_r, cut_c) = (cut_r.min(n - 1), cut_c.min(n - 1));
        let grid = random_grid(n, 4e-7, &mut ChaCha8Rng::seed_from_u64(seed));
        let quadrants = [
            (0, 0, cut_r, cut_c),
            (0, cut_c, cut_r, n - cut_c),
            (cut_r, 0, n - cut_r, cut_c),
            (cut_r, cut_c, n - cut_r, n - cut_c),
        ];
        let regions = quadrants
            .iter()
            .enumerate()
            .map(|(k, &(row, col, height, width))| Region { class_id: k, row, col, height, width })
            .collect();
        let layout = DetectorLayout::new(n, 1.0, regions).unwrap();
        let map = IntensityMap { n, pitch: 4e-7, values: grid.intensity() };
        let e = region_energies(&map, &layout).unwrap();
        let total = total_energy(&grid);
        let sum: f64 = e.energies.iter().sum();
        prop_assert!((sum - total).abs() <= 1e-12 * total);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn gradients_match_finite_differences(seed: u64, label in 0usize..10) {
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(n, 2, &mut rng);
        let layout = DetectorLayout::standard(n, 10, 0.8).unwrap();
        let input = random_grid(n, model.config().pitch, &mut rng);
        let ch = if rng.gen_bool(0.5) { Channel::X } else { Channel::Y };
        let g = loss_and_gradient(&model, &input, ch, &layout, label, 10.0).unwrap();
        let h = 1e-5;
        for _ in 0..8 {
            let l = rng.gen_range(0..2);
            let i = rng.gen_range(0..n * n);
            let loss = |d: f64| {
                let mut m = model.clone();
                m.layer_mut(l).phase_mut(ch)[i] += d;
                loss_and_gradient(&m, &input, ch, &layout, label, 10.0).unwrap().loss
            };
            let fd = (loss(h) - loss(-h)) / (2.0 * h);
            let an = g.phase[l][i];
            prop_assert!((fd - an).abs() <= 1e-3 * fd.abs().max(an.abs()), "fd {} analytic {}", fd, an);
        }
    }

    #[test]
    fn forward_is_identical_for_any_worker_count(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(12, 2, &mut rng);
        let inputs: Vec<_> = (0..8).map(|_| random_grid(12, model.config().pitch, &mut rng)).collect();
        let run = |threads| par::with_threads(threads, || {
            par::map(&inputs, |f| model.forward_channel(f, Channel::X, false).unwrap().output())
        });
        let one = run(1);
        prop_assert_eq!(&one, &run(3));
        prop_assert_eq!(&one, &run(1));
    }
}

#[test]
fn phase_is_applied_modulo_two_pi() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = random_model(8, 1, &mut rng);
    let mut shifted = model.clone();
    for p in shifted.layer_mut(0).phase_mut(Channel::X) {
        *p += 3.0 * TAU;
    }
    let input = random_grid(8, model.config().pitch, &mut rng);
    let a = model.forward_channel(&input, Channel::X, false).unwrap().output();
    let b = shifted.forward_channel(&input, Channel::X, false).unwrap().output();
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        assert!((x - y).norm() <= 1e-9 * (1.0 + x.norm()));
    }
}
