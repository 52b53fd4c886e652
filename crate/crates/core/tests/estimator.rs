mod common;

use goosc::estimator::{self, Criterion, EstimatorConfig, QStructure, Reparameterization};
use goosc::gauge;
use goosc::model::{self, CanonicalParams, ModeParams, Window};
use goosc::optim;
use nalgebra::DMatrix;
use rand::Rng;

fn one_mode() -> CanonicalParams {
    // unit stationary variance against R = 0.01: 20 dB
    CanonicalParams::new(
        vec![ModeParams::new(0.7, 0.98).unwrap()],
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::identity(2, 2) * (1.0 - 0.98f64.powi(2)),
        DMatrix::identity(1, 1) * 0.01,
    )
    .unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

fn two_mode(rho: f64) -> CanonicalParams {
    let q = 1.0 - rho * rho;
    CanonicalParams::new(
        vec![ModeParams::new(0.4, rho).unwrap(), ModeParams::new(1.3, rho).unwrap()],
        DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 1.0, 0.0]),
        DMatrix::identity(4, 4) * q,
        DMatrix::identity(1, 1) * 0.05,
    )
    .unwrap()
}

fn window(params: &CanonicalParams, n: usize, seed: u64) -> Window {
    let t = model::simulate(params, n, seed).unwrap();
    Window::new(t.observations.transpose(), 0, 0)
}

#[test]
fn exact_gradients_match_central_differences() {
    let mut rng = common::rng(41);
    let truth = two_mode(0.95);
    let w = window(&truth, 200, 1);
    for qs in [QStructure::Isotropic, QStructure::BlockCholesky] {
        let rp = Reparameterization::new(2, 1, qs, 0.05);
        let u0 = rp.encode(&truth).unwrap();
        for trial in 0..4 {
            let u: Vec<f64> = u0.iter().map(|v| v + 0.2 * rng.random_range(-1.0..1.0)).collect();
            for crit in [Criterion::Likelihood, Criterion::GeometricLoss] {
                let prev = (trial % 2 == 1).then_some([0.45, 1.25]);
                let (f, g) = estimator::criterion_gradient(crit, &rp, &u, &w, 0.1, prev.as_ref().map(|p| &p[..])).unwrap();
                let fd = optim::central_gradient(
                    |x| estimator::criterion_value(crit, &rp, x, &w, 0.1, prev.as_ref().map(|p| &p[..])).ok(),
                    &u,
                    1e-6,
                )
                .unwrap();
                assert!(f.is_finite());
                let scale = g.iter().map(|v| v.abs()).fold(1.0, f64::max);
                for (i, (a, b)) in g.iter().zip(&fd).enumerate() {
                    assert!((a - b).abs() < 1e-4 * scale, "{qs:?} {crit:?} coord {i}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn estimate_recovers_frequencies_and_damping() {
    let truth = two_mode(0.97);
    let w = window(&truth, 2048, 7);
    let est = estimator::estimate_window(&w, &EstimatorConfig::default(), None).unwrap();
    for (m, t) in est.params.modes.iter().zip(&truth.modes) {
        assert!((m.omega - t.omega).abs() < 0.02, "{m:?} vs {t:?}");
        assert!((m.rho - t.rho).abs() < 0.02, "{m:?} vs {t:?}");
    }
    est.params.check_gauge_convention(1e-9).unwrap();
    assert!(est.restarts_used == 3 && est.best_restart < 3);
    assert!(est.loss.is_finite() && est.loglik.is_finite());
}

#[test]
fn estimates_are_deterministic() {
    let truth = two_mode(0.95);
    let w = window(&truth, 512, 3);
    let cfg = EstimatorConfig::default();
    let a = estimator::estimate_window(&w, &cfg, None).unwrap();
    let b = estimator::estimate_window(&w, &cfg, None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stream_threads_previous_frequencies_into_the_penalty() {
    let truth = two_mode(0.95);
    let t = model::simulate(&truth, 1024, 5).unwrap();
    let windows = model::split_windows(&t.observations, 512);
    let cfg = EstimatorConfig::default();
    let stream = estimator::estimate_stream(&windows, &cfg).unwrap();
    let second = estimator::estimate_window(&windows[1], &cfg, Some(&stream[0])).unwrap();
    assert_eq!(stream[1], second);
    let prev = stream[0].params.omegas();
    let loss = estimator::geometric_loss(&second.params, &windows[1], cfg.lambda, Some(&prev)).unwrap();
    assert_eq!(loss.to_bits(), second.loss.to_bits());
}

#[test]
fn too_short_window_is_rejected() {
    let truth = two_mode(0.9);
    let w = window(&truth, 10, 1);
    assert!(estimator::estimate_window(&w, &EstimatorConfig::default(), None).is_err());
}

#[test]
fn single_mode_recovery_over_seeds() {
    let truth = one_mode();
    let cfg = EstimatorConfig { k: 1, ..EstimatorConfig::default() };
    let (mut dw, mut dr) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let est = estimator::estimate_window(&window(&truth, 2048, 100 + seed), &cfg, None).unwrap();
        dw.push((est.params.modes[0].omega - 0.7).abs());
        dr.push((est.params.modes[0].rho - 0.98).abs());
    }
    assert!(median(dw.clone()) < 0.01, "{dw:?}");
    assert!(median(dr.clone()) < 0.02, "{dr:?}");
}

#[test]
fn free_estimate_describes_the_same_law() {
    let w = window(&one_mode(), 2048, 3);
    let cfg = EstimatorConfig { k: 1, ..EstimatorConfig::default() };
    let can = estimator::estimate_window(&w, &cfg, None).unwrap();
    let free = estimator::estimate_window_free(&w, &cfg).unwrap();
    assert_eq!(free, estimator::estimate_window_free(&w, &cfg).unwrap());
    for i in 0..64 {
        let lambda = 0.02 + (std::f64::consts::PI - 0.04) * i as f64 / 63.0;
        let a = model::spectral_density(&can.params, lambda).unwrap()[(0, 0)].re;
        let b = free.spectral_density(lambda).unwrap()[(0, 0)].re;
        assert!((a - b).abs() < 0.1 * a, "λ = {lambda}: {a} vs {b}");
    }
    let projected = gauge::canonicalize(&free, cfg.delta_min).unwrap();
    assert!(gauge::gauge_distance(&projected, &can.params).unwrap() <= 0.1);
}
