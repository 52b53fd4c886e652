mod common;

use goosc::estimator::{self, WindowEstimate};
use goosc::gauge::{self, RawParams};
use goosc::model::{self, CanonicalParams};
use goosc::probes::{self, Baseline, ProbeConfig};

fn estimate_of(params: CanonicalParams, window: &model::Window) -> WindowEstimate {
    let loss = estimator::geometric_loss(&params, window, 0.1, None).unwrap();
    WindowEstimate {
        params,
        loss,
        loglik: 0.0,
        objective: 0.0,
        converged: true,
        grad_norm: 0.0,
        iterations: 0,
        restarts_used: 1,
        best_restart: 0,
    }
}

#[test]
fn canonicalization_is_constant_on_similarity_orbits() {
    let mut rng = common::rng(31);
    for case in 0..200 {
        let k = 1 + case % 3;
        let p = 1 + (case / 3) % (2 * k).min(3);
        let theta = common::random_canonical(&mut rng, k, p);
        let raw = RawParams::from_canonical(&theta);
        let t = gauge::random_transform(2 * k, 10.0, &mut rng);
        let moved = raw.conjugate(&t).unwrap();
        let back = gauge::canonicalize(&moved, 0.05).unwrap();
        let diff = gauge::max_entry_diff(&back, &theta);
        assert!(diff < 1e-6, "case {case} (K={k}, p={p}): {diff:e}");
        assert!(gauge::spectral_gap(&raw, &moved, 16).unwrap() < 1e-8);
    }
}

#[test]
fn canonicalization_is_idempotent() {
    let mut rng = common::rng(32);
    for _ in 0..100 {
        let theta = common::random_canonical(&mut rng, 2, 2);
        let once = gauge::canonicalize(&RawParams::from_canonical(&theta), 0.05).unwrap();
        let twice = gauge::canonicalize(&RawParams::from_canonical(&once), 0.05).unwrap();
        assert!(gauge::max_entry_diff(&once, &twice) < 1e-12);
        once.check_gauge_convention(1e-12).unwrap();
    }
}

#[test]
fn indicators_are_bitwise_invariant_under_sign_flips() {
    let mut rng = common::rng(33);
    let baseline = Baseline {
        mu0: 0.5,
        sigma0: 0.1,
        d0: 0.9,
        n_windows: 10,
    };
    for k in 1..=3 {
        let theta = common::random_canonical(&mut rng, k, 2);
        let traj = model::simulate(&theta, 256, k as u64).unwrap();
        let window = model::Window::new(traj.observations.transpose(), 0, 0);
        let reference = estimate_of(theta.clone(), &window);
        let want = probes::window_indicators(&reference, &window, &baseline, &ProbeConfig::default()).unwrap();
        for mask in 0..(1u32 << k) {
            let flips: Vec<bool> = (0..k).map(|i| mask >> i & 1 == 1).collect();
            let flipped = gauge::apply_sign_flip(&theta, &flips).unwrap();
            let est = estimate_of(flipped, &window);
            assert_eq!(est.loss.to_bits(), reference.loss.to_bits());
            let got = probes::window_indicators(&est, &window, &baseline, &ProbeConfig::default()).unwrap();
            let bits = |v: &probes::IndicatorVector| v.as_array().map(f64::to_bits);
            assert_eq!(bits(&got), bits(&want), "K={k} mask={mask:b}");
            assert_eq!(got.pcc_reliable, want.pcc_reliable);
        }
    }
}
