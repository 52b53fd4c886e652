mod common;

use goosc::kalman;
use goosc::model::{LinearSystem, Window};

#[test]
fn filter_and_smoother_match_dense_gaussian_conditioning() {
    let mut rng = common::rng(11);
    for case in 0..50 {
        let n = 1 + case % 8;
        let p = 1 + case % 3;
        let len = 6 + case % 7;
        let a = common::random_stable(&mut rng, n, 0.3 + 0.65 * (case as f64 / 50.0));
        let c = common::gaussian(&mut rng, p, n);
        let q = common::random_spd(&mut rng, n, 0.05);
        let r = common::random_spd(&mut rng, p, 0.05);
        let sigma0 = common::random_spd(&mut rng, n, 0.1);
        let y = common::gaussian(&mut rng, len, p);
        let sys = LinearSystem::new(&a, &c, &q, &r);
        let window = Window::new(y.clone(), 0, 0);

        let (ll, means) = common::dense_oracle(&a, &c, &q, &r, &sigma0, &y);
        let filt = kalman::filter_system(&sys, &sigma0, &window).unwrap();
        let smooth = kalman::smooth_system(&sys, &sigma0, &window).unwrap();
        assert!((filt.loglik - ll).abs() < 1e-8, "case {case}: {} vs {ll}", filt.loglik);
        assert!((smooth.loglik - ll).abs() < 1e-8);
        let diff = (&smooth.means - &means).amax();
        assert!(diff < 1e-8, "case {case}: smoothed means differ by {diff:e}");
        let fitted = (&smooth.fitted_obs - &smooth.means * c.transpose()).amax();
        assert!(fitted < 1e-12);
    }
}

#[test]
fn canonical_filter_uses_the_stationary_prior() {
    let mut rng = common::rng(12);
    for _ in 0..10 {
        let params = common::random_canonical(&mut rng, 2, 2);
        let y = common::gaussian(&mut rng, 9, 2);
        let sigma = common::vec_lyapunov(&params.transition(), &params.state_noise);
        let (ll, means) = common::dense_oracle(
            &params.transition(),
            &params.obs_matrix,
            &params.state_noise,
            &params.obs_noise,
            &sigma,
            &y,
        );
        let sm = kalman::smooth(&params, &Window::new(y, 0, 0)).unwrap();
        assert!((sm.loglik - ll).abs() < 1e-8);
        assert!((&sm.means - &means).amax() < 1e-8);
    }
}

#[test]
fn noise_free_orbit_has_constant_phase_increments() {
    let mut rng = common::rng(13);
    let params = common::random_canonical(&mut rng, 2, 1);
    let a = params.transition();
    let mut z = nalgebra::DVector::from_element(params.state_dim(), 1.0);
    let mut means = nalgebra::DMatrix::zeros(24, params.state_dim());
    for s in 0..24 {
        means.set_row(s, &z.transpose());
        z = &a * z;
    }
    let sm = kalman::SmoothedTrajectory {
        means,
        covariances: Vec::new(),
        loglik: 0.0,
        fitted_obs: nalgebra::DMatrix::zeros(0, 0),
    };
    let inc = kalman::phase_increments(&sm);
    for (k, mode) in params.modes.iter().enumerate() {
        for d in &inc[k] {
            assert!((d.unwrap() - mode.omega).abs() < 1e-12);
        }
    }
}
