#![allow(dead_code)]

use goosc::model::{CanonicalParams, ModeParams};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha12Rng {
    goosc::rng::stream(seed, goosc::rng::streams::TEST_FIXTURE)
}

pub fn gaussian(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_spd(rng: &mut ChaCha12Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let b = gaussian(rng, n, n);
    &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * floor
}

/// Dense matrix rescaled to spectral radius `radius`.
pub fn random_stable(rng: &mut ChaCha12Rng, n: usize, radius: f64) -> DMatrix<f64> {
    let a = gaussian(rng, n, n);
    let r = goosc::linalg::spectral_radius(&a);
    a * (radius / r)
}

pub fn random_canonical(rng: &mut ChaCha12Rng, k: usize, p: usize) -> CanonicalParams {
    let mut omegas: Vec<f64> = Vec::new();
    while omegas.len() < k {
        let w = rng.random_range(0.1..3.0);
        if omegas.iter().all(|o: &f64| (o - w).abs() > 0.15) {
            omegas.push(w);
        }
    }
    omegas.sort_by(f64::total_cmp);
    let modes = omegas
        .iter()
        .map(|&w| ModeParams::new(w, rng.random_range(0.5..0.97)).unwrap())
        .collect();
    let c = gaussian(rng, p, 2 * k);
    let q = random_spd(rng, 2 * k, 0.2);
    let r = random_spd(rng, p, 0.2);
    CanonicalParams::new(modes, c, q, r).unwrap().normalize_gauge().unwrap()
}

/// `Σ` solving `Σ = AΣAᵀ + Q` through `(I − A⊗A) vec Σ = vec Q`.
pub fn vec_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let kron = a.kronecker(a);
    let lhs = DMatrix::identity(n * n, n * n) - kron;
    let rhs = DVector::from_column_slice(q.as_slice());
    let x = lhs.lu().solve(&rhs).expect("I − A⊗A is singular");
    DMatrix::from_column_slice(n, n, x.as_slice())
}

/// Exact Gaussian conditioning over the whole window. Returns the
/// log-likelihood of `y` (N × p) and the posterior means (N × n) of the
/// latent states under `z_0 ~ N(0, Σ₀)`.
pub fn dense_oracle(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    sigma0: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> (f64, DMatrix<f64>) {
    let (n, p, len) = (a.nrows(), c.nrows(), y.nrows());
    let mut marg = vec![sigma0.clone()];
    for s in 1..len {
        let prev = &marg[s - 1];
        marg.push(a * prev * a.transpose() + q);
    }
    // Cov(z_s, z_t) = A^{s−t} Σ_t for s ≥ t
    let mut czz = DMatrix::zeros(n * len, n * len);
    for t in 0..len {
        let mut block = marg[t].clone();
        for s in t..len {
            czz.view_mut((s * n, t * n), (n, n)).copy_from(&block);
            czz.view_mut((t * n, s * n), (n, n)).copy_from(&block.transpose());
            block = a * block;
        }
    }
    let mut big_c = DMatrix::zeros(p * len, n * len);
    let mut big_r = DMatrix::zeros(p * len, p * len);
    for s in 0..len {
        big_c.view_mut((s * p, s * n), (p, n)).copy_from(c);
        big_r.view_mut((s * p, s * p), (p, p)).copy_from(r);
    }
    let cxx = &big_c * &czz * big_c.transpose() + big_r;
    let czx = &czz * big_c.transpose();
    let yv = DVector::from_iterator(p * len, (0..len).flat_map(|s| (0..p).map(move |i| y[(s, i)])));
    let chol = cxx.cholesky().expect("joint covariance is not SPD");
    let alpha = chol.solve(&yv);
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let ll = -0.5 * (yv.dot(&alpha) + logdet + (p * len) as f64 * (2.0 * std::f64::consts::PI).ln());
    let zm = czx * alpha;
    let means = DMatrix::from_fn(len, n, |s, i| zm[s * n + i]);
    (ll, means)
}
