//! Oscillatory state-space model: parameter records, transition matrices,
//! stationary covariance, simulation and spectral density.
//!
//! The latent state stacks K two-dimensional blocks, one per mode. Mode k
//! evolves by the scaled rotation `ρ_k [[cos ω_k, sin ω_k], [−sin ω_k, cos ω_k]]`
//! and the observation is `x_t = C z_t + v_t`.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Real};
use crate::rng;

/// Minimum frequency separation between adjacent modes (rad/sample).
pub const DEFAULT_DELTA_MIN: f64 = 0.05;

/// Smallest admissible eigenvalue ratio `λ_min / λ_max` of a covariance.
pub const SPD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    /// Angular frequency in radians per sample, in (0, π).
    pub omega: f64,
    /// Per-step damping factor, in (0, 1).
    pub rho: f64,
}

impl ModeParams {
    pub fn new(omega: f64, rho: f64) -> Result<Self> {
        let m = Self { omega, rho };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < std::f64::consts::PI) {
            return Err(Error::InvalidParameter(format!(
                "omega {} outside (0, π)",
                self.omega
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rho {} outside (0, 1)",
                self.rho
            )));
        }
        Ok(())
    }

    /// The 2×2 scaled-rotation block, row-major.
    pub fn block(&self) -> [f64; 4] {
        let (s, c) = self.omega.sin_cos();
        [self.rho * c, self.rho * s, -self.rho * s, self.rho * c]
    }
}

/// Gauge-fixed model parameters `(ω, ρ, C, Q, R)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalParams {
    pub modes: Vec<ModeParams>,
    #[serde(with = "crate::io::matrix_rows")]
    pub obs_matrix: DMatrix<f64>,
    #[serde(with = "crate::io::matrix_rows")]
    pub state_noise: DMatrix<f64>,
    #[serde(with = "crate::io::matrix_rows")]
    pub obs_noise: DMatrix<f64>,
}

impl CanonicalParams {
    /// Build and validate with the default frequency separation.
    ///
    /// Validation covers mode ranges and ordering, dimensions, positive
    /// definiteness of both noise covariances and the rank of `C`. The
    /// intra-block loading convention is checked separately by
    /// [`CanonicalParams::check_gauge_convention`].
    pub fn new(
        modes: Vec<ModeParams>,
        obs_matrix: DMatrix<f64>,
        state_noise: DMatrix<f64>,
        obs_noise: DMatrix<f64>,
    ) -> Result<Self> {
        Self::with_delta(modes, obs_matrix, state_noise, obs_noise, DEFAULT_DELTA_MIN)
    }

    pub fn with_delta(
        modes: Vec<ModeParams>,
        obs_matrix: DMatrix<f64>,
        state_noise: DMatrix<f64>,
        obs_noise: DMatrix<f64>,
        delta_min: f64,
    ) -> Result<Self> {
        let p = Self {
            modes,
            obs_matrix,
            state_noise,
            obs_noise,
        };
        p.validate(delta_min)?;
        Ok(p)
    }

    pub fn k(&self) -> usize {
        self.modes.len()
    }

    pub fn state_dim(&self) -> usize {
        2 * self.modes.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_matrix.nrows()
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.omega).collect()
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.rho).collect()
    }

    pub fn validate(&self, delta_min: f64) -> Result<()> {
        validate_modes(&self.modes, delta_min)?;
        let n = self.state_dim();
        let p = self.obs_dim();
        if p == 0 {
            return Err(Error::DimensionMismatch("observation dimension is zero".into()));
        }
        if self.obs_matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "obs_matrix has {} columns, expected {n}",
                self.obs_matrix.ncols()
            )));
        }
        if self.state_noise.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "state_noise is {:?}, expected ({n}, {n})",
                self.state_noise.shape()
            )));
        }
        if self.obs_noise.shape() != (p, p) {
            return Err(Error::DimensionMismatch(format!(
                "obs_noise is {:?}, expected ({p}, {p})",
                self.obs_noise.shape()
            )));
        }
        check_spd(&self.state_noise, "state_noise")?;
        check_spd(&self.obs_noise, "obs_noise")?;
        if p > n || self.obs_matrix.rank(1e-10) < p {
            return Err(Error::InvalidParameter(
                "obs_matrix does not have full row rank".into(),
            ));
        }
        Ok(())
    }

    /// Check that for every mode the first-row loading is `(c, 0)` with
    /// `c > 0` and the column pair has unit Frobenius norm.
    pub fn check_gauge_convention(&self, tol: f64) -> Result<()> {
        for k in 0..self.k() {
            let c0 = self.obs_matrix[(0, 2 * k)];
            let c1 = self.obs_matrix[(0, 2 * k + 1)];
            let norm = self.obs_matrix.columns(2 * k, 2).norm();
            if c0 <= 0.0 || c1.abs() > tol || (norm - 1.0).abs() > tol {
                return Err(Error::InvalidParameter(format!(
                    "mode {k} violates the loading convention: row0 = ({c0}, {c1}), norm = {norm}"
                )));
            }
        }
        Ok(())
    }

    /// Re-express the model in the intra-block gauge: for each mode, conjugate
    /// the latent block by the scaled rotation that maps the first-row loading
    /// onto `(c, 0)`, `c > 0`, and gives the column pair unit norm. The law of
    /// the observations is unchanged.
    pub fn normalize_gauge(&self) -> Result<Self> {
        let n = self.state_dim();
        let mut t = DMatrix::<f64>::zeros(n, n);
        for k in 0..self.k() {
            let g = block_gauge(&self.obs_matrix.columns(2 * k, 2).into_owned())?;
            t.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&g);
        }
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("singular gauge transform".into()))?;
        let mut q = &t_inv * &self.state_noise * t_inv.transpose();
        symmetrize(&mut q);
        Ok(Self {
            modes: self.modes.clone(),
            obs_matrix: &self.obs_matrix * &t,
            state_noise: q,
            obs_noise: self.obs_noise.clone(),
        })
    }

    pub fn transition(&self) -> DMatrix<f64> {
        transition_unchecked(&self.modes)
    }

    pub fn system(&self) -> LinearSystem {
        LinearSystem::new(
            &self.transition(),
            &self.obs_matrix,
            &self.state_noise,
            &self.obs_noise,
        )
    }
}

/// The scaled rotation `G` commuting with every scaled-rotation block such
/// that `C_k G` has first row `(c, 0)`, `c > 0`, and unit Frobenius norm.
pub(crate) fn block_gauge(c_block: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let a = c_block[(0, 0)];
    let b = c_block[(0, 1)];
    let r2 = a * a + b * b;
    if r2 < 1e-24 {
        return Err(Error::ModalDegeneracy(
            "mode is not loaded on the first observation channel".into(),
        ));
    }
    let g = DMatrix::from_row_slice(2, 2, &[a, -b, b, a]);
    let scaled = c_block * &g;
    let norm = scaled.norm();
    Ok(g / norm)
}

fn validate_modes(modes: &[ModeParams], delta_min: f64) -> Result<()> {
    if modes.is_empty() {
        return Err(Error::InvalidParameter("at least one mode is required".into()));
    }
    for m in modes {
        m.validate()?;
    }
    for w in modes.windows(2) {
        if w[1].omega <= w[0].omega {
            return Err(Error::InvalidParameter(format!(
                "modes must be strictly ascending in omega ({} then {})",
                w[0].omega, w[1].omega
            )));
        }
        if w[1].omega - w[0].omega <= delta_min {
            return Err(Error::NearCollision {
                lower: w[0].omega,
                upper: w[1].omega,
                delta_min,
            });
        }
    }
    Ok(())
}

pub(crate) fn check_spd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    let asym = (m - m.transpose()).amax();
    if asym > SPD_TOL * (1.0 + m.amax()) {
        return Err(Error::NotPositiveDefinite(format!("{name} is not symmetric")));
    }
    let eigs = ((m + m.transpose()) * 0.5).symmetric_eigenvalues();
    let min_eig = eigs.min();
    if !(min_eig > 0.0 && min_eig > SPD_TOL * eigs.max()) {
        return Err(Error::NotPositiveDefinite(format!(
            "{name} has smallest eigenvalue {min_eig:e}"
        )));
    }
    Ok(())
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let s = (&*m + m.transpose()) * 0.5;
    *m = s;
}

/// Block-diagonal transition matrix of K scaled rotations.
pub fn build_transition(modes: &[ModeParams]) -> Result<DMatrix<f64>> {
    validate_modes(modes, 0.0)?;
    Ok(transition_unchecked(modes))
}

pub(crate) fn transition_unchecked(modes: &[ModeParams]) -> DMatrix<f64> {
    let n = 2 * modes.len();
    let mut a = DMatrix::zeros(n, n);
    for (k, m) in modes.iter().enumerate() {
        let b = m.block();
        a[(2 * k, 2 * k)] = b[0];
        a[(2 * k, 2 * k + 1)] = b[1];
        a[(2 * k + 1, 2 * k)] = b[2];
        a[(2 * k + 1, 2 * k + 1)] = b[3];
    }
    a
}

/// Dense flat form of `(A, C, Q, R)` consumed by the Kalman kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub n: usize,
    pub p: usize,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
}

impl LinearSystem {
    pub fn new(a: &DMatrix<f64>, c: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Self {
        Self {
            n: a.nrows(),
            p: c.nrows(),
            a: linalg::to_flat(a),
            c: linalg::to_flat(c),
            q: linalg::to_flat(q),
            r: linalg::to_flat(r),
        }
    }

    pub fn lift<T: Real>(&self) -> SystemT<T> {
        SystemT {
            n: self.n,
            p: self.p,
            a: linalg::lift(&self.a),
            c: linalg::lift(&self.c),
            q: linalg::lift(&self.q),
            r: linalg::lift(&self.r),
        }
    }
}

/// [`LinearSystem`] over a generic scalar.
#[derive(Clone, Debug)]
pub struct SystemT<T> {
    pub n: usize,
    pub p: usize,
    pub a: Vec<T>,
    pub c: Vec<T>,
    pub q: Vec<T>,
    pub r: Vec<T>,
}

/// Solve `Σ = A Σ Aᵀ + Q` by squared-Smith doubling. Returns `None` when the
/// iteration does not contract (A not stable) or produces non-finite values.
pub fn lyapunov_doubling<T: Real>(a: &[T], q: &[T], n: usize) -> Option<Vec<T>> {
    let mut x = q.to_vec();
    let mut ak = a.to_vec();
    let mut tmp = vec![T::zero(); n * n];
    let mut term = vec![T::zero(); n * n];
    let mut sq = vec![T::zero(); n * n];
    for _ in 0..80 {
        // x += ak x akᵀ
        linalg::matmul(&ak, &x, &mut tmp, n, n, n);
        linalg::matmul_bt(&tmp, &ak, &mut term, n, n, n);
        for (xi, ti) in x.iter_mut().zip(term.iter()) {
            *xi += *ti;
        }
        let scale = ak.iter().fold(0.0f64, |m, v| m.max(v.max_lane_abs()));
        if !scale.is_finite() {
            return None;
        }
        if scale < 1e-10 {
            linalg::symmetrize(&mut x, n);
            return x.iter().all(|v| v.value().is_finite()).then_some(x);
        }
        linalg::matmul(&ak, &ak, &mut sq, n, n, n);
        std::mem::swap(&mut ak, &mut sq);
    }
    None
}

/// Stationary covariance of the latent state, `Σ = AΣAᵀ + Q`.
pub fn stationary_covariance(params: &CanonicalParams) -> Result<DMatrix<f64>> {
    let radius = params.rhos().into_iter().fold(0.0, f64::max);
    stationary_covariance_of(&params.transition(), &params.state_noise, Some(radius))
}

/// Stationary covariance for an arbitrary transition matrix.
pub fn stationary_covariance_of(
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    known_radius: Option<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let radius = known_radius.unwrap_or_else(|| linalg::spectral_radius(a));
    if !(radius < 1.0) {
        return Err(Error::Unstable {
            spectral_radius: radius,
        });
    }
    let sigma = lyapunov_doubling(&linalg::to_flat(a), &linalg::to_flat(q), n).ok_or(
        Error::Unstable {
            spectral_radius: radius,
        },
    )?;
    Ok(linalg::from_flat(&sigma, n, n))
}

/// Latent and observed paths, one column per time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// 2K × n latent states.
    pub latent: DMatrix<f64>,
    /// p × n observations.
    pub observations: DMatrix<f64>,
}

/// Simulate `n_samples` steps from the stationary law.
pub fn simulate(params: &CanonicalParams, n_samples: usize, seed: u64) -> Result<Trajectory> {
    simulate_driven(params, n_samples, seed, None, |_| None, |_, _| {})
}

/// Simulate from a fixed initial state instead of a stationary draw.
pub fn simulate_from(
    params: &CanonicalParams,
    z0: &DVector<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<Trajectory> {
    if z0.len() != params.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, expected {}",
            z0.len(),
            params.state_dim()
        )));
    }
    simulate_driven(params, n_samples, seed, Some(z0), |_| None, |_, _| {})
}

/// Shared simulation loop. `transition_at(t)` may override the transition
/// used for the step `t → t+1`; `after_step(t, z)` may modify the state at
/// time `t` (for t ≥ 1) before it is observed. With both hooks inert the
/// output is bit-identical to [`simulate`].
pub(crate) fn simulate_driven<F, G>(
    params: &CanonicalParams,
    n_samples: usize,
    seed: u64,
    z0: Option<&DVector<f64>>,
    mut transition_at: F,
    mut after_step: G,
) -> Result<Trajectory>
where
    F: FnMut(usize) -> Option<DMatrix<f64>>,
    G: FnMut(usize, &mut DVector<f64>),
{
    params.validate(0.0)?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let n = params.state_dim();
    let p = params.obs_dim();
    let a = params.transition();
    let sigma = stationary_covariance(params)?;
    let l_sigma = cholesky_factor(&sigma, "stationary covariance")?;
    let l_q = cholesky_factor(&params.state_noise, "state_noise")?;
    let l_r = cholesky_factor(&params.obs_noise, "obs_noise")?;

    let mut rng = rng::stream(seed, rng::streams::SIMULATION);
    let normals = |len: usize, rng: &mut rng::StreamRng| -> DVector<f64> {
        DVector::from_iterator(len, (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
    };

    let mut latent = DMatrix::zeros(n, n_samples);
    let mut observations = DMatrix::zeros(p, n_samples);
    let mut z = match z0 {
        Some(z0) => z0.clone(),
        None => &l_sigma * normals(n, &mut rng),
    };
    for t in 0..n_samples {
        if t > 0 {
            after_step(t, &mut z);
        }
        let v = &l_r * normals(p, &mut rng);
        let x = &params.obs_matrix * &z + v;
        latent.set_column(t, &z);
        observations.set_column(t, &x);
        let w = &l_q * normals(n, &mut rng);
        z = match transition_at(t) {
            Some(at) => &at * &z + w,
            None => &a * &z + w,
        };
    }
    Ok(Trajectory {
        latent,
        observations,
    })
}

pub(crate) fn cholesky_factor(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite(name.to_string()))
}

/// Observation spectral density `C(e^{iλ}I − A)⁻¹ Q (e^{−iλ}I − Aᵀ)⁻¹ Cᵀ + R`.
pub fn spectral_density(params: &CanonicalParams, lambda: f64) -> Result<DMatrix<Complex<f64>>> {
    spectral_density_of(
        &params.transition(),
        &params.obs_matrix,
        &params.state_noise,
        &params.obs_noise,
        lambda,
    )
}

pub fn spectral_density_of(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<Complex<f64>>> {
    let n = a.nrows();
    let z = Complex::new(lambda.cos(), lambda.sin());
    let resolvent_arg =
        DMatrix::<Complex<f64>>::identity(n, n) * z - a.map(|v| Complex::new(v, 0.0));
    let resolvent = resolvent_arg
        .try_inverse()
        .ok_or(Error::Unstable {
            spectral_radius: 1.0,
        })?;
    let h = c.map(|v| Complex::new(v, 0.0)) * resolvent;
    let qc = q.map(|v| Complex::new(v, 0.0));
    let s = &h * qc * h.adjoint() + r.map(|v| Complex::new(v, 0.0));
    Ok(s)
}

/// A contiguous block of N observation vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    /// N × p samples.
    pub samples: DMatrix<f64>,
    pub start_index: usize,
    pub window_id: usize,
}

impl Window {
    pub fn new(samples: DMatrix<f64>, start_index: usize, window_id: usize) -> Self {
        Self {
            samples,
            start_index,
            window_id,
        }
    }

    /// Single-channel window from a slice.
    pub fn from_slice(data: &[f64], start_index: usize, window_id: usize) -> Self {
        Self::new(DMatrix::from_column_slice(data.len(), 1, data), start_index, window_id)
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn obs_dim(&self) -> usize {
        self.samples.ncols()
    }

    /// Row-major flat copy of the samples.
    pub fn flat(&self) -> Vec<f64> {
        linalg::to_flat(&self.samples)
    }

    pub fn channel(&self, ch: usize) -> Vec<f64> {
        self.samples.column(ch).iter().cloned().collect()
    }

    /// Check the sample-count requirement for a K-mode model.
    pub fn check_length(&self, k: usize) -> Result<()> {
        if self.len() < 4 * k {
            return Err(Error::InvalidParameter(format!(
                "window of {} samples is too short for {k} modes (need ≥ {})",
                self.len(),
                4 * k
            )));
        }
        Ok(())
    }
}

/// Cut a p × T observation matrix into non-overlapping windows of length
/// `window_len`, discarding a trailing remainder.
pub fn split_windows(observations: &DMatrix<f64>, window_len: usize) -> Vec<Window> {
    if window_len == 0 {
        return Vec::new();
    }
    let total = observations.ncols();
    (0..total / window_len)
        .map(|w| {
            let start = w * window_len;
            let block = observations.columns(start, window_len).transpose();
            Window::new(block, start, w)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn one_mode(omega: f64, rho: f64, q: f64, r: f64) -> CanonicalParams {
        CanonicalParams::new(
            vec![ModeParams::new(omega, rho).unwrap()],
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::identity(2, 2) * q,
            DMatrix::identity(1, 1) * r,
        )
        .unwrap()
    }

    #[test]
    fn transition_rejects_bad_modes() {
        assert!(build_transition(&[ModeParams { omega: 0.0, rho: 0.5 }]).is_err());
        assert!(build_transition(&[ModeParams { omega: 0.5, rho: 1.0 }]).is_err());
        let unordered = [
            ModeParams { omega: 1.0, rho: 0.5 },
            ModeParams { omega: 0.5, rho: 0.5 },
        ];
        assert!(build_transition(&unordered).is_err());
    }

    #[test]
    fn quarter_turn_limit_is_a_pure_rotation() {
        let a = build_transition(&[ModeParams::new(PI / 2.0, 1.0 - 1e-9).unwrap()]).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((a - expected).amax() < 1e-8);
    }

    #[test]
    fn two_mode_transition_has_structural_zeros() {
        let modes = vec![ModeParams::new(0.3, 0.95).unwrap(), ModeParams::new(1.1, 0.9).unwrap()];
        let a = build_transition(&modes).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i / 2 != j / 2 {
                    assert_eq!(a[(i, j)], 0.0);
                }
            }
        }
        assert!(a[(0, 1)] > 0.0 && a[(2, 3)] > 0.0);
    }

    #[test]
    fn zero_transition_gives_q() {
        let a = DMatrix::zeros(2, 2);
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let s = stationary_covariance_of(&a, &q, None).unwrap();
        assert!((s - q).amax() < 1e-15);
    }

    #[test]
    fn isotropic_noise_gives_isotropic_covariance() {
        let p = one_mode(0.3, 0.95, 1.0, 1.0);
        let s = stationary_covariance(&p).unwrap();
        let expected = 1.0 / (1.0 - 0.95f64 * 0.95);
        assert!((s[(0, 0)] - expected).abs() < 1e-10);
        assert!((s[(1, 1)] - expected).abs() < 1e-10);
        assert!(s[(0, 1)].abs() < 1e-10);
    }

    #[test]
    fn unstable_transition_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.01, 0.0, 0.0, 0.2]);
        let err = stationary_covariance_of(&a, &DMatrix::identity(2, 2), None).unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
    }

    #[test]
    fn zero_loading_gives_flat_spectrum() {
        let mut p = one_mode(0.3, 0.9, 1.0, 0.7);
        p.obs_matrix = DMatrix::zeros(1, 2);
        for &l in &[0.0, 0.5, 2.0, PI] {
            let s = spectral_density(&p, l).unwrap();
            assert!((s[(0, 0)].re - 0.7).abs() < 1e-15);
            assert!(s[(0, 0)].im.abs() < 1e-15);
        }
    }

    #[test]
    fn simulation_rejects_zero_length() {
        let p = one_mode(0.3, 0.9, 1.0, 0.1);
        assert!(simulate(&p, 0, 1).is_err());
    }

    #[test]
    fn noise_free_orbit_decays_geometrically() {
        let p = one_mode(0.3, 0.97, 1e-12, 1e-12);
        let z0 = DVector::from_vec(vec![1.0, -0.5]);
        let traj = simulate_from(&p, &z0, 51, 3).unwrap();
        let z0 = traj.latent.column(0).norm();
        for t in 1..=50 {
            let expected = z0 * 0.97f64.powi(t as i32);
            let got = traj.latent.column(t).norm();
            assert!((got - expected).abs() / expected < 0.01, "t={t}");
        }
    }

    #[test]
    fn gauge_normalization_preserves_spectrum() {
        let p = CanonicalParams::new(
            vec![ModeParams::new(0.4, 0.9).unwrap(), ModeParams::new(1.3, 0.8).unwrap()],
            DMatrix::from_row_slice(2, 4, &[0.3, -1.2, 2.0, 0.5, 0.7, 0.1, -0.4, 1.0]),
            DMatrix::identity(4, 4) * 0.5,
            DMatrix::identity(2, 2) * 0.1,
        )
        .unwrap();
        let g = p.normalize_gauge().unwrap();
        g.check_gauge_convention(1e-12).unwrap();
        for i in 0..16 {
            let l = PI * i as f64 / 15.0;
            let a = spectral_density(&p, l).unwrap();
            let b = spectral_density(&g, l).unwrap();
            assert!((a - b).map(|z| z.norm()).max() < 1e-10);
        }
    }

    #[test]
    fn windows_are_contiguous_and_disjoint() {
        let obs = DMatrix::from_fn(1, 10, |_, j| j as f64);
        let w = split_windows(&obs, 4);
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].start_index, 0);
        assert_eq!(w[1].start_index, 4);
        assert_eq!(w[1].samples[(0, 0)], 4.0);
        assert_eq!(w[1].window_id, 1);
    }
}
