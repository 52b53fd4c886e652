//! Per-window estimation over the canonical gauge.
//!
//! The search space is an unconstrained reparameterization whose image is
//! exactly the set of canonical parameters: ascending, `δ`-separated
//! frequencies, dampings in (0, 1), unit-norm loading pairs with first-row
//! loading `(c, 0)`, and positive-definite noise covariances. Gradients come
//! from forward-mode dual numbers pushed through the Kalman recursions.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::energy;
use crate::error::{Error, Result};
use crate::gauge::{self, RawParams};
use crate::kalman;
use crate::linalg::{self, Dual, Real};
use crate::model::{self, CanonicalParams, ModeParams, SystemT, Window, DEFAULT_DELTA_MIN};
use crate::optim::{self, LbfgsConfig};
use crate::rng::{self, streams};

/// Parameterization of the per-mode state-noise block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QStructure {
    /// `Q_k = q_k I₂`.
    #[default]
    Isotropic,
    /// `Q_k = L_k L_kᵀ` with a free lower-triangular `L_k`.
    BlockCholesky,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub k: usize,
    pub lambda: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub n_restarts: usize,
    pub seed: u64,
    pub delta_min: f64,
    pub q_structure: QStructure,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            k: 2,
            lambda: 0.1,
            max_iters: 500,
            grad_tol: 1e-6,
            n_restarts: 3,
            seed: 0,
            delta_min: DEFAULT_DELTA_MIN,
            q_structure: QStructure::Isotropic,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be ≥ 0, got {}", self.lambda)));
        }
        if self.max_iters == 0 || self.n_restarts == 0 {
            return Err(Error::Config("max_iters and n_restarts must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) || !(self.delta_min >= 0.0) {
            return Err(Error::Config("grad_tol must be > 0 and delta_min ≥ 0".into()));
        }
        if (self.k as f64 + 1.0) * self.delta_min >= std::f64::consts::PI {
            return Err(Error::Config(format!(
                "{} modes cannot be separated by {} inside (0, π)",
                self.k, self.delta_min
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimate {
    pub params: CanonicalParams,
    /// Mean squared smoothing residual plus `λ R(θ)`.
    pub loss: f64,
    pub loglik: f64,
    /// Value of the optimized criterion `−loglik/N + (λ/N) R(θ)`.
    pub objective: f64,
    pub converged: bool,
    pub grad_norm: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub best_restart: usize,
}

/// The smoothness/stability penalty `‖ω − ω_prev‖² + Σ_k [−ln(1−ρ_k) − ln ρ_k]`.
pub fn penalty(omega: &[f64], rho: &[f64], prev_omega: Option<&[f64]>) -> f64 {
    let o: Vec<f64> = omega.to_vec();
    let r: Vec<f64> = rho.to_vec();
    penalty_t(&o, &r, prev_omega)
}

fn penalty_t<T: Real>(omega: &[T], rho: &[T], prev_omega: Option<&[f64]>) -> T {
    let mut acc = T::zero();
    if let Some(prev) = prev_omega {
        for (w, p) in omega.iter().zip(prev) {
            let d = *w - T::from_f64(*p);
            acc += d * d;
        }
    }
    for r in rho {
        acc -= (T::one() - *r).ln() + r.ln();
    }
    acc
}

/// `(1/N) Σ_s ‖x_s − C ẑ_{s|N}‖² + λ R(θ)`.
pub fn geometric_loss(
    params: &CanonicalParams,
    window: &Window,
    lambda: f64,
    prev_omega: Option<&[f64]>,
) -> Result<f64> {
    if let Some(prev) = prev_omega {
        if prev.len() != params.k() {
            return Err(Error::DimensionMismatch(format!(
                "prev_omega has {} entries for {} modes",
                prev.len(),
                params.k()
            )));
        }
    }
    let sigma = model::stationary_covariance(params)?;
    let sys = params.system();
    if window.obs_dim() != sys.p || window.is_empty() {
        return Err(Error::DimensionMismatch("window does not match the model".into()));
    }
    let resid = kalman::smoothing_residual(
        &sys.lift::<f64>(),
        &linalg::to_flat(&sigma),
        &window.flat(),
        window.len(),
    )?;
    Ok(resid + lambda * penalty(&params.omegas(), &params.rhos(), prev_omega))
}

/// Margin keeping logistic images strictly inside their open intervals.
const SQUEEZE: f64 = 1e-9;

/// Diagonal loading of `Q` and `R`, relative to their traces, so a
/// collapsing direction keeps the noise covariances positive definite.
const NOISE_FLOOR: f64 = 1e-8;

fn load_diagonal<T: Real>(m: &mut [T], n: usize) {
    let floor = (0..n).fold(T::zero(), |acc, i| acc + m[i * n + i]).scale(NOISE_FLOOR);
    for i in 0..n {
        m[i * n + i] += floor;
    }
}

fn unload_diagonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let floor = NOISE_FLOOR * m.trace() / (1.0 + n as f64 * NOISE_FLOOR);
    m - DMatrix::identity(n, n) * floor
}

fn squeeze<T: Real>(u: T) -> T {
    T::from_f64(SQUEEZE) + linalg::logistic(u).scale(1.0 - 2.0 * SQUEEZE)
}

/// Bijection between an unconstrained vector and canonical parameters.
///
/// Layout: K frequency coordinates, K damping logits, the noise-block
/// coordinates, the free loading rows `1..p` of every mode, and the
/// log-diagonal Cholesky factor of `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct Reparameterization {
    pub k: usize,
    pub p: usize,
    pub q_structure: QStructure,
    pub delta_min: f64,
}

struct Built<T> {
    omega: Vec<T>,
    rho: Vec<T>,
    c: Vec<T>,
    q: Vec<T>,
    r: Vec<T>,
    /// Per-mode isotropic variance when available.
    q_iso: Option<Vec<T>>,
}

impl Reparameterization {
    pub fn new(k: usize, p: usize, q_structure: QStructure, delta_min: f64) -> Self {
        Self {
            k,
            p,
            q_structure,
            delta_min,
        }
    }

    fn q_len(&self) -> usize {
        match self.q_structure {
            QStructure::Isotropic => self.k,
            QStructure::BlockCholesky => 3 * self.k,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.k + self.q_len() + 2 * self.k * (self.p - 1) + self.p * (self.p + 1) / 2
    }

    fn bounds(&self, k: usize, prev: f64) -> (f64, f64) {
        let lo = if k == 0 { 0.0 } else { prev + self.delta_min };
        let hi = std::f64::consts::PI - (self.k - 1 - k) as f64 * self.delta_min;
        (lo, hi)
    }

    fn build<T: Real>(&self, u: &[T]) -> Built<T> {
        let (k, p) = (self.k, self.p);
        let n = 2 * k;
        let mut idx = 0;
        let mut omega = Vec::with_capacity(k);
        for m in 0..k {
            let lo = if m == 0 {
                T::zero()
            } else {
                omega[m - 1] + T::from_f64(self.delta_min)
            };
            let hi = T::from_f64(std::f64::consts::PI - (k - 1 - m) as f64 * self.delta_min);
            omega.push(lo + (hi - lo) * squeeze(u[idx]));
            idx += 1;
        }
        let rho: Vec<T> = (0..k).map(|m| squeeze(u[idx + m])).collect();
        idx += k;

        let mut q = vec![T::zero(); n * n];
        let mut q_iso = None;
        match self.q_structure {
            QStructure::Isotropic => {
                let vals: Vec<T> = (0..k).map(|m| (u[idx + m].scale(2.0)).exp()).collect();
                for m in 0..k {
                    q[(2 * m) * n + 2 * m] = vals[m];
                    q[(2 * m + 1) * n + 2 * m + 1] = vals[m];
                }
                q_iso = Some(vals);
                idx += k;
            }
            QStructure::BlockCholesky => {
                for m in 0..k {
                    let l11 = u[idx].exp();
                    let l21 = u[idx + 1];
                    let l22 = u[idx + 2].exp();
                    let (i, j) = (2 * m, 2 * m + 1);
                    q[i * n + i] = l11 * l11;
                    q[i * n + j] = l11 * l21;
                    q[j * n + i] = l11 * l21;
                    q[j * n + j] = l21 * l21 + l22 * l22;
                    idx += 3;
                }
            }
        }
        load_diagonal(&mut q, n);

        let mut c = vec![T::zero(); p * n];
        for m in 0..k {
            let mut norm2 = T::one();
            c[2 * m] = T::one();
            for i in 1..p {
                let (a, b) = (u[idx], u[idx + 1]);
                idx += 2;
                c[i * n + 2 * m] = a;
                c[i * n + 2 * m + 1] = b;
                norm2 += a * a + b * b;
            }
            let inv = T::one() / norm2.sqrt();
            for i in 0..p {
                c[i * n + 2 * m] *= inv;
                c[i * n + 2 * m + 1] *= inv;
            }
        }

        let mut l = vec![T::zero(); p * p];
        for i in 0..p {
            for j in 0..=i {
                l[i * p + j] = if i == j { u[idx].exp() } else { u[idx] };
                idx += 1;
            }
        }
        let mut r = vec![T::zero(); p * p];
        linalg::matmul_bt(&l, &l, &mut r, p, p, p);
        load_diagonal(&mut r, p);
        Built {
            omega,
            rho,
            c,
            q,
            r,
            q_iso,
        }
    }

    /// Unconstrained coordinates of `params`. Frequencies outside the
    /// admissible intervals are clamped just inside them; an anisotropic
    /// noise block is replaced by its mean variance under `Isotropic`.
    pub fn encode(&self, params: &CanonicalParams) -> Result<Vec<f64>> {
        if params.k() != self.k || params.obs_dim() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "parameters have (K, p) = ({}, {}), reparameterization expects ({}, {})",
                params.k(),
                params.obs_dim(),
                self.k,
                self.p
            )));
        }
        let logit = |f: f64| {
            let g = ((f - SQUEEZE) / (1.0 - 2.0 * SQUEEZE)).clamp(1e-15, 1.0 - 1e-15);
            (g / (1.0 - g)).ln()
        };
        let mut u = Vec::with_capacity(self.dim());
        let mut prev = 0.0;
        for (m, mode) in params.modes.iter().enumerate() {
            let (lo, hi) = self.bounds(m, prev);
            let w = mode.omega.clamp(lo, hi);
            u.push(logit((w - lo) / (hi - lo)));
            prev = w;
        }
        for mode in &params.modes {
            u.push(logit(mode.rho));
        }
        let q = &unload_diagonal(&params.state_noise);
        for m in 0..self.k {
            let block = q.view((2 * m, 2 * m), (2, 2)).into_owned();
            match self.q_structure {
                QStructure::Isotropic => u.push(0.5 * (0.5 * block.trace()).ln()),
                QStructure::BlockCholesky => {
                    let l = model::cholesky_factor(&block, "state_noise block")?;
                    u.extend([l[(0, 0)].ln(), l[(1, 0)], l[(1, 1)].ln()]);
                }
            }
        }
        let c = &params.obs_matrix;
        for m in 0..self.k {
            let lead = c[(0, 2 * m)];
            if !(lead > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "mode {m} has non-positive leading loading {lead}"
                )));
            }
            for i in 1..self.p {
                u.push(c[(i, 2 * m)] / lead);
                u.push(c[(i, 2 * m + 1)] / lead);
            }
        }
        let l = model::cholesky_factor(&unload_diagonal(&params.obs_noise), "obs_noise")?;
        for i in 0..self.p {
            for j in 0..=i {
                u.push(if i == j { l[(i, i)].ln() } else { l[(i, j)] });
            }
        }
        Ok(u)
    }

    pub fn decode(&self, u: &[f64]) -> Result<CanonicalParams> {
        self.check_len(u)?;
        let b = self.build::<f64>(u);
        let n = 2 * self.k;
        let modes = b
            .omega
            .iter()
            .zip(&b.rho)
            .map(|(&omega, &rho)| ModeParams::new(omega, rho))
            .collect::<Result<Vec<_>>>()?;
        CanonicalParams::with_delta(
            modes,
            linalg::from_flat(&b.c, self.p, n),
            linalg::from_flat(&b.q, n, n),
            linalg::from_flat(&b.r, self.p, self.p),
            0.0,
        )
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "parameter vector has length {}, expected {}",
                u.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

impl<T: Real> Built<T> {
    fn system(&self, k: usize, p: usize) -> SystemT<T> {
        let n = 2 * k;
        let mut a = vec![T::zero(); n * n];
        for m in 0..k {
            let (s, c) = (self.omega[m].sin(), self.omega[m].cos());
            let (i, j) = (2 * m, 2 * m + 1);
            a[i * n + i] = self.rho[m] * c;
            a[i * n + j] = self.rho[m] * s;
            a[j * n + i] = -(self.rho[m] * s);
            a[j * n + j] = self.rho[m] * c;
        }
        SystemT {
            n,
            p,
            a,
            c: self.c.clone(),
            q: self.q.clone(),
            r: self.r.clone(),
        }
    }

    fn stationary(&self, sys: &SystemT<T>) -> Option<Vec<T>> {
        let n = sys.n;
        match &self.q_iso {
            Some(vals) => {
                let mut s = vec![T::zero(); n * n];
                for (m, v) in vals.iter().enumerate() {
                    let d = *v / (T::one() - self.rho[m] * self.rho[m]);
                    s[(2 * m) * n + 2 * m] = d;
                    s[(2 * m + 1) * n + 2 * m + 1] = d;
                }
                Some(s)
            }
            None => model::lyapunov_doubling(&sys.a, &sys.q, n),
        }
    }
}

/// Scalar function of an unconstrained vector that can be evaluated on any
/// [`Real`], which is what the dual-number gradient needs.
pub(crate) trait Objective {
    fn eval<T: Real>(&self, u: &[T]) -> Option<T>;
}

/// Which criterion to evaluate on the unconstrained coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    /// `−loglik/N + (λ/N) R(θ)`, the optimized objective.
    Likelihood,
    /// The geometric loss reported on each estimate.
    GeometricLoss,
}

struct CanonicalObjective<'a> {
    reparam: &'a Reparameterization,
    y: Vec<f64>,
    len: usize,
    lambda: f64,
    prev: Option<Vec<f64>>,
    criterion: Criterion,
}

impl Objective for CanonicalObjective<'_> {
    fn eval<T: Real>(&self, u: &[T]) -> Option<T> {
        let b = self.reparam.build(u);
        let sys = b.system(self.reparam.k, self.reparam.p);
        let sigma0 = b.stationary(&sys)?;
        let pen = penalty_t(&b.omega, &b.rho, self.prev.as_deref());
        let inv_n = 1.0 / self.len as f64;
        let v = match self.criterion {
            Criterion::Likelihood => {
                let ll = kalman::loglik_fast(&sys, &sigma0, &self.y, self.len).ok()?;
                -ll.scale(inv_n) + pen.scale(self.lambda * inv_n)
            }
            Criterion::GeometricLoss => {
                kalman::smoothing_residual(&sys, &sigma0, &self.y, self.len).ok()?
                    + pen.scale(self.lambda)
            }
        };
        v.value().is_finite().then_some(v)
    }
}

fn dual_gradient<const N: usize, O: Objective>(o: &O, u: &[f64]) -> Option<(f64, Vec<f64>)> {
    let x: Vec<Dual<N>> = u.iter().enumerate().map(|(i, &v)| Dual::variable(v, i)).collect();
    let f = o.eval(&x)?;
    let g = f.eps[..u.len()].to_vec();
    g.iter().all(|v| v.is_finite()).then_some((f.re, g))
}

pub(crate) fn value_and_gradient<O: Objective>(o: &O, u: &[f64]) -> Option<(f64, Vec<f64>)> {
    match u.len() {
        0..=4 => dual_gradient::<4, O>(o, u),
        5..=8 => dual_gradient::<8, O>(o, u),
        9..=16 => dual_gradient::<16, O>(o, u),
        17..=32 => dual_gradient::<32, O>(o, u),
        33..=64 => dual_gradient::<64, O>(o, u),
        _ => {
            let f = o.eval::<f64>(u)?;
            let g = optim::central_gradient(|x| o.eval::<f64>(x), u, 1e-6)?;
            Some((f, g))
        }
    }
}

fn check_prev(prev_omega: Option<&[f64]>, k: usize) -> Result<Option<Vec<f64>>> {
    match prev_omega {
        Some(p) if p.len() != k => Err(Error::DimensionMismatch(format!(
            "prev_omega has {} entries for {k} modes",
            p.len()
        ))),
        other => Ok(other.map(|p| p.to_vec())),
    }
}

fn canonical_objective<'a>(
    reparam: &'a Reparameterization,
    window: &Window,
    lambda: f64,
    prev_omega: Option<&[f64]>,
    criterion: Criterion,
) -> Result<CanonicalObjective<'a>> {
    if window.obs_dim() != reparam.p || window.is_empty() {
        return Err(Error::DimensionMismatch("window does not match the reparameterization".into()));
    }
    Ok(CanonicalObjective {
        reparam,
        y: window.flat(),
        len: window.len(),
        lambda,
        prev: check_prev(prev_omega, reparam.k)?,
        criterion,
    })
}

/// Value of `criterion` at unconstrained coordinates `u`.
pub fn criterion_value(
    criterion: Criterion,
    reparam: &Reparameterization,
    u: &[f64],
    window: &Window,
    lambda: f64,
    prev_omega: Option<&[f64]>,
) -> Result<f64> {
    reparam.check_len(u)?;
    let o = canonical_objective(reparam, window, lambda, prev_omega, criterion)?;
    o.eval::<f64>(u)
        .ok_or_else(|| Error::Evaluation("criterion is not finite at this point".into()))
}

/// Value and exact gradient of `criterion` at unconstrained coordinates `u`.
pub fn criterion_gradient(
    criterion: Criterion,
    reparam: &Reparameterization,
    u: &[f64],
    window: &Window,
    lambda: f64,
    prev_omega: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    reparam.check_len(u)?;
    let o = canonical_objective(reparam, window, lambda, prev_omega, criterion)?;
    value_and_gradient(&o, u)
        .ok_or_else(|| Error::Evaluation("criterion is not finite at this point".into()))
}

/// Deterministic starting point: the K strongest periodogram peaks of
/// channel 0 that are more than `delta_min` apart, a least-squares sinusoid
/// fit for the loadings and amplitudes, `ρ = 0.95`, and `R` from the fit
/// residual.
pub fn initialize(window: &Window, k: usize, delta_min: f64) -> Result<CanonicalParams> {
    let n_samples = window.len();
    if k == 0 {
        return Err(Error::Initialization("k must be at least 1".into()));
    }
    if n_samples < 8 * k {
        return Err(Error::Initialization(format!(
            "window of {n_samples} samples is too short for {k} modes (need ≥ {})",
            8 * k
        )));
    }
    let p = window.obs_dim();
    let x0 = window.channel(0);
    let pgram = energy::periodogram(&x0);
    let last = pgram.len() - 1;
    let top = if n_samples.is_multiple_of(2) { last - 1 } else { last };
    let mut peaks: Vec<usize> = (1..=top)
        .filter(|&j| pgram[j] >= pgram[j - 1] && (j == last || pgram[j] >= pgram[j + 1]))
        .collect();
    peaks.sort_by(|&a, &b| pgram[b].total_cmp(&pgram[a]).then(a.cmp(&b)));
    let mut chosen: Vec<f64> = Vec::with_capacity(k);
    for j in peaks {
        let f = energy::ordinate_frequency(j, n_samples);
        if f <= delta_min.max(1e-9) * 0.5 || f >= std::f64::consts::PI {
            continue;
        }
        if chosen.iter().all(|c| (c - f).abs() > delta_min) {
            chosen.push(f);
            if chosen.len() == k {
                break;
            }
        }
    }
    if chosen.len() < k {
        return Err(Error::Initialization(format!(
            "found {} periodogram peaks separated by more than {delta_min}; try K = {}",
            chosen.len(),
            chosen.len().max(1)
        )));
    }
    chosen.sort_by(f64::total_cmp);

    let design = DMatrix::from_fn(n_samples, 2 * k, |s, j| {
        let arg = chosen[j / 2] * s as f64;
        if j % 2 == 0 {
            arg.cos()
        } else {
            arg.sin()
        }
    });
    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(&window.samples, 1e-12)
        .map_err(|e| Error::Initialization(format!("sinusoid fit failed: {e}")))?;
    let resid = &window.samples - &design * &coef;
    let total_var = (0..p)
        .map(|i| {
            let col = window.samples.column(i);
            let mean = col.mean();
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_samples as f64
        })
        .sum::<f64>()
        / p as f64;
    let floor = 1e-6 * total_var.max(1e-300);
    let resid_var = (resid.norm_squared() / (n_samples * p) as f64).max(floor).max(1e-12);

    let rho = 0.95;
    let n = 2 * k;
    let mut c = DMatrix::zeros(p, n);
    let mut q = DMatrix::zeros(n, n);
    let mut modes = Vec::with_capacity(k);
    for m in 0..k {
        // channel i carries Re(α_i e^{iωs}) with α_i = a_i − i b_i
        let alpha: Vec<(f64, f64)> = (0..p)
            .map(|i| (coef[(2 * m, i)], -coef[(2 * m + 1, i)]))
            .collect();
        let scale = alpha.iter().map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
        let (a0, b0) = alpha[0];
        let mut mag0 = a0.hypot(b0);
        let (a0, b0) = if mag0 > 1e-8 * scale && mag0 > 0.0 {
            (a0, b0)
        } else {
            mag0 = (1e-8 * scale).max(1e-12);
            (mag0, 0.0)
        };
        let mut norm2 = 0.0;
        let mut rows = Vec::with_capacity(p);
        for (i, &(a, b)) in alpha.iter().enumerate() {
            // γ_i = α_i / α_0
            let (re, im) = if i == 0 {
                (1.0, 0.0)
            } else {
                let d = a0 * a0 + b0 * b0;
                ((a * a0 + b * b0) / d, (b * a0 - a * b0) / d)
            };
            norm2 += re * re + im * im;
            rows.push((re, im));
        }
        let norm = norm2.sqrt();
        for (i, (re, im)) in rows.into_iter().enumerate() {
            c[(i, 2 * m)] = re / norm;
            c[(i, 2 * m + 1)] = im / norm;
        }
        c[(0, 2 * m + 1)] = 0.0;
        let amp2 = mag0 * mag0 * norm2;
        let qv = ((1.0 - rho * rho) * amp2 / 2.0).max(floor);
        q[(2 * m, 2 * m)] = qv;
        q[(2 * m + 1, 2 * m + 1)] = qv;
        modes.push(ModeParams::new(chosen[m], rho)?);
    }
    CanonicalParams::with_delta(
        modes,
        c,
        q,
        DMatrix::identity(p, p) * resid_var,
        delta_min,
    )
}

fn perturb(u0: &[f64], seed: u64, scale: f64) -> Vec<f64> {
    let mut r = rng::stream(seed, streams::RESTART);
    u0.iter()
        .map(|v| v + scale * r.sample::<f64, _>(StandardNormal))
        .collect()
}

fn lexicographic_key(p: &CanonicalParams) -> Vec<f64> {
    p.omegas().into_iter().chain(p.rhos()).collect()
}

fn better(a: (f64, &CanonicalParams), b: (f64, &CanonicalParams)) -> bool {
    if a.0 != b.0 {
        return a.0 < b.0;
    }
    let (ka, kb) = (lexicographic_key(a.1), lexicographic_key(b.1));
    ka.iter()
        .zip(&kb)
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x < y)
}

/// Estimate canonical parameters for one window.
///
/// Maximizes the penalized innovations likelihood over the canonical
/// reparameterization from the deterministic initialization and
/// `n_restarts − 1` perturbed copies of it (restart `r` draws from seed
/// `seed ^ r`). The lowest objective wins; exact ties go to the
/// lexicographically smallest `(ω, ρ)`.
pub fn estimate_window(
    window: &Window,
    config: &EstimatorConfig,
    prev: Option<&WindowEstimate>,
) -> Result<WindowEstimate> {
    config.validate()?;
    window.check_length(config.k)?;
    let reparam = Reparameterization::new(config.k, window.obs_dim(), config.q_structure, config.delta_min);
    let init = initialize(window, config.k, config.delta_min)?;
    let u0 = reparam.encode(&init)?;
    let prev_omega = prev
        .map(|e| e.params.omegas())
        .filter(|o| o.len() == config.k);
    let objective = canonical_objective(
        &reparam,
        window,
        config.lambda,
        prev_omega.as_deref(),
        Criterion::Likelihood,
    )?;
    let lcfg = LbfgsConfig {
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        ..LbfgsConfig::default()
    };

    let mut best: Option<WindowEstimate> = None;
    let mut attempts = 0;
    for r in 0..config.n_restarts {
        attempts += 1;
        let start = if r == 0 {
            u0.clone()
        } else {
            perturb(&u0, config.seed ^ r as u64, 0.5)
        };
        let Some(res) = optim::minimize(|u| value_and_gradient(&objective, u), &start, &lcfg) else {
            continue;
        };
        let Ok(params) = reparam.decode(&res.x) else {
            continue;
        };
        let Ok(loss) = geometric_loss(&params, window, config.lambda, prev_omega.as_deref()) else {
            continue;
        };
        let Ok(filtered) = kalman::filter(&params, window) else {
            continue;
        };
        let cand = WindowEstimate {
            params,
            loss,
            loglik: filtered.loglik,
            objective: res.f,
            converged: res.converged,
            grad_norm: res.grad_norm,
            iterations: res.iterations,
            restarts_used: 0,
            best_restart: r,
        };
        let replace = match &best {
            None => true,
            Some(b) => better((cand.objective, &cand.params), (b.objective, &b.params)),
        };
        if replace {
            best = Some(cand);
        }
    }
    match best {
        Some(mut b) => {
            b.restarts_used = attempts;
            Ok(b)
        }
        None => Err(Error::EstimationFailed {
            restarts: attempts,
            best: None,
        }),
    }
}

/// Estimate each window of a stream in order, threading the previous
/// estimate into the frequency-smoothness penalty.
pub fn estimate_stream(windows: &[Window], config: &EstimatorConfig) -> Result<Vec<WindowEstimate>> {
    let mut out: Vec<WindowEstimate> = Vec::with_capacity(windows.len());
    for w in windows {
        let est = estimate_window(w, config, out.last())?;
        out.push(est);
    }
    Ok(out)
}

/// Unconstrained coordinates for the free arm: `A` entries, `C` entries and
/// log-diagonal Cholesky factors of `Q` and `R`.
struct FreeObjective {
    n: usize,
    p: usize,
    y: Vec<f64>,
    len: usize,
}

impl FreeObjective {
    fn build<T: Real>(&self, u: &[T]) -> SystemT<T> {
        let (n, p) = (self.n, self.p);
        let a = u[..n * n].to_vec();
        let c = u[n * n..n * n + p * n].to_vec();
        let mut idx = n * n + p * n;
        let chol = |d: usize, idx: &mut usize| {
            let mut l = vec![T::zero(); d * d];
            for i in 0..d {
                for j in 0..=i {
                    l[i * d + j] = if i == j { u[*idx].exp() } else { u[*idx] };
                    *idx += 1;
                }
            }
            let mut m = vec![T::zero(); d * d];
            linalg::matmul_bt(&l, &l, &mut m, d, d, d);
            load_diagonal(&mut m, d);
            m
        };
        let q = chol(n, &mut idx);
        let r = chol(p, &mut idx);
        SystemT { n, p, a, c, q, r }
    }

    fn encode(raw: &RawParams) -> Result<Vec<f64>> {
        let mut u = linalg::to_flat(&raw.a);
        u.extend(linalg::to_flat(&raw.c));
        for m in [&raw.q, &raw.r] {
            let l = model::cholesky_factor(m, "noise covariance")?;
            for i in 0..l.nrows() {
                for j in 0..=i {
                    u.push(if i == j { l[(i, i)].ln() } else { l[(i, j)] });
                }
            }
        }
        Ok(u)
    }

    fn decode(&self, u: &[f64]) -> RawParams {
        let sys = self.build::<f64>(u);
        RawParams {
            a: linalg::from_flat(&sys.a, self.n, self.n),
            c: linalg::from_flat(&sys.c, self.p, self.n),
            q: linalg::from_flat(&sys.q, self.n, self.n),
            r: linalg::from_flat(&sys.r, self.p, self.p),
        }
    }
}

/// Spectral radius above which the free arm's objective is +∞.
const FREE_RADIUS_LIMIT: f64 = 1.0 - 1e-6;

impl Objective for FreeObjective {
    fn eval<T: Real>(&self, u: &[T]) -> Option<T> {
        let sys = self.build(u);
        let a_val = linalg::from_flat(&linalg::values(&sys.a), self.n, self.n);
        if !(linalg::spectral_radius(&a_val) < FREE_RADIUS_LIMIT) {
            return None;
        }
        let sigma0 = model::lyapunov_doubling(&sys.a, &sys.q, self.n)?;
        let ll = kalman::loglik_fast(&sys, &sigma0, &self.y, self.len).ok()?;
        let v = -ll.scale(1.0 / self.len as f64);
        v.value().is_finite().then_some(v)
    }
}

/// Ablation arm: maximum likelihood over unconstrained `(A, C, Q, R)` with
/// no gauge projection. The start is the canonical initialization seen
/// through a random well-conditioned change of latent coordinates drawn per
/// window, so the returned coordinates are arbitrary within the similarity
/// orbit.
pub fn estimate_window_free(window: &Window, config: &EstimatorConfig) -> Result<RawParams> {
    config.validate()?;
    window.check_length(config.k)?;
    let init = initialize(window, config.k, config.delta_min)?;
    let n = init.state_dim();
    let p = window.obs_dim();
    let mut r = rng::stream(rng::mix(config.seed, window.window_id as u64), streams::FREE_GAUGE);
    let t = gauge::random_transform(n, 10.0, &mut r);
    let raw0 = RawParams::from_canonical(&init).conjugate(&t)?;
    let objective = FreeObjective {
        n,
        p,
        y: window.flat(),
        len: window.len(),
    };
    let u0 = FreeObjective::encode(&raw0)?;
    let lcfg = LbfgsConfig {
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        ..LbfgsConfig::default()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut attempts = 0;
    for rr in 0..config.n_restarts {
        attempts += 1;
        let start = if rr == 0 {
            u0.clone()
        } else {
            perturb(&u0, config.seed ^ rr as u64, 0.05)
        };
        let Some(res) = optim::minimize(|u| value_and_gradient(&objective, u), &start, &lcfg) else {
            continue;
        };
        if best.as_ref().is_none_or(|(f, _)| res.f < *f) {
            best = Some((res.f, res.x));
        }
    }
    match best {
        Some((_, u)) => Ok(objective.decode(&u)),
        None => Err(Error::EstimationFailed {
            restarts: attempts,
            best: None,
        }),
    }
}

/// Per-mode `(ω, ρ)` read from the diagonal 2×2 blocks of an unconstrained
/// transition matrix, as an uncanonicalized pipeline would: each block's
/// eigenvalue argument and modulus, clamped into the valid ranges.
pub fn raw_block_modes(a: &DMatrix<f64>) -> Vec<ModeParams> {
    let k = a.nrows() / 2;
    (0..k)
        .map(|m| {
            let b = a.view((2 * m, 2 * m), (2, 2));
            let tr = b[(0, 0)] + b[(1, 1)];
            let det = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)];
            let disc = 4.0 * det - tr * tr;
            let re = 0.5 * tr;
            let im = 0.5 * disc.max(0.0).sqrt();
            let omega = im.atan2(re).clamp(1e-6, std::f64::consts::PI - 1e-6);
            let rho = if disc > 0.0 {
                det.max(0.0).sqrt()
            } else {
                re.abs() + 0.5 * (-disc).sqrt()
            };
            ModeParams {
                omega,
                rho: rho.clamp(1e-6, 1.0 - 1e-6),
            }
        })
        .collect()
}
