//! Projection of arbitrary minimal state-space parameters onto the canonical
//! oscillatory gauge, and the residual symmetries used in invariance tests.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, CanonicalParams, LinearSystem, ModeParams};

/// Eigenvalues with |Im λ| at or below this are treated as real.
const REAL_EIG_TOL: f64 = 1e-8;

/// Frequencies closer than this after ordering are treated as repeated.
const REPEATED_TOL: f64 = 1e-12;

/// Unconstrained state-space parameters `(A, C, Q, R)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    #[serde(with = "crate::io::matrix_rows")]
    pub a: DMatrix<f64>,
    #[serde(with = "crate::io::matrix_rows")]
    pub c: DMatrix<f64>,
    #[serde(with = "crate::io::matrix_rows")]
    pub q: DMatrix<f64>,
    #[serde(with = "crate::io::matrix_rows")]
    pub r: DMatrix<f64>,
}

impl RawParams {
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let raw = Self { a, c, q, r };
        raw.validate()?;
        Ok(raw)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if n == 0 || self.a.ncols() != n || !n.is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!(
                "A is {:?}, expected a non-empty square matrix of even size",
                self.a.shape()
            )));
        }
        let p = self.c.nrows();
        if p == 0 || self.c.ncols() != n {
            return Err(Error::DimensionMismatch(format!("C is {:?}", self.c.shape())));
        }
        if self.q.shape() != (n, n) || self.r.shape() != (p, p) {
            return Err(Error::DimensionMismatch("noise covariance shapes".into()));
        }
        model::check_spd(&self.q, "Q")?;
        model::check_spd(&self.r, "R")?;
        Ok(())
    }

    pub fn from_canonical(params: &CanonicalParams) -> Self {
        Self {
            a: params.transition(),
            c: params.obs_matrix.clone(),
            q: params.state_noise.clone(),
            r: params.obs_noise.clone(),
        }
    }

    /// Change latent coordinates `z ↦ T z`: `(T A T⁻¹, C T⁻¹, T Q Tᵀ, R)`.
    pub fn conjugate(&self, t: &DMatrix<f64>) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("similarity transform is singular".into()))?;
        let mut q = t * &self.q * t.transpose();
        model::symmetrize(&mut q);
        Ok(Self {
            a: t * &self.a * &t_inv,
            c: &self.c * &t_inv,
            q,
            r: self.r.clone(),
        })
    }

    pub fn k(&self) -> usize {
        self.a.nrows() / 2
    }

    pub fn system(&self) -> LinearSystem {
        LinearSystem::new(&self.a, &self.c, &self.q, &self.r)
    }

    pub fn spectral_density(&self, lambda: f64) -> Result<DMatrix<Complex<f64>>> {
        model::spectral_density_of(&self.a, &self.c, &self.q, &self.r, lambda)
    }
}

/// Project `raw` onto the canonical gauge: modes in ascending frequency, the
/// transition exactly block-diagonal, and each mode's first-row loading equal
/// to `(c, 0)`, `c > 0`, with a unit-norm column pair.
pub fn canonicalize(raw: &RawParams, delta_min: f64) -> Result<CanonicalParams> {
    raw.validate()?;
    let n = raw.a.nrows();
    let k = n / 2;
    let eigs = raw.a.complex_eigenvalues();
    let radius = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(radius < 1.0) {
        return Err(Error::Unstable {
            spectral_radius: radius,
        });
    }
    let mut upper: Vec<Complex<f64>> = eigs.iter().cloned().filter(|z| z.im > REAL_EIG_TOL).collect();
    let n_real = eigs.iter().filter(|z| z.im.abs() <= REAL_EIG_TOL).count();
    if n_real > 0 || upper.len() != k {
        return Err(Error::ModalDegeneracy(format!(
            "transition has {n_real} real eigenvalue(s); expected {k} complex-conjugate pairs"
        )));
    }
    upper.sort_by(|x, y| x.arg().total_cmp(&y.arg()));
    for w in upper.windows(2) {
        let (lo, hi) = (w[0].arg(), w[1].arg());
        if hi - lo <= REPEATED_TOL {
            return Err(Error::ModalDegeneracy(format!(
                "repeated frequency {lo:.6}; the gauge is not unique"
            )));
        }
        if hi - lo <= delta_min {
            return Err(Error::NearCollision {
                lower: lo,
                upper: hi,
                delta_min,
            });
        }
    }

    let a_c = raw.a.map(|v| Complex::new(v, 0.0));
    let mut t = DMatrix::<f64>::zeros(n, n);
    let mut modes = Vec::with_capacity(k);
    for (m, lam) in upper.iter().enumerate() {
        let x = null_vector(&a_c, *lam);
        for i in 0..n {
            t[(i, 2 * m)] = x[i].re;
            t[(i, 2 * m + 1)] = x[i].im;
        }
        modes.push(ModeParams::new(lam.arg(), lam.norm())?);
    }
    // intra-block rotation and scale, which commute with each block
    let c_t = &raw.c * &t;
    let mut g = DMatrix::<f64>::zeros(n, n);
    for m in 0..k {
        let gm = model::block_gauge(&c_t.columns(2 * m, 2).into_owned())?;
        g.view_mut((2 * m, 2 * m), (2, 2)).copy_from(&gm);
    }
    let t = t * g;
    let t_inv = t
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::ModalDegeneracy("modal basis is singular".into()))?;
    let mut q = &t_inv * &raw.q * t_inv.transpose();
    model::symmetrize(&mut q);
    let mut c = &raw.c * &t;
    for m in 0..k {
        // exact zero where the convention demands it
        c[(0, 2 * m + 1)] = 0.0;
    }
    CanonicalParams::with_delta(modes, c, q, raw.r.clone(), delta_min)
}

/// Unit vector spanning the (numerical) null space of `A − λI`.
fn null_vector(a: &DMatrix<Complex<f64>>, lam: Complex<f64>) -> Vec<Complex<f64>> {
    let n = a.nrows();
    let shifted = a - DMatrix::<Complex<f64>>::identity(n, n) * lam;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (j, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bj, bv), (j, &v)| if v < bv { (j, v) } else { (bj, bv) });
    (0..n).map(|i| v_t[(j, i)].conj()).collect()
}

/// Negate the latent coordinates of the flagged modes. The result has the
/// same observation law but violates the `C[0, 2k] > 0` convention for every
/// flipped mode.
pub fn apply_sign_flip(params: &CanonicalParams, flip_mask: &[bool]) -> Result<CanonicalParams> {
    if flip_mask.len() != params.k() {
        return Err(Error::DimensionMismatch(format!(
            "flip mask has {} entries for {} modes",
            flip_mask.len(),
            params.k()
        )));
    }
    let n = params.state_dim();
    let sign: Vec<f64> = (0..n)
        .map(|i| if flip_mask[i / 2] { -1.0 } else { 1.0 })
        .collect();
    let mut out = params.clone();
    for j in 0..n {
        for i in 0..params.obs_dim() {
            out.obs_matrix[(i, j)] *= sign[j];
        }
        for i in 0..n {
            out.state_noise[(i, j)] *= sign[i] * sign[j];
        }
    }
    Ok(out)
}

/// Per-term weights of [`gauge_distance_weighted`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeWeights {
    pub omega: f64,
    pub rho: f64,
    pub c: f64,
    pub q: f64,
    pub r: f64,
}

impl Default for GaugeWeights {
    fn default() -> Self {
        Self {
            omega: 1.0,
            rho: 1.0,
            c: 1.0,
            q: 1.0,
            r: 1.0,
        }
    }
}

/// `|Δω|₁ + |Δρ|₁ + ‖ΔC‖_F + ‖ΔQ‖_F + ‖ΔR‖_F` with unit weights.
pub fn gauge_distance(a: &CanonicalParams, b: &CanonicalParams) -> Result<f64> {
    gauge_distance_weighted(a, b, &GaugeWeights::default())
}

pub fn gauge_distance_weighted(
    a: &CanonicalParams,
    b: &CanonicalParams,
    w: &GaugeWeights,
) -> Result<f64> {
    if a.k() != b.k() || a.obs_dim() != b.obs_dim() {
        return Err(Error::DimensionMismatch(format!(
            "(K, p) = ({}, {}) vs ({}, {})",
            a.k(),
            a.obs_dim(),
            b.k(),
            b.obs_dim()
        )));
    }
    let d_omega: f64 = a.modes.iter().zip(&b.modes).map(|(x, y)| (x.omega - y.omega).abs()).sum();
    let d_rho: f64 = a.modes.iter().zip(&b.modes).map(|(x, y)| (x.rho - y.rho).abs()).sum();
    Ok(w.omega * d_omega
        + w.rho * d_rho
        + w.c * (&a.obs_matrix - &b.obs_matrix).norm()
        + w.q * (&a.state_noise - &b.state_noise).norm()
        + w.r * (&a.obs_noise - &b.obs_noise).norm())
}

/// Maximum entrywise difference between two parameter sets of equal shape.
pub fn max_entry_diff(a: &CanonicalParams, b: &CanonicalParams) -> f64 {
    let modes = a
        .modes
        .iter()
        .zip(&b.modes)
        .map(|(x, y)| (x.omega - y.omega).abs().max((x.rho - y.rho).abs()))
        .fold(0.0, f64::max);
    modes
        .max((&a.obs_matrix - &b.obs_matrix).amax())
        .max((&a.state_noise - &b.state_noise).amax())
        .max((&a.obs_noise - &b.obs_noise).amax())
}

/// Random well-conditioned similarity transform (condition number below
/// `max_cond`), drawn by rejection.
pub fn random_transform<R: rand::Rng>(n: usize, max_cond: f64, rng: &mut R) -> DMatrix<f64> {
    use rand_distr::StandardNormal;
    loop {
        let t = DMatrix::from_fn(n, n, |i, j| {
            let z: f64 = rng.sample(StandardNormal);
            if i == j {
                1.0 + 0.5 * z
            } else {
                0.5 * z
            }
        });
        let sv = t.singular_values();
        let cond = sv.max() / sv.min();
        if cond.is_finite() && cond < max_cond {
            return t;
        }
    }
}

/// Max absolute spectral-density difference over a uniform grid of
/// `points` frequencies in (0, π).
pub fn spectral_gap(a: &RawParams, b: &RawParams, points: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..points {
        let lambda = std::f64::consts::PI * (i as f64 + 0.5) / points as f64;
        let sa = a.spectral_density(lambda)?;
        let sb = b.spectral_density(lambda)?;
        worst = worst.max((sa - sb).map(|z| z.norm()).max());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn two_mode() -> CanonicalParams {
        let c = DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 1.0, 0.0]);
        CanonicalParams::new(
            vec![ModeParams::new(0.3, 0.95).unwrap(), ModeParams::new(1.1, 0.9).unwrap()],
            c,
            DMatrix::from_row_slice(
                4,
                4,
                &[0.2, 0.01, 0.0, 0.0, 0.01, 0.3, 0.0, 0.02, 0.0, 0.0, 0.4, 0.0, 0.0, 0.02, 0.0, 0.1],
            ),
            DMatrix::identity(1, 1) * 0.05,
        )
        .unwrap()
    }

    #[test]
    fn canonical_input_is_a_fixed_point() {
        let p = two_mode();
        let out = canonicalize(&RawParams::from_canonical(&p), 0.05).unwrap();
        assert!(max_entry_diff(&p, &out) < 1e-12, "{}", max_entry_diff(&p, &out));
    }

    #[test]
    fn conjugated_input_is_recovered() {
        let p = two_mode();
        let mut r = rng::stream(3, rng::streams::TEST_FIXTURE);
        let t = random_transform(4, 100.0, &mut r);
        let raw = RawParams::from_canonical(&p).conjugate(&t).unwrap();
        let out = canonicalize(&raw, 0.05).unwrap();
        assert!(max_entry_diff(&p, &out) < 1e-6);
        assert!(spectral_gap(&raw, &RawParams::from_canonical(&out), 256).unwrap() < 1e-8);
    }

    #[test]
    fn real_eigenvalue_is_rejected() {
        let raw = RawParams::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.3]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        assert!(matches!(canonicalize(&raw, 0.05), Err(Error::ModalDegeneracy(_))));
    }

    #[test]
    fn close_frequencies_are_rejected() {
        let p = two_mode();
        let mut raw = RawParams::from_canonical(&p);
        let close = model::transition_unchecked(&[
            ModeParams { omega: 0.3, rho: 0.95 },
            ModeParams { omega: 0.33, rho: 0.9 },
        ]);
        raw.a = close;
        assert!(matches!(canonicalize(&raw, 0.05), Err(Error::NearCollision { .. })));
    }

    #[test]
    fn unstable_input_is_rejected() {
        let mut raw = RawParams::from_canonical(&two_mode());
        raw.a *= 1.2;
        assert!(matches!(canonicalize(&raw, 0.05), Err(Error::Unstable { .. })));
    }

    #[test]
    fn sign_flip_is_an_involution_preserving_the_law() {
        let p = two_mode();
        assert_eq!(apply_sign_flip(&p, &[false, false]).unwrap(), p);
        let once = apply_sign_flip(&p, &[true, false]).unwrap();
        assert_eq!(apply_sign_flip(&once, &[true, false]).unwrap(), p);
        assert!(once.check_gauge_convention(1e-12).is_err());
        let gap = spectral_gap(&RawParams::from_canonical(&p), &RawParams::from_canonical(&once), 64);
        assert!(gap.unwrap() < 1e-12);
    }

    #[test]
    fn distance_of_single_frequency_shift() {
        let p = two_mode();
        let mut q = p.clone();
        q.modes[0].omega += 0.01;
        assert_eq!(gauge_distance(&p, &p).unwrap(), 0.0);
        assert!((gauge_distance(&p, &q).unwrap() - 0.01).abs() < 1e-15);
    }
}
