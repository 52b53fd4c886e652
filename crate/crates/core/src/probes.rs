//! The six per-window indicators and the healthy baseline they are
//! standardized against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::WindowEstimate;
use crate::io::{fmt_f64, CsvTable};
use crate::kalman::{self, SmoothedTrajectory};
use crate::model::CanonicalParams;

pub const DEFAULT_EPSILON: f64 = 1e-3;

/// How per-mode damping factors are aggregated into `D̂`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingAggregate {
    #[default]
    Mean,
    Min,
}

impl DampingAggregate {
    pub fn apply(self, rhos: &[f64]) -> f64 {
        match self {
            Self::Mean => rhos.iter().sum::<f64>() / rhos.len() as f64,
            Self::Min => rhos.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Offset in the LQF denominator.
    pub epsilon: f64,
    pub damping: DampingAggregate,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            damping: DampingAggregate::Mean,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub mu0: f64,
    pub sigma0: f64,
    #[serde(rename = "D0")]
    pub d0: f64,
    pub n_windows: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorVector {
    pub window_id: usize,
    pub gsi: f64,
    pub pcc: f64,
    pub ddi: f64,
    pub fwr: f64,
    pub mll: f64,
    pub lqf: f64,
    /// False when more than half of the phase indices were undefined.
    pub pcc_reliable: bool,
}

pub const INDICATOR_NAMES: [&str; 6] = ["gsi", "pcc", "ddi", "fwr", "mll", "lqf"];

impl IndicatorVector {
    pub fn as_array(&self) -> [f64; 6] {
        [self.gsi, self.pcc, self.ddi, self.fwr, self.mll, self.lqf]
    }
}

/// Mean and sample standard deviation of healthy losses, and mean damping.
pub fn calibrate_baseline(estimates: &[WindowEstimate], damping: DampingAggregate) -> Result<Baseline> {
    let losses: Vec<f64> = estimates.iter().map(|e| e.loss).collect();
    let dampings: Vec<f64> = estimates.iter().map(|e| damping.apply(&e.params.rhos())).collect();
    calibrate_from_values(&losses, &dampings)
}

/// [`calibrate_baseline`] from raw loss and damping values.
pub fn calibrate_from_values(losses: &[f64], dampings: &[f64]) -> Result<Baseline> {
    let n = losses.len();
    if n < 2 {
        return Err(Error::Calibration(format!(
            "need at least 2 healthy windows, got {n}"
        )));
    }
    if dampings.len() != n {
        return Err(Error::DimensionMismatch("losses and dampings differ in length".into()));
    }
    let mu0 = losses.iter().sum::<f64>() / n as f64;
    let var = losses.iter().map(|l| (l - mu0).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sigma0 = var.sqrt();
    if !(sigma0 > 0.0) {
        return Err(Error::DegenerateBaseline);
    }
    let d0 = dampings.iter().sum::<f64>() / n as f64;
    if !(d0 > 0.0 && d0 <= 1.0) {
        return Err(Error::Calibration(format!("baseline damping {d0} outside (0, 1]")));
    }
    Ok(Baseline {
        mu0,
        sigma0,
        d0,
        n_windows: n,
    })
}

/// `1 − |(1/K) Σ_k mean_s exp(iΔφ_{k,s})|` and whether at least half of
/// the increments were defined.
pub fn phase_coherence_collapse(increments: &[Vec<Option<f64>>]) -> (f64, bool) {
    let k = increments.len();
    if k == 0 {
        return (0.0, false);
    }
    let (mut re, mut im) = (0.0, 0.0);
    let (mut defined, mut total) = (0usize, 0usize);
    for mode in increments {
        let (mut mr, mut mi, mut cnt) = (0.0, 0.0, 0usize);
        for d in mode.iter().flatten() {
            mr += d.cos();
            mi += d.sin();
            cnt += 1;
        }
        total += mode.len();
        defined += cnt;
        if cnt > 0 {
            re += mr / cnt as f64;
            im += mi / cnt as f64;
        }
    }
    re /= k as f64;
    im /= k as f64;
    let pcc = (1.0 - re.hypot(im)).clamp(0.0, 1.0);
    (pcc, 2 * defined >= total)
}

/// Circular standard deviation `√(−2 ln R̄)` of a set of angles.
pub fn circular_std(angles: &[f64]) -> f64 {
    if angles.is_empty() {
        return f64::NAN;
    }
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let r = s.hypot(c) / angles.len() as f64;
    (-2.0 * r.min(1.0).ln()).sqrt()
}

/// Population variance of the pairwise ratios `ω_i / ω_j`, `i < j`.
pub fn mode_lock_loss(omega: &[f64]) -> f64 {
    let mut ratios = Vec::new();
    for i in 0..omega.len() {
        for j in i + 1..omega.len() {
            ratios.push(omega[i] / omega[j]);
        }
    }
    if ratios.is_empty() {
        return 0.0;
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / ratios.len() as f64
}

/// Indicators from an estimate's raw ingredients. `loss` is the window's
/// geometric loss and `increments` its per-mode phase increments.
#[allow(clippy::too_many_arguments)]
pub fn indicators_from_parts(
    window_id: usize,
    loss: f64,
    omega: &[f64],
    rho: &[f64],
    increments: &[Vec<Option<f64>>],
    prev: Option<(&[f64], &IndicatorVector)>,
    baseline: &Baseline,
    cfg: &ProbeConfig,
) -> Result<IndicatorVector> {
    if !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be > 0".into()));
    }
    if !(baseline.sigma0 > 0.0) {
        return Err(Error::DegenerateBaseline);
    }
    let gsi = (loss - baseline.mu0) / baseline.sigma0;
    let (pcc, pcc_reliable) = phase_coherence_collapse(increments);
    let d_hat = cfg.damping.apply(rho);
    let deficit = (baseline.d0 - d_hat).max(0.0);
    let (ddi, fwr) = match prev {
        Some((prev_omega, prev_ind)) => {
            if prev_omega.len() != omega.len() {
                return Err(Error::DimensionMismatch("previous estimate has a different K".into()));
            }
            let fwr = omega.iter().zip(prev_omega).map(|(a, b)| (a - b).abs()).sum();
            (prev_ind.ddi + deficit, fwr)
        }
        None => (deficit, 0.0),
    };
    let norm = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
    Ok(IndicatorVector {
        window_id,
        gsi,
        pcc,
        ddi,
        fwr,
        mll: mode_lock_loss(omega),
        lqf: norm / ((1.0 - d_hat) + cfg.epsilon),
        pcc_reliable,
    })
}

pub fn compute_indicators(
    est: &WindowEstimate,
    trajectory: &SmoothedTrajectory,
    window_id: usize,
    prev: Option<(&WindowEstimate, &IndicatorVector)>,
    baseline: &Baseline,
    cfg: &ProbeConfig,
) -> Result<IndicatorVector> {
    if trajectory.k() != est.params.k() {
        return Err(Error::DimensionMismatch("trajectory and estimate differ in K".into()));
    }
    let prev_omega = prev.map(|(e, _)| e.params.omegas());
    indicators_from_parts(
        window_id,
        est.loss,
        &est.params.omegas(),
        &est.params.rhos(),
        &kalman::phase_increments(trajectory),
        prev_omega.as_deref().zip(prev.map(|(_, i)| i)),
        baseline,
        cfg,
    )
}

/// Fold [`compute_indicators`] along one stream of estimates, smoothing
/// each window under its own estimate.
pub fn indicator_series(
    estimates: &[WindowEstimate],
    windows: &[crate::model::Window],
    baseline: &Baseline,
    cfg: &ProbeConfig,
) -> Result<Vec<IndicatorVector>> {
    if estimates.len() != windows.len() {
        return Err(Error::DimensionMismatch("one estimate per window is required".into()));
    }
    let mut out: Vec<IndicatorVector> = Vec::with_capacity(estimates.len());
    for (i, (est, w)) in estimates.iter().zip(windows).enumerate() {
        let traj = kalman::smooth(&est.params, w)?;
        let prev = (i > 0).then(|| (&estimates[i - 1], &out[i - 1]));
        let ind = compute_indicators(est, &traj, w.window_id, prev, baseline, cfg)?;
        out.push(ind);
    }
    Ok(out)
}

/// Smoothed trajectory under `params` followed by the indicator fold for a
/// single window; convenience for tests and the CLI.
pub fn window_indicators(
    est: &WindowEstimate,
    window: &crate::model::Window,
    baseline: &Baseline,
    cfg: &ProbeConfig,
) -> Result<IndicatorVector> {
    let traj = kalman::smooth(&est.params, window)?;
    compute_indicators(est, &traj, window.window_id, None, baseline, cfg)
}

pub fn indicators_csv(series: &[IndicatorVector]) -> CsvTable {
    let mut t = CsvTable::new(&["window_id", "gsi", "pcc", "ddi", "fwr", "mll", "lqf", "pcc_reliable"]);
    for v in series {
        let mut row = vec![v.window_id.to_string()];
        row.extend(v.as_array().iter().map(|x| fmt_f64(*x)));
        row.push(v.pcc_reliable.to_string());
        t.push(row);
    }
    t
}

/// `D̂` of a parameter set under the configured aggregation.
pub fn damping_factor(params: &CanonicalParams, damping: DampingAggregate) -> f64 {
    damping.apply(&params.rhos())
}

/// Total variation `Σ_t |s_{t+1} − s_t|` of a series.
pub fn total_variation(series: &[f64]) -> f64 {
    series.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_arithmetic_and_guards() {
        let b = calibrate_from_values(&[1.0, 2.0, 3.0], &[0.9, 0.9, 0.9]).unwrap();
        assert_eq!((b.mu0, b.sigma0, b.n_windows), (2.0, 1.0, 3));
        assert!(matches!(
            calibrate_from_values(&[1.0, 1.0], &[0.9, 0.9]),
            Err(Error::DegenerateBaseline)
        ));
        assert!(matches!(calibrate_from_values(&[1.0], &[0.9]), Err(Error::Calibration(_))));
    }

    #[test]
    fn identical_increments_have_zero_collapse() {
        let inc = vec![vec![Some(0.3); 50]];
        let (pcc, ok) = phase_coherence_collapse(&inc);
        assert!(pcc.abs() < 1e-12 && ok);
    }

    #[test]
    fn mostly_missing_phases_are_flagged() {
        let mut inc = vec![None; 10];
        inc[0] = Some(0.1);
        let (pcc, ok) = phase_coherence_collapse(&[inc]);
        assert!(!ok);
        assert!(pcc.abs() < 1e-12);
    }

    #[test]
    fn circular_std_of_constant_and_spread_angles() {
        assert_eq!(circular_std(&[0.7; 9]), 0.0);
        let spread = circular_std(&[-0.1, 0.1]);
        assert!((spread - (-2.0 * 0.1f64.cos().ln()).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mode_lock_loss_of_harmonic_ratios() {
        assert_eq!(mode_lock_loss(&[0.7]), 0.0);
        let v = mode_lock_loss(&[0.3, 0.6, 1.2]);
        assert!((v - 0.013_888_888_888_888_9).abs() < 1e-12);
    }

    #[test]
    fn frequency_wander_is_l1_change() {
        let base = Baseline {
            mu0: 0.0,
            sigma0: 1.0,
            d0: 0.9,
            n_windows: 2,
        };
        let cfg = ProbeConfig::default();
        let first = indicators_from_parts(0, 0.0, &[0.3, 1.1], &[0.9, 0.9], &[], None, &base, &cfg).unwrap();
        let second = indicators_from_parts(
            1,
            0.0,
            &[0.31, 1.08],
            &[0.8, 0.8],
            &[],
            Some((&[0.3, 1.1], &first)),
            &base,
            &cfg,
        )
        .unwrap();
        assert!((second.fwr - 0.03).abs() < 1e-15);
        assert!((second.ddi - 0.1).abs() < 1e-12);
        assert_eq!(first.fwr, 0.0);
    }

    #[test]
    fn lqf_decreases_with_damping_margin() {
        let base = Baseline {
            mu0: 0.0,
            sigma0: 1.0,
            d0: 0.9,
            n_windows: 2,
        };
        let cfg = ProbeConfig::default();
        let lqf = |rho: f64| {
            indicators_from_parts(0, 0.0, &[0.5], &[rho], &[], None, &base, &cfg)
                .unwrap()
                .lqf
        };
        assert!(lqf(0.99) > lqf(0.9) && lqf(0.9) > lqf(0.5));
    }
}
