//! Linear detection probes, AUROC, and first-order response slopes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Relative ridge added to the pooled covariance when none is given.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProbe {
    /// Unit-norm weights `Σ⁻¹δ / ‖Σ⁻¹δ‖`.
    pub weights: Vec<f64>,
    /// Degraded-minus-healthy mean difference.
    pub delta: Vec<f64>,
    pub threshold: f64,
    pub ridge: f64,
}

impl LinearProbe {
    pub fn score(&self, s: &[f64]) -> Result<f64> {
        if s.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "probe has {} weights, input has {}",
                self.weights.len(),
                s.len()
            )));
        }
        Ok(self.weights.iter().zip(s).map(|(w, x)| w * x).sum())
    }

    pub fn score_rows(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        rows.row_iter()
            .map(|r| self.score(&r.iter().cloned().collect::<Vec<_>>()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub auroc: f64,
    pub n_positive: usize,
    pub n_negative: usize,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.mean()))
}

fn scatter(m: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut centered = m.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    centered.transpose() * centered
}

/// Fit a Fisher-style probe on row-per-window feature matrices. `ridge`
/// defaults to `1e-6 · trace(Σ)/d` of the pooled covariance.
pub fn fit_probe(healthy: &DMatrix<f64>, degraded: &DMatrix<f64>, ridge: Option<f64>) -> Result<LinearProbe> {
    let d = healthy.ncols();
    if d == 0 || degraded.ncols() != d {
        return Err(Error::DimensionMismatch("feature dimensions differ or are zero".into()));
    }
    let (n1, n2) = (healthy.nrows(), degraded.nrows());
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidParameter("each class needs at least 2 rows".into()));
    }
    if healthy.iter().chain(degraded.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("features must be finite".into()));
    }
    let (m1, m2) = (column_means(healthy), column_means(degraded));
    let pooled = (scatter(healthy, &m1) + scatter(degraded, &m2)) / (n1 + n2 - 2) as f64;
    let ridge = match ridge {
        Some(r) if r >= 0.0 => r,
        Some(r) => return Err(Error::InvalidParameter(format!("ridge {r} is negative"))),
        None => DEFAULT_RIDGE_SCALE * pooled.trace() / d as f64,
    };
    let sigma = pooled + DMatrix::identity(d, d) * ridge;
    let delta = &m2 - &m1;
    let chol = sigma.cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite("pooled feature covariance; increase the ridge".into())
    })?;
    let raw = chol.solve(&delta);
    let norm = raw.norm();
    let weights: Vec<f64> = if norm > 0.0 {
        raw.iter().map(|v| v / norm).collect()
    } else {
        vec![0.0; d]
    };
    let w = DVector::from_column_slice(&weights);
    let threshold = 0.5 * (w.dot(&m1) + w.dot(&m2));
    Ok(LinearProbe {
        weights,
        delta: delta.iter().cloned().collect(),
        threshold,
        ridge,
    })
}

/// Area under the ROC curve; ties between classes count one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidParameter("AUROC needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // mid-ranks over tied groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * mid;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

pub fn evaluate(scores: Vec<f64>, labels: Vec<bool>) -> Result<DetectionReport> {
    let auroc = auroc(&scores, &labels)?;
    let n_positive = labels.iter().filter(|l| **l).count();
    Ok(DetectionReport {
        auroc,
        n_positive,
        n_negative: labels.len() - n_positive,
        scores,
        labels,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseSlope {
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub strengths: Vec<f64>,
    /// Monte Carlo mean of the statistic at each strength.
    pub means: Vec<f64>,
    pub n_seeds: usize,
}

impl ResponseSlope {
    /// Whether the 95% interval excludes zero.
    pub fn significant(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

pub const BOOTSTRAP_REPLICATES: usize = 2000;

fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// OLS slope of per-strength means against strength, with a percentile
/// bootstrap interval from resampling seeds within each strength.
/// `values[i]` holds one statistic per seed at `strengths[i]`.
pub fn response_slope(values: &[Vec<f64>], strengths: &[f64], seed: u64) -> Result<ResponseSlope> {
    if values.len() != strengths.len() {
        return Err(Error::DimensionMismatch("one value row per strength is required".into()));
    }
    let mut distinct = strengths.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InvalidParameter("strength grid needs two distinct values".into()));
    }
    if !strengths.contains(&0.0) {
        return Err(Error::InvalidParameter("strength grid must include 0".into()));
    }
    let n_seeds = values.iter().map(Vec::len).min().unwrap_or(0);
    if n_seeds < 10 || values.iter().any(|v| v.len() != n_seeds) {
        return Err(Error::InvalidParameter(
            "need the same number (≥ 10) of seeds at every strength".into(),
        ));
    }
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("statistic values must be finite".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let means: Vec<f64> = values.iter().map(|v| mean(v)).collect();
    let slope = ols_slope(strengths, &means);

    let mut rng = rng::stream(seed, rng::streams::BOOTSTRAP);
    let mut boot = Vec::with_capacity(BOOTSTRAP_REPLICATES);
    let mut resampled = vec![0.0; strengths.len()];
    for _ in 0..BOOTSTRAP_REPLICATES {
        for (m, row) in resampled.iter_mut().zip(values) {
            *m = (0..n_seeds).map(|_| row[rng.random_range(0..n_seeds)]).sum::<f64>() / n_seeds as f64;
        }
        boot.push(ols_slope(strengths, &resampled));
    }
    boot.sort_by(f64::total_cmp);
    Ok(ResponseSlope {
        slope,
        ci_low: quantile(&boot, 0.025),
        ci_high: quantile(&boot, 0.975),
        strengths: strengths.to_vec(),
        means,
        n_seeds,
    })
}

/// Evaluate `statistic(h, seed_index)` over the grid and fit its slope.
pub fn first_order_response<F>(
    mut statistic: F,
    strengths: &[f64],
    n_seeds: usize,
    seed: u64,
) -> Result<ResponseSlope>
where
    F: FnMut(f64, usize) -> Result<f64>,
{
    let mut values = Vec::with_capacity(strengths.len());
    for &h in strengths {
        let row = (0..n_seeds).map(|s| statistic(h, s)).collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    response_slope(&values, strengths, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        assert_eq!(auroc(&[0.1, 0.2, 0.3, 0.8, 0.9], &[false, false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.9, 0.1], &[false, true]).unwrap(), 0.0);
    }

    #[test]
    fn ties_count_half() {
        assert_eq!(auroc(&[0.5; 6], &[true, false, true, false, true, false]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.2, 0.5, 0.5], &[false, false, true]).unwrap(), 0.75);
    }

    #[test]
    fn auroc_needs_both_classes() {
        assert!(auroc(&[1.0, 2.0], &[true, true]).is_err());
    }

    #[test]
    fn probe_points_along_mean_shift() {
        let h = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.1, 0.0, 1.0, 1.0, 0.9]);
        let d = DMatrix::from_row_slice(4, 2, &[5.0, 0.0, 6.0, 0.1, 5.0, 1.0, 6.0, 0.9]);
        let p = fit_probe(&h, &d, None).unwrap();
        assert!(p.weights[0] > 0.99);
        let s = p.score(&[5.5, 0.5]).unwrap();
        assert!(s > p.threshold);
    }

    #[test]
    fn singular_covariance_without_ridge_errors() {
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let d = DMatrix::from_row_slice(3, 2, &[2.0, 2.0, 3.0, 3.0, 4.0, 4.0]);
        assert!(matches!(fit_probe(&h, &d, Some(0.0)), Err(Error::NotPositiveDefinite(_))));
        assert!(fit_probe(&h, &d, None).is_ok());
    }

    #[test]
    fn constant_statistic_has_zero_slope() {
        let strengths = [0.0, 0.01, 0.02];
        let r = first_order_response(|_, _| Ok(3.25), &strengths, 10, 1).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!((r.ci_low, r.ci_high), (0.0, 0.0));
    }

    #[test]
    fn linear_statistic_slope() {
        let strengths = [0.0, 0.1, 0.2, 0.3];
        let r = first_order_response(|h, s| Ok(2.0 * h + 0.01 * (s % 3) as f64), &strengths, 12, 1).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-9);
        assert!(r.significant());
    }

    #[test]
    fn response_grid_validation() {
        assert!(first_order_response(|_, _| Ok(1.0), &[0.0, 0.0], 10, 0).is_err());
        assert!(first_order_response(|_, _| Ok(1.0), &[0.1, 0.2], 10, 0).is_err());
        assert!(first_order_response(|_, _| Ok(1.0), &[0.0, 0.2], 5, 0).is_err());
    }
}
