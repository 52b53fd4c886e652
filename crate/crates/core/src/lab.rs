//! Labeled synthetic streams with controlled degradations.

use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, series_csv};
use crate::estimator::{self, EstimatorConfig, WindowEstimate};
use crate::kalman::{self, PHASE_NORM_FLOOR};
use crate::model::{self, CanonicalParams, ModeParams, Window};
use crate::rng::{self, streams};

pub const DAMPING_FLOOR: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationKind {
    PhaseJitter,
    FreqWander,
    DampingDrift,
    AmplitudeShock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationScenario {
    pub kind: DegradationKind,
    pub onset_sample: usize,
    /// Jitter std (rad), drift rate (rad/sample), ρ decay per sample, or
    /// shock amplitude, depending on `kind`.
    pub strength: f64,
    pub base_params: CanonicalParams,
    /// Margin kept from 0 and π when wandering frequencies are clipped.
    #[serde(default = "default_delta")]
    pub delta_min: f64,
}

fn default_delta() -> f64 {
    model::DEFAULT_DELTA_MIN
}

impl DegradationScenario {
    pub fn new(kind: DegradationKind, onset_sample: usize, strength: f64, base_params: CanonicalParams) -> Self {
        Self {
            kind,
            onset_sample,
            strength,
            base_params,
            delta_min: model::DEFAULT_DELTA_MIN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "strength must be finite and ≥ 0, got {}",
                self.strength
            )));
        }
        self.base_params.validate(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledStream {
    /// T × p observations.
    #[serde(skip)]
    pub observations: DMatrix<f64>,
    /// 2K × T latent path before any observation-level shock.
    #[serde(skip)]
    pub latent: DMatrix<f64>,
    pub window_labels: Vec<bool>,
    pub window_len: usize,
    pub scenario: DegradationScenario,
    /// Set when a wandering or drifting parameter hit its clip.
    pub clipped: bool,
    pub seed: u64,
}

impl LabeledStream {
    pub fn len(&self) -> usize {
        self.observations.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.nrows() == 0
    }

    pub fn windows(&self) -> Vec<Window> {
        model::split_windows(&self.observations.transpose(), self.window_len)
    }
}

/// Window `w` is degraded iff `[w·L, (w+1)·L)` reaches the onset.
pub fn window_labels(total: usize, window_len: usize, onset: usize) -> Vec<bool> {
    (0..total / window_len).map(|w| (w + 1) * window_len > onset).collect()
}

fn rotate_blocks(z: &mut DVector<f64>, angles: &[f64]) {
    for (k, eta) in angles.iter().enumerate() {
        let (s, c) = eta.sin_cos();
        let (a, b) = (z[2 * k], z[2 * k + 1]);
        z[2 * k] = c * a + s * b;
        z[2 * k + 1] = -s * a + c * b;
    }
}

pub fn generate(scenario: &DegradationScenario, total_samples: usize, window_len: usize, seed: u64) -> Result<LabeledStream> {
    generate_with_nuisance(scenario, None, total_samples, window_len, seed)
}

/// [`generate`] with an optional amplitude-shock nuisance layered on top.
pub fn generate_with_nuisance(
    scenario: &DegradationScenario,
    nuisance: Option<(usize, f64)>,
    total_samples: usize,
    window_len: usize,
    seed: u64,
) -> Result<LabeledStream> {
    scenario.validate()?;
    if window_len == 0 || total_samples < 2 * window_len {
        return Err(Error::InvalidParameter(format!(
            "total_samples {total_samples} must be at least twice window_len {window_len}"
        )));
    }
    let base = &scenario.base_params;
    let onset = scenario.onset_sample;
    let h = scenario.strength;
    let k = base.k();
    let mut clipped = false;

    let trajectory = match scenario.kind {
        DegradationKind::PhaseJitter if h > 0.0 => {
            let mut jitter = rng::stream(seed, streams::PHASE_JITTER);
            let normal = Normal::new(0.0, h).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let mut angles = vec![0.0; k];
            model::simulate_driven(
                base,
                total_samples,
                seed,
                None,
                |_| None,
                |t, z| {
                    if t >= onset {
                        angles.iter_mut().for_each(|a| *a = jitter.sample(normal));
                        rotate_blocks(z, &angles);
                    }
                },
            )?
        }
        DegradationKind::FreqWander | DegradationKind::DampingDrift if h > 0.0 => {
            let lo = scenario.delta_min;
            let hi = std::f64::consts::PI - scenario.delta_min;
            let modes = base.modes.clone();
            let kind = scenario.kind;
            model::simulate_driven(
                base,
                total_samples,
                seed,
                None,
                |t| {
                    if t < onset {
                        return None;
                    }
                    let dt = (t - onset) as f64;
                    let shifted: Vec<ModeParams> = modes
                        .iter()
                        .map(|m| {
                            let mut m = *m;
                            if kind == DegradationKind::FreqWander {
                                let w = m.omega + h * dt;
                                let wc = w.clamp(lo, hi);
                                clipped |= wc != w;
                                m.omega = wc;
                            } else {
                                let r = m.rho - h * dt;
                                clipped |= r < DAMPING_FLOOR;
                                m.rho = r.max(DAMPING_FLOOR);
                            }
                            m
                        })
                        .collect();
                    model::build_transition(&shifted).ok()
                },
                |_, _| {},
            )?
        }
        _ => model::simulate(base, total_samples, seed)?,
    };

    let mut observations = trajectory.observations.transpose();
    let shock = |amp_onset: usize, amp: f64, obs: &mut DMatrix<f64>| {
        if amp <= 0.0 {
            return;
        }
        let mut draws = rng::stream(seed, streams::AMPLITUDE_SHOCK);
        let mut factor_window = usize::MAX;
        let mut factor = 1.0;
        for t in amp_onset..total_samples {
            let w = t / window_len;
            if w != factor_window {
                factor_window = w;
                factor = if draws.random_bool(0.5) { 1.0 + amp } else { 1.0 };
            }
            obs.row_mut(t).scale_mut(factor);
        }
    };
    if scenario.kind == DegradationKind::AmplitudeShock {
        shock(onset, h, &mut observations);
    }
    if let Some((n_onset, n_amp)) = nuisance {
        if !(n_amp >= 0.0 && n_amp.is_finite()) {
            return Err(Error::InvalidParameter("nuisance amplitude must be ≥ 0".into()));
        }
        shock(n_onset, n_amp, &mut observations);
    }

    Ok(LabeledStream {
        observations,
        latent: trajectory.latent,
        window_labels: window_labels(total_samples, window_len, onset),
        window_len,
        scenario: scenario.clone(),
        clipped,
        seed,
    })
}

/// Smoothed `(z₁, z₂)` coordinates of one mode over `segment`, using the
/// scenario's base parameters.
pub fn latent_portrait(stream: &LabeledStream, mode_index: usize, segment: Range<usize>) -> Result<Vec<(f64, f64)>> {
    let k = stream.scenario.base_params.k();
    if mode_index >= k {
        return Err(Error::InvalidParameter(format!("mode {mode_index} out of range for K = {k}")));
    }
    if segment.end > stream.len() || segment.start > segment.end {
        return Err(Error::InvalidParameter(format!(
            "segment {segment:?} outside stream of length {}",
            stream.len()
        )));
    }
    if segment.is_empty() {
        return Ok(Vec::new());
    }
    let rows = stream.observations.rows(segment.start, segment.len()).into_owned();
    let window = Window::new(rows, segment.start, 0);
    let traj = kalman::smooth(&stream.scenario.base_params, &window)?;
    Ok((0..traj.len())
        .map(|t| (traj.means[(t, 2 * mode_index)], traj.means[(t, 2 * mode_index + 1)]))
        .collect())
}

/// Smoothed `(z₁, z₂)` coordinates of one mode over `segment` as the
/// monitoring pipeline sees them: each `window_len` chunk is estimated in
/// the canonical gauge and smoothed under its own estimate. A trailing
/// partial chunk is dropped.
pub fn fitted_portrait(
    stream: &LabeledStream,
    mode_index: usize,
    segment: Range<usize>,
    config: &EstimatorConfig,
) -> Result<Vec<(f64, f64)>> {
    if mode_index >= config.k {
        return Err(Error::InvalidParameter(format!(
            "mode {mode_index} out of range for K = {}",
            config.k
        )));
    }
    if segment.end > stream.len() || segment.start > segment.end {
        return Err(Error::InvalidParameter(format!(
            "segment {segment:?} outside stream of length {}",
            stream.len()
        )));
    }
    let len = stream.window_len;
    let mut points = Vec::with_capacity(segment.len());
    let mut prev: Option<WindowEstimate> = None;
    let mut start = segment.start;
    while start + len <= segment.end {
        let window = Window::new(stream.observations.rows(start, len).into_owned(), start, start / len);
        let est = estimator::estimate_window(&window, config, prev.as_ref())?;
        let traj = kalman::smooth(&est.params, &window)?;
        points.extend((0..traj.len()).map(|t| (traj.means[(t, 2 * mode_index)], traj.means[(t, 2 * mode_index + 1)])));
        prev = Some(est);
        start += len;
    }
    Ok(points)
}

/// Wrapped phase increments between consecutive portrait points, using the
/// phase convention `atan2(−z₂, z₁)`; pairs touching the origin are skipped.
pub fn portrait_increments(points: &[(f64, f64)]) -> Vec<f64> {
    points
        .windows(2)
        .filter(|w| w[0].0.hypot(w[0].1) > PHASE_NORM_FLOOR && w[1].0.hypot(w[1].1) > PHASE_NORM_FLOOR)
        .map(|w| {
            let (a, b) = w[0];
            let (c, d) = w[1];
            // arg of (c − id)(a + ib)
            (a * (-d) + b * c).atan2(c * a + d * b)
        })
        .collect()
}

pub fn mean_radius(points: &[(f64, f64)]) -> f64 {
    points.iter().map(|(a, b)| a.hypot(*b)).sum::<f64>() / points.len() as f64
}

/// Write `<name>.csv` (t, x_1..x_p) and `<name>.json` (scenario, labels,
/// seed) into `dir`.
pub fn write_stream(stream: &LabeledStream, dir: &Path, name: &str) -> Result<()> {
    series_csv(&stream.observations.transpose(), "x").write(&dir.join(format!("{name}.csv")))?;
    io::write_json(&dir.join(format!("{name}.json")), stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> CanonicalParams {
        CanonicalParams::new(
            vec![ModeParams::new(0.4, 0.97).unwrap()],
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::identity(2, 2) * (1.0 - 0.97f64.powi(2)),
            DMatrix::identity(1, 1) * 0.01,
        )
        .unwrap()
    }

    #[test]
    fn labels_follow_onset() {
        assert_eq!(window_labels(40, 10, 15), vec![false, true, true, true]);
        assert_eq!(window_labels(40, 10, 20), vec![false, false, true, true]);
        assert_eq!(window_labels(40, 10, 0), vec![true; 4]);
    }

    #[test]
    fn null_strength_matches_simulation() {
        let plain = model::simulate(&base(), 300, 9).unwrap().observations.transpose();
        for kind in [
            DegradationKind::PhaseJitter,
            DegradationKind::FreqWander,
            DegradationKind::DampingDrift,
            DegradationKind::AmplitudeShock,
        ] {
            let s = generate(&DegradationScenario::new(kind, 100, 0.0, base()), 300, 50, 9).unwrap();
            assert_eq!(s.observations, plain);
        }
    }

    #[test]
    fn jitter_preserves_latent_norm_per_step() {
        let mut z: DVector<f64> = DVector::from_vec(vec![0.3, -1.2, 2.0, 0.5]);
        let before = (z[0].hypot(z[1]), z[2].hypot(z[3]));
        rotate_blocks(&mut z, &[0.7, -2.1]);
        assert!((z[0].hypot(z[1]) - before.0).abs() < 1e-15);
        assert!((z[2].hypot(z[3]) - before.1).abs() < 1e-15);
    }

    #[test]
    fn increments_of_uniform_rotation() {
        let pts: Vec<(f64, f64)> = (0..20).map(|t| ((0.4 * t as f64).cos(), -(0.4 * t as f64).sin())).collect();
        let inc = portrait_increments(&pts);
        assert_eq!(inc.len(), 19);
        assert!(inc.iter().all(|d| (d - 0.4).abs() < 1e-12));
        assert!((mean_radius(&pts) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn damping_drift_clips_at_floor() {
        let sc = DegradationScenario::new(DegradationKind::DampingDrift, 10, 0.1, base());
        assert!(generate(&sc, 100, 20, 1).unwrap().clipped);
        let sc = DegradationScenario::new(DegradationKind::DampingDrift, 10, 1e-6, base());
        assert!(!generate(&sc, 100, 20, 1).unwrap().clipped);
    }

    #[test]
    fn rejects_short_stream_and_bad_portrait_args() {
        let sc = DegradationScenario::new(DegradationKind::PhaseJitter, 10, 0.3, base());
        assert!(generate(&sc, 30, 20, 1).is_err());
        let s = generate(&sc, 40, 20, 1).unwrap();
        assert!(latent_portrait(&s, 0, 5..5).unwrap().is_empty());
        assert!(latent_portrait(&s, 1, 0..10).is_err());
        assert!(latent_portrait(&s, 0, 0..41).is_err());
    }
}
