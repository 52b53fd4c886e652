//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every function returns flat `Float64Array`s; the page slices them.

use goosc::estimator::{self, EstimatorConfig};
use goosc::harness::{ExperimentConfig, SystemConfig};
use goosc::lab::{self, DegradationKind, DegradationScenario};
use goosc::model::{self, CanonicalParams};
use goosc::{energy, kalman, probes};
use wasm_bindgen::prelude::*;

const WINDOW_LEN: usize = 512;
const WINDOWS: usize = 16;

fn err(e: goosc::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn system(omega: &[f64], rho: &[f64]) -> Result<CanonicalParams, JsValue> {
    SystemConfig {
        omega: omega.to_vec(),
        rho: rho.to_vec(),
        ..SystemConfig::default()
    }
    .params(0.05)
    .map_err(err)
}

fn default_system() -> Result<CanonicalParams, JsValue> {
    ExperimentConfig::default().base_params().map_err(err)
}

/// Observation spectral density of a two-mode system on `points`
/// frequencies in `[0, π]`: frequencies first, then densities.
#[wasm_bindgen]
pub fn spectrum(omega1: f64, omega2: f64, rho1: f64, rho2: f64, points: usize) -> Result<Vec<f64>, JsValue> {
    let params = system(&[omega1, omega2], &[rho1, rho2])?;
    let n = points.max(2);
    let mut freqs = Vec::with_capacity(n);
    let mut dens = Vec::with_capacity(n);
    for j in 0..n {
        let lambda = std::f64::consts::PI * j as f64 / (n - 1) as f64;
        let s = model::spectral_density(&params, lambda).map_err(err)?;
        freqs.push(lambda);
        dens.push(s[(0, 0)].re);
    }
    freqs.extend(dens);
    Ok(freqs)
}

/// Smoothed latent portrait of mode 1 before and after a phase-jitter
/// onset: `[n_pre, x, y, x, y, ...]` with the pre-onset points first.
#[wasm_bindgen]
pub fn portrait(jitter: f64, seed: u32) -> Result<Vec<f64>, JsValue> {
    let params = default_system()?;
    let half = 2048;
    let scenario = DegradationScenario::new(DegradationKind::PhaseJitter, half, jitter, params);
    let stream = lab::generate(&scenario, 2 * half, WINDOW_LEN, seed as u64).map_err(err)?;
    let pre = lab::latent_portrait(&stream, 1, 0..half).map_err(err)?;
    let post = lab::latent_portrait(&stream, 1, half..2 * half).map_err(err)?;
    let mut out = vec![pre.len() as f64];
    out.extend(pre.iter().chain(&post).flat_map(|(x, y)| [*x, *y]));
    Ok(out)
}

/// Per-window RMS and PCC over a stream whose second half is phase
/// jittered: RMS values first, then PCC values.
#[wasm_bindgen]
pub fn rms_vs_pcc(jitter: f64, seed: u32) -> Result<Vec<f64>, JsValue> {
    let params = default_system()?;
    let total = WINDOWS * WINDOW_LEN;
    let scenario = DegradationScenario::new(DegradationKind::PhaseJitter, total / 2, jitter, params);
    let stream = lab::generate(&scenario, total, WINDOW_LEN, seed as u64).map_err(err)?;
    let config = EstimatorConfig {
        n_restarts: 1,
        ..EstimatorConfig::default()
    };
    let mut rms = Vec::with_capacity(WINDOWS);
    let mut pcc = Vec::with_capacity(WINDOWS);
    let mut prev = None;
    for w in stream.windows() {
        let est = estimator::estimate_window(&w, &config, prev.as_ref()).map_err(err)?;
        let traj = kalman::smooth(&est.params, &w).map_err(err)?;
        pcc.push(probes::phase_coherence_collapse(&kalman::phase_increments(&traj)).0);
        rms.push(energy::energy_features(&w, (0.0, std::f64::consts::PI)).map_err(err)?.rms);
        prev = Some(est);
    }
    rms.extend(pcc);
    Ok(rms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_peaks_near_the_mode_frequencies() {
        let s = spectrum(0.5, 2.0, 0.99, 0.99, 629).unwrap();
        let (f, d) = s.split_at(629);
        let peak = |lo: f64, hi: f64| {
            let i = (0..629)
                .filter(|&i| f[i] > lo && f[i] < hi)
                .max_by(|&a, &b| d[a].total_cmp(&d[b]))
                .unwrap();
            f[i]
        };
        assert!((peak(0.0, 1.2) - 0.5).abs() < 0.02);
        assert!((peak(1.2, 3.1) - 2.0).abs() < 0.02);
    }

    #[test]
    fn portrait_splits_at_onset() {
        let p = portrait(0.3, 1).unwrap();
        assert_eq!(p[0] as usize, 2048);
        assert_eq!(p.len(), 1 + 2 * 4096);
    }
}
