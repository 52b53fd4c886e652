//! Energy-only window statistics: RMS, variance, band power and kurtosis.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Window;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyFeatures {
    pub rms: f64,
    /// Population variance (divide by N).
    pub variance: f64,
    pub band_power: f64,
    /// Excess kurtosis; 0 when the window is constant.
    pub kurtosis: f64,
    pub kurtosis_defined: bool,
}

impl EnergyFeatures {
    pub fn as_array(&self) -> [f64; 4] {
        [self.rms, self.variance, self.band_power, self.kurtosis]
    }
}

/// One-sided periodogram of the demeaned series at `λ_j = 2πj/N`,
/// `j = 0..=N/2`, scaled so the ordinates sum to the population variance.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let norm = 1.0 / (n as f64 * n as f64);
    (0..=n / 2)
        .map(|j| {
            let mirrored = j != 0 && 2 * j != n;
            let w = if mirrored { 2.0 } else { 1.0 };
            w * buf[j].norm_sqr() * norm
        })
        .collect()
}

/// Frequency of periodogram ordinate `j` for a series of length `n`.
pub fn ordinate_frequency(j: usize, n: usize) -> f64 {
    2.0 * std::f64::consts::PI * j as f64 / n as f64
}

/// Features of channel 0 with band power over `band = (lo, hi)` (inclusive).
pub fn energy_features(window: &Window, band: (f64, f64)) -> Result<EnergyFeatures> {
    if window.len() < 8 {
        return Err(Error::InvalidParameter(format!(
            "energy features need at least 8 samples, got {}",
            window.len()
        )));
    }
    let (lo, hi) = band;
    if !(0.0..=std::f64::consts::PI).contains(&lo) || !(lo..=std::f64::consts::PI).contains(&hi) {
        return Err(Error::InvalidParameter(format!(
            "band ({lo}, {hi}) is not an interval inside [0, π]"
        )));
    }
    Ok(channel_features(&window.channel(0), band))
}

pub(crate) fn channel_features(x: &[f64], band: (f64, f64)) -> EnergyFeatures {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mean_sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    let kurtosis_defined = m2 > 1e-300 && m2 > 1e-24 * mean_sq;
    let kurtosis = if kurtosis_defined { m4 / (m2 * m2) - 3.0 } else { 0.0 };
    let band_power = periodogram(x)
        .iter()
        .enumerate()
        .filter(|(j, _)| {
            let f = ordinate_frequency(*j, x.len());
            f >= band.0 && f <= band.1
        })
        .map(|(_, p)| p)
        .sum();
    EnergyFeatures {
        rms: mean_sq.sqrt(),
        variance: m2,
        band_power,
        kurtosis,
        kurtosis_defined,
    }
}
