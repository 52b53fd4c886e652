//! Experiment configuration, the shared window pipeline, and the five
//! end-to-end experiments. Every experiment writes `results.csv`,
//! `report.json`, `manifest.json` and an SVG plot into its output directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::detector::{self, DetectionReport, LinearProbe, ResponseSlope};
use crate::energy::{self, EnergyFeatures};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorConfig, WindowEstimate};
use crate::gauge::RawParams;
use crate::io::{self, fmt_f64, CsvTable};
use crate::kalman;
use crate::lab::{self, DegradationKind, DegradationScenario, LabeledStream};
use crate::model::{self, CanonicalParams, ModeParams, Window};
use crate::plot::{self, Panel, Series};
use crate::probes::{self, Baseline, IndicatorVector, ProbeConfig};
use crate::rng::{self, streams};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

const CALIBRATION_INDEX: u64 = u32::MAX as u64;
const STATIONARY_INDEX: u64 = u32::MAX as u64 - 1;

/// Narrowband test system: modes with `q_k = 1 − ρ_k²` (unit stationary
/// variance per latent coordinate), isotropic observation noise, and
/// channel `i` of `p` loading every mode at angle `i·(π/2)/(p − 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub omega: Vec<f64>,
    pub rho: Vec<f64>,
    pub obs_noise: f64,
    pub obs_dim: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            omega: vec![0.3, 1.1],
            rho: vec![0.998, 0.998],
            obs_noise: 0.01,
            obs_dim: 1,
        }
    }
}

impl SystemConfig {
    pub fn params(&self, delta_min: f64) -> Result<CanonicalParams> {
        let k = self.omega.len();
        if k == 0 || self.rho.len() != k {
            return Err(Error::Config(format!(
                "system.omega and system.rho must be non-empty and equal in length ({} vs {})",
                k,
                self.rho.len()
            )));
        }
        if self.obs_dim == 0 {
            return Err(Error::Config("system.obs_dim must be ≥ 1".into()));
        }
        if !(self.obs_noise > 0.0) {
            return Err(Error::Config("system.obs_noise must be > 0".into()));
        }
        let modes = self
            .omega
            .iter()
            .zip(&self.rho)
            .map(|(w, r)| ModeParams::new(*w, *r))
            .collect::<Result<Vec<_>>>()?;
        let n = 2 * k;
        let mut c = DMatrix::zeros(self.obs_dim, n);
        let p = self.obs_dim;
        for m in 0..k {
            for row in 0..p {
                let theta = if p == 1 {
                    0.0
                } else {
                    row as f64 * std::f64::consts::FRAC_PI_2 / (p - 1) as f64
                };
                c[(row, 2 * m)] = theta.cos();
                c[(row, 2 * m + 1)] = theta.sin();
            }
        }
        let q = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            self.rho.iter().flat_map(|r| [1.0 - r * r; 2]),
        ));
        let r = DMatrix::identity(self.obs_dim, self.obs_dim) * self.obs_noise;
        CanonicalParams::with_delta(modes, c, q, r, delta_min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: DegradationKind,
    pub strength: f64,
    /// Onset as a fraction of the stream, rounded down to a window boundary.
    pub onset_fraction: f64,
    pub nuisance_strength: f64,
    pub nuisance_onset_fraction: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: DegradationKind::PhaseJitter,
            strength: 0.3,
            onset_fraction: 0.5,
            nuisance_strength: 1.0,
            nuisance_onset_fraction: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    Motivation,
    Geometry,
    Ablation,
    Efficiency,
    Stress,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 5] = [
        Self::Motivation,
        Self::Geometry,
        Self::Ablation,
        Self::Efficiency,
        Self::Stress,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Motivation => "motivation",
            Self::Geometry => "geometry",
            Self::Ablation => "ablation",
            Self::Efficiency => "efficiency",
            Self::Stress => "stress",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown experiment {s:?}; expected one of motivation, geometry, ablation, efficiency, stress"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentName>,
    pub seed: u64,
    pub n_seeds: usize,
    pub window_len: usize,
    pub total_samples: usize,
    /// Healthy windows used to calibrate the baseline.
    pub calibration_windows: usize,
    pub output_dir: Option<PathBuf>,
    /// Mode plotted by the geometry experiment.
    pub mode_index: usize,
    /// Label budgets of the efficiency experiment.
    pub budgets: Vec<usize>,
    /// Frequency band of the energy band-power feature.
    pub energy_band: [f64; 2],
    pub system: SystemConfig,
    pub scenario: ScenarioConfig,
    pub estimator: EstimatorConfig,
    pub probes: ProbeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 0,
            n_seeds: 10,
            window_len: 512,
            total_samples: 65_536,
            calibration_windows: 32,
            output_dir: None,
            mode_index: 1,
            budgets: vec![5, 10, 20, 40, 80, 160, 320],
            energy_band: [0.0, std::f64::consts::PI],
            system: SystemConfig::default(),
            scenario: ScenarioConfig::default(),
            estimator: EstimatorConfig::default(),
            probes: ProbeConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.estimator.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.system
            .params(self.estimator.delta_min)
            .map_err(|e| Error::Config(format!("system: {e}")))?;
        if self.estimator.k != self.system.omega.len() {
            return Err(Error::Config(format!(
                "estimator.k = {} but the system has {} modes",
                self.estimator.k,
                self.system.omega.len()
            )));
        }
        if self.window_len < 8 * self.estimator.k.max(1) {
            return Err(Error::Config(format!(
                "window_len {} is below 8·K",
                self.window_len
            )));
        }
        if self.total_samples < 2 * self.window_len {
            return Err(Error::Config("total_samples must be at least 2·window_len".into()));
        }
        if self.n_seeds == 0 || self.calibration_windows < 2 {
            return Err(Error::Config("n_seeds ≥ 1 and calibration_windows ≥ 2 are required".into()));
        }
        let s = &self.scenario;
        if !(s.strength >= 0.0) || !(s.nuisance_strength >= 0.0) {
            return Err(Error::Config("scenario strengths must be ≥ 0".into()));
        }
        for f in [s.onset_fraction, s.nuisance_onset_fraction] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config("onset fractions must lie in [0, 1]".into()));
            }
        }
        if self.mode_index >= self.estimator.k {
            return Err(Error::Config("mode_index must be below K".into()));
        }
        if self.budgets.iter().any(|b| *b < 4) {
            return Err(Error::Config("label budgets must be ≥ 4".into()));
        }
        let [lo, hi] = self.energy_band;
        if !(0.0 <= lo && lo <= hi && hi <= std::f64::consts::PI) {
            return Err(Error::Config("energy_band must be an interval inside [0, π]".into()));
        }
        Ok(())
    }

    pub fn base_params(&self) -> Result<CanonicalParams> {
        self.system.params(self.estimator.delta_min)
    }

    fn onset(&self, fraction: f64) -> usize {
        let raw = (fraction * self.total_samples as f64).floor() as usize;
        raw / self.window_len * self.window_len
    }

    pub fn onset_sample(&self) -> usize {
        self.onset(self.scenario.onset_fraction)
    }

    pub fn stream_seed(&self, index: usize) -> u64 {
        rng::mix(self.seed, index as u64)
    }

    /// The configured degradation on stream `index`, with the nuisance
    /// shock layered on when `with_nuisance` is set.
    pub fn degraded_stream(&self, index: usize, with_nuisance: bool) -> Result<LabeledStream> {
        let scenario = DegradationScenario {
            delta_min: self.estimator.delta_min,
            ..DegradationScenario::new(
                self.scenario.kind,
                self.onset_sample(),
                self.scenario.strength,
                self.base_params()?,
            )
        };
        let nuisance = with_nuisance.then(|| {
            (
                self.onset(self.scenario.nuisance_onset_fraction),
                self.scenario.nuisance_strength,
            )
        });
        lab::generate_with_nuisance(
            &scenario,
            nuisance,
            self.total_samples,
            self.window_len,
            self.stream_seed(index),
        )
    }

    fn healthy_stream(&self, total: usize, seed: u64) -> Result<LabeledStream> {
        let scenario = DegradationScenario::new(DegradationKind::PhaseJitter, total, 0.0, self.base_params()?);
        lab::generate(&scenario, total, self.window_len, seed)
    }

    pub fn band(&self) -> (f64, f64) {
        (self.energy_band[0], self.energy_band[1])
    }
}

/// Everything the pipeline computes for one window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowRecord {
    pub stream: usize,
    pub label: bool,
    pub estimate: WindowEstimate,
    pub indicators: IndicatorVector,
    pub energy: EnergyFeatures,
}

/// Calibrate the baseline on a fresh healthy stream.
pub fn calibrate(cfg: &ExperimentConfig) -> Result<(Baseline, Vec<WindowEstimate>)> {
    let total = cfg.calibration_windows * cfg.window_len;
    let stream = cfg.healthy_stream(total, rng::mix(cfg.seed, CALIBRATION_INDEX))?;
    let estimates = estimator::estimate_stream(&stream.windows(), &cfg.estimator)?;
    let baseline = probes::calibrate_baseline(&estimates, cfg.probes.damping)?;
    Ok((baseline, estimates))
}

/// Estimate, smooth and score every window of a stream in order.
pub fn analyze_windows(
    cfg: &ExperimentConfig,
    windows: &[Window],
    labels: &[bool],
    stream: usize,
    baseline: &Baseline,
) -> Result<Vec<WindowRecord>> {
    let mut out: Vec<WindowRecord> = Vec::with_capacity(windows.len());
    for (i, w) in windows.iter().enumerate() {
        let prev = out.last();
        let estimate = estimator::estimate_window(w, &cfg.estimator, prev.map(|r| &r.estimate))?;
        let traj = kalman::smooth(&estimate.params, w)?;
        let indicators = probes::compute_indicators(
            &estimate,
            &traj,
            w.window_id,
            prev.map(|r| (&r.estimate, &r.indicators)),
            baseline,
            &cfg.probes,
        )?;
        let energy = energy::energy_features(w, cfg.band())?;
        out.push(WindowRecord {
            stream,
            label: labels.get(i).copied().unwrap_or(false),
            estimate,
            indicators,
            energy,
        });
    }
    Ok(out)
}

pub fn analyze_stream(
    cfg: &ExperimentConfig,
    stream: &LabeledStream,
    index: usize,
    baseline: &Baseline,
) -> Result<Vec<WindowRecord>> {
    analyze_windows(cfg, &stream.windows(), &stream.window_labels, index, baseline)
}

/// Free-arm ingredients of one window, read from raw coordinates after
/// only sorting the diagonal blocks by frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeWindow {
    pub raw: RawParams,
    pub loss: f64,
    pub omega: Vec<f64>,
    pub rho: Vec<f64>,
    pub increments: Vec<Vec<Option<f64>>>,
}

pub fn free_window(window: &Window, config: &EstimatorConfig, prev_omega: Option<&[f64]>) -> Result<FreeWindow> {
    let raw = estimator::estimate_window_free(window, config)?;
    let modes = estimator::raw_block_modes(&raw.a);
    let mut order: Vec<usize> = (0..modes.len()).collect();
    order.sort_by(|&i, &j| modes[i].omega.total_cmp(&modes[j].omega));
    let n = raw.a.nrows();
    let mut perm = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        perm[(2 * dst, 2 * src)] = 1.0;
        perm[(2 * dst + 1, 2 * src + 1)] = 1.0;
    }
    let raw = raw.conjugate(&perm)?;
    let omega: Vec<f64> = order.iter().map(|&i| modes[i].omega).collect();
    let rho: Vec<f64> = order.iter().map(|&i| modes[i].rho).collect();
    let sigma = model::stationary_covariance_of(&raw.a, &raw.q, None)?;
    let traj = kalman::smooth_system(&raw.system(), &sigma, window)?;
    let resid = (&window.samples - &traj.fitted_obs).norm_squared() / window.len() as f64;
    let prev = prev_omega.filter(|p| p.len() == omega.len());
    let loss = resid + config.lambda * estimator::penalty(&omega, &rho, prev);
    Ok(FreeWindow {
        increments: kalman::phase_increments(&traj),
        raw,
        loss,
        omega,
        rho,
    })
}

pub fn free_stream(windows: &[Window], config: &EstimatorConfig) -> Result<Vec<FreeWindow>> {
    let mut out: Vec<FreeWindow> = Vec::with_capacity(windows.len());
    for w in windows {
        let f = free_window(w, config, out.last().map(|p| p.omega.as_slice()))?;
        out.push(f);
    }
    Ok(out)
}

pub fn free_indicators(fits: &[FreeWindow], baseline: &Baseline, cfg: &ProbeConfig) -> Result<Vec<IndicatorVector>> {
    let mut out: Vec<IndicatorVector> = Vec::with_capacity(fits.len());
    for (i, f) in fits.iter().enumerate() {
        let prev = (i > 0).then(|| (fits[i - 1].omega.as_slice(), &out[i - 1]));
        let v = probes::indicators_from_parts(i, f.loss, &f.omega, &f.rho, &f.increments, prev, baseline, cfg)?;
        out.push(v);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub measured: f64,
    pub requirement: String,
    pub passed: bool,
}

impl Assertion {
    fn new(name: &str, measured: f64, requirement: &str, passed: bool) -> Self {
        Self {
            name: name.to_string(),
            measured,
            requirement: requirement.to_string(),
            passed: passed && !measured.is_nan(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub metrics: BTreeMap<String, f64>,
    pub detection: BTreeMap<String, DetectionReport>,
    pub assertions: Vec<Assertion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub assertions: Vec<Assertion>,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub output_dir: PathBuf,
    pub outputs: Vec<String>,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.report.assertions.iter().all(|a| a.passed)
    }
}

/// Collects output files and writes the report and manifest at the end.
pub struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Outputs<'a> {
    pub fn new(dir: &'a Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub fn csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        table.write(&self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        io::write_json(&self.dir.join(name), value)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn svg(&mut self, name: &str, panels: &[Panel]) -> Result<()> {
        std::fs::write(self.dir.join(name), plot::render(panels))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn finish(mut self, cfg: &ExperimentConfig, report: ExperimentReport) -> Result<ExperimentOutcome> {
        self.files.push("report.json".into());
        self.files.push("manifest.json".into());
        io::write_json(&self.dir.join("report.json"), &report)?;
        let manifest = Manifest {
            experiment: report.experiment.clone(),
            version: VERSION.to_string(),
            seed: cfg.seed,
            config: cfg.clone(),
            assertions: report.assertions.clone(),
            outputs: self.files.clone(),
        };
        io::write_json(&self.dir.join("manifest.json"), &manifest)?;
        Ok(ExperimentOutcome {
            report,
            output_dir: self.dir.to_path_buf(),
            outputs: self.files,
        })
    }
}

pub fn run_experiment(name: ExperimentName, cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    match name {
        ExperimentName::Motivation => run_motivation(cfg, out),
        ExperimentName::Geometry => run_geometry(cfg, out),
        ExperimentName::Ablation => run_ablation(cfg, out),
        ExperimentName::Efficiency => run_efficiency(cfg, out),
        ExperimentName::Stress => run_stress(cfg, out),
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn split_by_label<F: Fn(&WindowRecord) -> f64>(records: &[WindowRecord], f: F) -> (Vec<f64>, Vec<f64>) {
    let mut pre = Vec::new();
    let mut post = Vec::new();
    for r in records {
        if r.label {
            post.push(f(r));
        } else {
            pre.push(f(r));
        }
    }
    (pre, post)
}

pub(crate) fn both_classes(labels: &[bool]) -> bool {
    labels.iter().any(|l| *l) && labels.iter().any(|l| !*l)
}

fn detection<F: Fn(&WindowRecord) -> f64>(records: &[WindowRecord], f: F) -> Result<Option<DetectionReport>> {
    let labels: Vec<bool> = records.iter().map(|r| r.label).collect();
    if !both_classes(&labels) {
        return Ok(None);
    }
    detector::evaluate(records.iter().map(f).collect(), labels).map(Some)
}

fn indicator_row(r: &WindowRecord) -> Vec<String> {
    let v = &r.indicators;
    let mut row = vec![r.stream.to_string(), v.window_id.to_string(), (r.label as u8).to_string()];
    row.push(fmt_f64(r.energy.rms));
    row.extend(v.as_array().iter().map(|x| fmt_f64(*x)));
    row.push(v.pcc_reliable.to_string());
    row
}

const INDICATOR_HEADER: [&str; 11] = [
    "stream", "window_id", "label", "rms", "gsi", "pcc", "ddi", "fwr", "mll", "lqf", "pcc_reliable",
];

pub(crate) fn series_panel(title: &str, records: &[WindowRecord], onset_window: f64, f: impl Fn(&WindowRecord) -> f64) -> Panel {
    Panel::new(title)
        .with(Series::line(
            title,
            records.iter().map(|r| (r.indicators.window_id as f64, f(r))).collect(),
        ))
        .marker(onset_window)
}

/// One stream with phase jitter: energy stays flat while the geometric
/// indicators move at the onset.
pub fn run_motivation(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    let mut files = Outputs::new(out)?;
    let (baseline, _) = calibrate(cfg)?;
    let stream = cfg.degraded_stream(0, false)?;
    let records = analyze_stream(cfg, &stream, 0, &baseline)?;

    let mut table = CsvTable::new(&INDICATOR_HEADER);
    records.iter().for_each(|r| table.push(indicator_row(r)));
    files.csv("results.csv", &table)?;
    files.csv("signal.csv", &io::series_csv(&stream.observations.transpose(), "x"))?;

    let mut report = ExperimentReport {
        experiment: "motivation".into(),
        ..Default::default()
    };
    report.metrics.insert("mu0".into(), baseline.mu0);
    report.metrics.insert("sigma0".into(), baseline.sigma0);
    let (gsi_pre, gsi_post) = split_by_label(&records, |r| r.indicators.gsi);
    let (rms_pre, rms_post) = split_by_label(&records, |r| r.energy.rms);
    let (pcc_pre, pcc_post) = split_by_label(&records, |r| r.indicators.pcc);
    if !gsi_pre.is_empty() && !gsi_post.is_empty() {
        let gsi_gap = mean(&gsi_post) - mean(&gsi_pre);
        let rms_std = sample_std(&rms_pre);
        let rms_gap = (mean(&rms_post) - mean(&rms_pre)).abs() / rms_std;
        report.metrics.insert("gsi_post_minus_pre".into(), gsi_gap);
        report.metrics.insert("rms_gap_in_healthy_std".into(), rms_gap);
        report.metrics.insert("pcc_pre_mean".into(), mean(&pcc_pre));
        report.metrics.insert("pcc_post_mean".into(), mean(&pcc_post));
        report.assertions.push(Assertion::new(
            "gsi_increase_in_sigma0",
            gsi_gap,
            "post-onset mean GSI − healthy mean GSI ≥ 3",
            gsi_gap >= 3.0,
        ));
        report.assertions.push(Assertion::new(
            "rms_gap_in_healthy_std",
            rms_gap,
            "|post − pre| mean RMS < 1 healthy RMS std",
            rms_gap < 1.0,
        ));
    }
    for (name, f) in [
        ("gsi", (|r: &WindowRecord| r.indicators.gsi) as fn(&WindowRecord) -> f64),
        ("pcc", |r| r.indicators.pcc),
        ("rms", |r| r.energy.rms),
    ] {
        if let Some(d) = detection(&records, f)? {
            report.metrics.insert(format!("auroc_{name}"), d.auroc);
            report.detection.insert(name.into(), d);
        }
    }

    let onset_w = (cfg.onset_sample() / cfg.window_len) as f64;
    let step = (stream.len() / 2048).max(1);
    let signal: Vec<(f64, f64)> = (0..stream.len())
        .step_by(step)
        .map(|t| (t as f64 / cfg.window_len as f64, stream.observations[(t, 0)]))
        .collect();
    files.svg(
        "motivation.svg",
        &[
            Panel::new("signal (x_1)").with(Series::line("x_1", signal)).marker(onset_w),
            series_panel("RMS", &records, onset_w, |r| r.energy.rms),
            series_panel("GSI", &records, onset_w, |r| r.indicators.gsi),
            series_panel("PCC", &records, onset_w, |r| r.indicators.pcc),
        ],
    )?;
    files.finish(cfg, report)
}

#[derive(Clone, Copy, Debug, Default)]
struct CloudStats {
    radius_sum: f64,
    points: usize,
    sin: f64,
    cos: f64,
    increments: usize,
}

impl CloudStats {
    fn add(&mut self, pts: &[(f64, f64)]) {
        self.radius_sum += pts.iter().map(|(a, b)| a.hypot(*b)).sum::<f64>();
        self.points += pts.len();
        for d in lab::portrait_increments(pts) {
            self.sin += d.sin();
            self.cos += d.cos();
            self.increments += 1;
        }
    }

    fn radius(&self) -> f64 {
        self.radius_sum / self.points as f64
    }

    fn circular_std(&self) -> f64 {
        let r = self.sin.hypot(self.cos) / self.increments as f64;
        (-2.0 * r.min(1.0).ln()).sqrt()
    }
}

/// Latent portraits before and after a phase-jitter onset.
pub fn run_geometry(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    let mut files = Outputs::new(out)?;
    let mode = cfg.mode_index;
    let mut table = CsvTable::new(&["seed", "view", "segment", "mean_radius", "increment_circular_std", "points"]);
    let mut pooled = [[CloudStats::default(); 2]; 2];
    let mut first_clouds: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for s in 0..cfg.n_seeds {
        let stream = cfg.degraded_stream(s, false)?;
        let onset = stream.scenario.onset_sample;
        if onset == 0 || onset >= stream.len() {
            return Err(Error::Config("geometry needs an onset strictly inside the stream".into()));
        }
        let segments = [0..onset, onset..stream.len()];
        for (v, view) in ["fitted", "oracle"].into_iter().enumerate() {
            for (g, seg) in segments.iter().enumerate() {
                let pts = if v == 0 {
                    lab::fitted_portrait(&stream, mode, seg.clone(), &cfg.estimator)?
                } else {
                    lab::latent_portrait(&stream, mode, seg.clone())?
                };
                let mut st = CloudStats::default();
                st.add(&pts);
                pooled[v][g].add(&pts);
                table.push(vec![
                    s.to_string(),
                    view.into(),
                    ["pre", "post"][g].into(),
                    fmt_f64(st.radius()),
                    fmt_f64(st.circular_std()),
                    pts.len().to_string(),
                ]);
                if s == 0 && v == 0 {
                    let keep = 1024.min(pts.len());
                    let part = if g == 0 { &pts[pts.len() - keep..] } else { &pts[..keep] };
                    first_clouds.push((["pre-onset", "post-onset"][g].into(), part.to_vec()));
                }
            }
        }
    }
    files.csv("results.csv", &table)?;
    let mut cloud = CsvTable::new(&["segment", "z1", "z2"]);
    for (name, pts) in &first_clouds {
        for (a, b) in pts {
            cloud.push(vec![name.clone(), fmt_f64(*a), fmt_f64(*b)]);
        }
    }
    files.csv("portrait.csv", &cloud)?;

    let mut report = ExperimentReport {
        experiment: "geometry".into(),
        ..Default::default()
    };
    for (v, view) in ["fitted", "oracle"].into_iter().enumerate() {
        let [pre, post] = pooled[v];
        let rdiff = (post.radius() - pre.radius()).abs() / pre.radius();
        let ratio = post.circular_std() / pre.circular_std();
        report.metrics.insert(format!("{view}_radius_pre"), pre.radius());
        report.metrics.insert(format!("{view}_radius_post"), post.radius());
        report.metrics.insert(format!("{view}_radius_rel_diff"), rdiff);
        report.metrics.insert(format!("{view}_increment_std_pre"), pre.circular_std());
        report.metrics.insert(format!("{view}_increment_std_post"), post.circular_std());
        report.metrics.insert(format!("{view}_increment_std_ratio"), ratio);
        if v == 0 {
            report.assertions.push(Assertion::new(
                "radius_rel_diff",
                rdiff,
                "relative mean-radius difference < 0.05",
                rdiff < 0.05,
            ));
            report.assertions.push(Assertion::new(
                "increment_std_ratio",
                ratio,
                "post/pre angular-increment std ratio > 3",
                ratio > 3.0,
            ));
        }
    }
    let mut panel = Panel::new(&format!("mode {mode} latent portrait (seed 0)"));
    panel.equal_aspect = true;
    for (name, pts) in first_clouds {
        panel = panel.with(Series::points(&name, pts));
    }
    files.svg("geometry.svg", &[panel])?;
    files.finish(cfg, report)
}

/// Column z-scoring fitted on a training matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for c in x.column_iter() {
            let v: Vec<f64> = c.iter().cloned().collect();
            let m = mean_of(&v);
            let sd = sample_std(&v);
            mean.push(m);
            scale.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
        }
        Self { mean, scale }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mean[j]) / self.scale[j])
    }
}

fn mean_of(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        mean(v)
    }
}

pub(crate) fn rows_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let d = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])
}

/// Fit a probe on z-scored training features.
pub fn fit_standardized_probe(train: &[Vec<f64>], labels: &[bool]) -> Result<(Standardizer, LinearProbe)> {
    let std = Standardizer::fit(&rows_matrix(train));
    let pick = |want: bool| -> Vec<Vec<f64>> {
        train
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == want)
            .map(|(r, _)| r.clone())
            .collect()
    };
    let healthy = std.apply(&rows_matrix(&pick(false)));
    let degraded = std.apply(&rows_matrix(&pick(true)));
    let probe = detector::fit_probe(&healthy, &degraded, None)?;
    Ok((std, probe))
}

/// Fit a probe on standardized training features and return its held-out
/// AUROC.
pub fn probe_auroc(
    train: &[Vec<f64>],
    train_labels: &[bool],
    test: &[Vec<f64>],
    test_labels: &[bool],
) -> Result<DetectionReport> {
    let (std, probe) = fit_standardized_probe(train, train_labels)?;
    let scores = probe.score_rows(&std.apply(&rows_matrix(test)))?;
    detector::evaluate(scores, test_labels.to_vec())
}

fn arm_auroc(
    features: &[Vec<f64>],
    labels: &[bool],
    streams: &[usize],
    n_train_streams: usize,
) -> Result<Option<DetectionReport>> {
    let (mut tr, mut trl, mut te, mut tel) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for ((f, l), s) in features.iter().zip(labels).zip(streams) {
        if *s < n_train_streams {
            tr.push(f.clone());
            trl.push(*l);
        }
        if *s >= n_train_streams || n_train_streams == 0 {
            te.push(f.clone());
            tel.push(*l);
        }
    }
    if !both_classes(&trl) || !both_classes(&tel) {
        return Ok(None);
    }
    probe_auroc(&tr, &trl, &te, &tel).map(Some)
}

/// Streams are split by index: the first half trains probes, the rest is
/// held out. A single stream is used for both.
pub(crate) fn train_streams(n_seeds: usize) -> usize {
    if n_seeds >= 2 {
        n_seeds / 2
    } else {
        0
    }
}

fn held_out(streams: usize, s: usize) -> bool {
    s >= streams
}

/// Restarts of the free arm; its 31-coordinate objective dominates the
/// ablation's runtime.
const FREE_ARM_RESTARTS: usize = 1;

/// Canonical versus uncanonicalized indicators versus RMS on identical
/// streams. Both indicator arms are scored against the canonical healthy
/// baseline, so GSI and DDI differ between arms only through the fitted
/// quantities.
pub fn run_ablation(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    let mut files = Outputs::new(out)?;
    let (can_base, _) = calibrate(cfg)?;
    let free_cfg = EstimatorConfig {
        n_restarts: FREE_ARM_RESTARTS,
        ..cfg.estimator.clone()
    };

    let n_train = train_streams(cfg.n_seeds);
    let mut table = CsvTable::new(&[
        "stream", "window_id", "label", "rms", "canonical_gsi", "canonical_pcc", "free_gsi", "free_pcc",
    ]);
    let (mut can_feat, mut free_feat, mut labels, mut stream_ids) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut rms_records: Vec<(usize, bool, f64)> = Vec::new();
    let push_rows = |name: &str, recs: &[WindowRecord], free: &[IndicatorVector], table: &mut CsvTable| {
        for (r, f) in recs.iter().zip(free) {
            table.push(vec![
                name.to_string(),
                r.indicators.window_id.to_string(),
                (r.label as u8).to_string(),
                fmt_f64(r.energy.rms),
                fmt_f64(r.indicators.gsi),
                fmt_f64(r.indicators.pcc),
                fmt_f64(f.gsi),
                fmt_f64(f.pcc),
            ]);
        }
    };
    for s in 0..cfg.n_seeds {
        let stream = cfg.degraded_stream(s, false)?;
        let windows = stream.windows();
        let recs = analyze_windows(cfg, &windows, &stream.window_labels, s, &can_base)?;
        let free = free_indicators(&free_stream(&windows, &free_cfg)?, &can_base, &cfg.probes)?;
        push_rows(&s.to_string(), &recs, &free, &mut table);
        for (r, f) in recs.iter().zip(&free) {
            can_feat.push(r.indicators.as_array().to_vec());
            free_feat.push(f.as_array().to_vec());
            labels.push(r.label);
            stream_ids.push(s);
            rms_records.push((s, r.label, r.energy.rms));
        }
    }

    let stationary = cfg.healthy_stream(cfg.total_samples, rng::mix(cfg.seed, STATIONARY_INDEX))?;
    let st_windows = stationary.windows();
    let st_recs = analyze_windows(cfg, &st_windows, &[], usize::MAX, &can_base)?;
    let st_free = free_indicators(&free_stream(&st_windows, &free_cfg)?, &can_base, &cfg.probes)?;
    push_rows("stationary", &st_recs, &st_free, &mut table);
    files.csv("results.csv", &table)?;

    let mut report = ExperimentReport {
        experiment: "ablation".into(),
        ..Default::default()
    };
    let tv = |v: Vec<f64>| probes::total_variation(&v);
    let tv_can_gsi = tv(st_recs.iter().map(|r| r.indicators.gsi).collect());
    let tv_can_pcc = tv(st_recs.iter().map(|r| r.indicators.pcc).collect());
    let tv_free_gsi = tv(st_free.iter().map(|v| v.gsi).collect());
    let tv_free_pcc = tv(st_free.iter().map(|v| v.pcc).collect());
    for (k, v) in [
        ("tv_canonical_gsi", tv_can_gsi),
        ("tv_canonical_pcc", tv_can_pcc),
        ("tv_free_gsi", tv_free_gsi),
        ("tv_free_pcc", tv_free_pcc),
    ] {
        report.metrics.insert(k.into(), v);
    }

    let can = arm_auroc(&can_feat, &labels, &stream_ids, n_train)?;
    let free = arm_auroc(&free_feat, &labels, &stream_ids, n_train)?;
    let test_rms: Vec<&(usize, bool, f64)> = rms_records
        .iter()
        .filter(|(s, _, _)| n_train == 0 || held_out(n_train, *s))
        .collect();
    let rms_labels: Vec<bool> = test_rms.iter().map(|r| r.1).collect();
    let rms = if both_classes(&rms_labels) {
        Some(detector::evaluate(test_rms.iter().map(|r| r.2).collect(), rms_labels)?)
    } else {
        None
    };
    if let (Some(can), Some(free), Some(rms)) = (can, free, rms) {
        report.metrics.insert("auroc_canonical".into(), can.auroc);
        report.metrics.insert("auroc_free".into(), free.auroc);
        report.metrics.insert("auroc_rms".into(), rms.auroc);
        report.assertions.push(Assertion::new("auroc_canonical", can.auroc, "≥ 0.9", can.auroc >= 0.9));
        report.assertions.push(Assertion::new("auroc_free", free.auroc, "≥ 0.9", free.auroc >= 0.9));
        report.assertions.push(Assertion::new(
            "auroc_rms",
            rms.auroc,
            "in [0.4, 0.6]",
            (0.4..=0.6).contains(&rms.auroc),
        ));
        report.detection.insert("canonical".into(), can);
        report.detection.insert("free".into(), free);
        report.detection.insert("rms".into(), rms);
    }
    report.assertions.push(Assertion::new(
        "tv_ratio_gsi",
        tv_can_gsi / tv_free_gsi,
        "TV(canonical GSI) ≤ 0.5 · TV(free GSI)",
        tv_can_gsi <= 0.5 * tv_free_gsi,
    ));
    report.assertions.push(Assertion::new(
        "tv_ratio_pcc",
        tv_can_pcc / tv_free_pcc,
        "TV(canonical PCC) ≤ 0.5 · TV(free PCC)",
        tv_can_pcc <= 0.5 * tv_free_pcc,
    ));

    let idx = |v: &[f64]| v.iter().enumerate().map(|(i, x)| (i as f64, *x)).collect::<Vec<_>>();
    let gsi_c: Vec<f64> = st_recs.iter().map(|r| r.indicators.gsi).collect();
    let gsi_f: Vec<f64> = st_free.iter().map(|v| v.gsi).collect();
    let pcc_c: Vec<f64> = st_recs.iter().map(|r| r.indicators.pcc).collect();
    let pcc_f: Vec<f64> = st_free.iter().map(|v| v.pcc).collect();
    files.svg(
        "ablation.svg",
        &[
            Panel::new("GSI on a stationary healthy stream")
                .with(Series::line("canonical", idx(&gsi_c)))
                .with(Series::line("free", idx(&gsi_f))),
            Panel::new("PCC on a stationary healthy stream")
                .with(Series::line("canonical", idx(&pcc_c)))
                .with(Series::line("free", idx(&pcc_f))),
        ],
    )?;
    files.finish(cfg, report)
}

/// Held-out AUROC of probes fitted on small labeled subsets, indicators
/// versus energy features.
pub fn run_efficiency(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    let mut files = Outputs::new(out)?;
    let (baseline, _) = calibrate(cfg)?;
    let mut records = Vec::new();
    for s in 0..cfg.n_seeds {
        let stream = cfg.degraded_stream(s, false)?;
        records.extend(analyze_stream(cfg, &stream, s, &baseline)?);
    }
    let n_train = train_streams(cfg.n_seeds);
    let (train, test): (Vec<&WindowRecord>, Vec<&WindowRecord>) = if n_train == 0 {
        (records.iter().collect(), records.iter().collect())
    } else {
        records.iter().partition(|r| r.stream < n_train)
    };
    let pool_h: Vec<&WindowRecord> = train.iter().copied().filter(|r| !r.label).collect();
    let pool_d: Vec<&WindowRecord> = train.iter().copied().filter(|r| r.label).collect();
    let test_labels: Vec<bool> = test.iter().map(|r| r.label).collect();
    if !both_classes(&test_labels) || pool_h.len() < 2 || pool_d.len() < 2 {
        return Err(Error::Config("efficiency needs both classes in the training and test pools".into()));
    }
    let ind = |r: &WindowRecord| r.indicators.as_array().to_vec();
    let en = |r: &WindowRecord| r.energy.as_array().to_vec();
    let test_ind: Vec<Vec<f64>> = test.iter().map(|r| ind(r)).collect();
    let test_en: Vec<Vec<f64>> = test.iter().map(|r| en(r)).collect();

    let mut table = CsvTable::new(&[
        "budget", "indicator_auroc_mean", "indicator_auroc_std", "energy_auroc_mean", "energy_auroc_std",
    ]);
    let mut curves: Vec<(usize, f64, f64)> = Vec::new();
    for &budget in &cfg.budgets {
        let n_d = budget.div_ceil(2);
        let n_h = budget - n_d;
        if n_d > pool_d.len() || n_h > pool_h.len() {
            return Err(Error::Config(format!(
                "budget {budget} exceeds the training pool ({} healthy, {} degraded)",
                pool_h.len(),
                pool_d.len()
            )));
        }
        let (mut a_ind, mut a_en) = (Vec::new(), Vec::new());
        for rep in 0..cfg.n_seeds {
            let mut r = rng::stream(rng::mix(cfg.seed, ((budget as u64) << 20) | rep as u64), streams::SUBSAMPLE);
            let hs = index::sample(&mut r, pool_h.len(), n_h);
            let ds = index::sample(&mut r, pool_d.len(), n_d);
            let chosen: Vec<&WindowRecord> = hs.iter().map(|i| pool_h[i]).chain(ds.iter().map(|i| pool_d[i])).collect();
            let labels: Vec<bool> = chosen.iter().map(|r| r.label).collect();
            let xi: Vec<Vec<f64>> = chosen.iter().map(|r| ind(r)).collect();
            let xe: Vec<Vec<f64>> = chosen.iter().map(|r| en(r)).collect();
            a_ind.push(probe_auroc(&xi, &labels, &test_ind, &test_labels)?.auroc);
            a_en.push(probe_auroc(&xe, &labels, &test_en, &test_labels)?.auroc);
        }
        let (mi, me) = (mean(&a_ind), mean(&a_en));
        table.push(vec![
            budget.to_string(),
            fmt_f64(mi),
            fmt_f64(sample_std(&a_ind)),
            fmt_f64(me),
            fmt_f64(sample_std(&a_en)),
        ]);
        curves.push((budget, mi, me));
    }
    files.csv("results.csv", &table)?;

    let mut report = ExperimentReport {
        experiment: "efficiency".into(),
        ..Default::default()
    };
    let &(max_budget, _, energy_ref) = curves
        .iter()
        .max_by_key(|c| c.0)
        .ok_or_else(|| Error::Config("no label budgets".into()))?;
    let reach = curves
        .iter()
        .filter(|c| c.1 >= energy_ref)
        .map(|c| c.0)
        .min();
    let ratio = reach.map_or(0.0, |b| max_budget as f64 / b as f64);
    report.metrics.insert("energy_reference_auroc".into(), energy_ref);
    report.metrics.insert("label_efficiency_ratio".into(), ratio);
    report.metrics.insert("reference_ratio".into(), 16.0);
    report.assertions.push(Assertion::new(
        "label_efficiency_ratio",
        ratio,
        "≥ 4 (reference value 16)",
        ratio >= 4.0,
    ));
    let worst_gap = curves
        .iter()
        .filter(|c| c.0 >= 20)
        .map(|c| c.1 - c.2)
        .fold(f64::INFINITY, f64::min);
    report.assertions.push(Assertion::new(
        "indicator_dominates_energy",
        worst_gap,
        "indicator − energy mean AUROC ≥ 0 at every budget ≥ 20",
        worst_gap >= 0.0,
    ));
    let xs = |f: fn(&(usize, f64, f64)) -> f64| curves.iter().map(|c| ((c.0 as f64).log2(), f(c))).collect::<Vec<_>>();
    files.svg(
        "efficiency.svg",
        &[Panel::new("held-out AUROC vs log2(labels)")
            .with(Series::line("indicators", xs(|c| c.1)))
            .with(Series::line("energy", xs(|c| c.2)))],
    )?;
    files.finish(cfg, report)
}

/// Phase jitter under amplitude-shock nuisance.
pub fn run_stress(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    let mut files = Outputs::new(out)?;
    let (baseline, _) = calibrate(cfg)?;
    let mut records = Vec::new();
    for s in 0..cfg.n_seeds {
        let stream = cfg.degraded_stream(s, true)?;
        records.extend(analyze_stream(cfg, &stream, s, &baseline)?);
    }
    let mut table = CsvTable::new(&INDICATOR_HEADER);
    records.iter().for_each(|r| table.push(indicator_row(r)));
    files.csv("results.csv", &table)?;

    let mut report = ExperimentReport {
        experiment: "stress".into(),
        ..Default::default()
    };
    let pcc = detection(&records, |r| r.indicators.pcc)?;
    let rms = detection(&records, |r| r.energy.rms)?;
    if let (Some(pcc), Some(rms)) = (pcc, rms) {
        report.metrics.insert("auroc_pcc".into(), pcc.auroc);
        report.metrics.insert("auroc_rms".into(), rms.auroc);
        report.assertions.push(Assertion::new("auroc_pcc", pcc.auroc, "≥ 0.95", pcc.auroc >= 0.95));
        report.assertions.push(Assertion::new(
            "auroc_rms",
            rms.auroc,
            "in [0.4, 0.65]",
            (0.4..=0.65).contains(&rms.auroc),
        ));
        report.detection.insert("pcc".into(), pcc);
        report.detection.insert("rms".into(), rms);
    }
    let first: Vec<WindowRecord> = records.iter().filter(|r| r.stream == 0).cloned().collect();
    let onset_w = (cfg.onset_sample() / cfg.window_len) as f64;
    files.svg(
        "stress.svg",
        &[
            series_panel("RMS", &first, onset_w, |r| r.energy.rms),
            series_panel("PCC", &first, onset_w, |r| r.indicators.pcc),
        ],
    )?;
    files.finish(cfg, report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterResponse {
    pub rms: ResponseSlope,
    pub pcc: ResponseSlope,
    pub gsi: ResponseSlope,
}

/// Per-window RMS, PCC and GSI under phase jitter of strength `h`, one row
/// per strength. Each `(h, seed)` cell is one fully jittered window estimated
/// on its own; seeds are shared across strengths.
#[derive(Clone, Debug, PartialEq)]
pub struct JitterSamples {
    pub rms: Vec<Vec<f64>>,
    pub pcc: Vec<Vec<f64>>,
    pub gsi: Vec<Vec<f64>>,
}

pub fn jitter_samples(cfg: &ExperimentConfig, strengths: &[f64], n_seeds: usize) -> Result<JitterSamples> {
    let params = cfg.base_params()?;
    let (baseline, _) = calibrate(cfg)?;
    let mut out = JitterSamples {
        rms: Vec::with_capacity(strengths.len()),
        pcc: Vec::with_capacity(strengths.len()),
        gsi: Vec::with_capacity(strengths.len()),
    };
    for &h in strengths {
        let (mut r_row, mut p_row, mut g_row) = (Vec::new(), Vec::new(), Vec::new());
        for s in 0..n_seeds {
            let scenario = DegradationScenario::new(DegradationKind::PhaseJitter, 0, h, params.clone());
            let stream = lab::generate(&scenario, 2 * cfg.window_len, cfg.window_len, cfg.stream_seed(s))?;
            let window = &stream.windows()[1];
            let est = estimator::estimate_window(window, &cfg.estimator, None)?;
            let ind = probes::window_indicators(&est, window, &baseline, &cfg.probes)?;
            r_row.push(energy::energy_features(window, cfg.band())?.rms);
            p_row.push(ind.pcc);
            g_row.push(ind.gsi);
        }
        out.rms.push(r_row);
        out.pcc.push(p_row);
        out.gsi.push(g_row);
    }
    Ok(out)
}

/// First-order response of RMS, PCC and GSI to phase jitter.
pub fn jitter_response(cfg: &ExperimentConfig, strengths: &[f64], n_seeds: usize) -> Result<JitterResponse> {
    let samples = jitter_samples(cfg, strengths, n_seeds)?;
    let boot = rng::mix(cfg.seed, streams::BOOTSTRAP);
    Ok(JitterResponse {
        rms: detector::response_slope(&samples.rms, strengths, boot)?,
        pcc: detector::response_slope(&samples.pcc, strengths, boot)?,
        gsi: detector::response_slope(&samples.gsi, strengths, boot)?,
    })
}
