//! The non-experiment commands of the command-line driver. Each writes
//! `results.csv`, `report.json`, `manifest.json` and one SVG into its
//! output directory.

use std::path::Path;

use serde::Serialize;

use crate::energy;
use crate::error::{Error, Result};
use crate::harness::{self, ExperimentConfig, ExperimentOutcome, ExperimentReport, Outputs, Standardizer};
use crate::io::{self, fmt_f64, CsvTable};
use crate::model;
use crate::detector::{self, LinearProbe};
use crate::plot::{Panel, Series};
use crate::probes::{self, Baseline, INDICATOR_NAMES};

fn report(name: &str) -> ExperimentReport {
    ExperimentReport {
        experiment: name.into(),
        ..Default::default()
    }
}

/// Simulate the configured degradation scenario on stream 0.
pub fn run_simulate(cfg: &ExperimentConfig, nuisance: bool, out: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let stream = cfg.degraded_stream(0, nuisance)?;
    let mut files = Outputs::new(out)?;
    let mut table = CsvTable::new(&["window_id", "start", "label", "rms"]);
    let mut rms = Vec::new();
    for (w, label) in stream.windows().iter().zip(&stream.window_labels) {
        let r = energy::energy_features(w, cfg.band())?.rms;
        rms.push((w.window_id as f64, r));
        table.push(vec![
            w.window_id.to_string(),
            w.start_index.to_string(),
            (*label as u8).to_string(),
            fmt_f64(r),
        ]);
    }
    files.csv("results.csv", &table)?;
    files.csv("signal.csv", &io::series_csv(&stream.observations.transpose(), "x"))?;

    let mut rep = report("simulate");
    rep.metrics.insert("samples".into(), stream.len() as f64);
    rep.metrics.insert("windows".into(), stream.window_labels.len() as f64);
    rep.metrics.insert("onset_sample".into(), stream.scenario.onset_sample as f64);
    rep.metrics.insert("clipped".into(), stream.clipped as u8 as f64);
    let onset_w = (stream.scenario.onset_sample / cfg.window_len) as f64;
    let step = (stream.len() / 2048).max(1);
    let signal: Vec<(f64, f64)> = (0..stream.len())
        .step_by(step)
        .map(|t| (t as f64 / cfg.window_len as f64, stream.observations[(t, 0)]))
        .collect();
    files.svg(
        "signal.svg",
        &[
            Panel::new("signal (x_1)").with(Series::line("x_1", signal)).marker(onset_w),
            Panel::new("RMS").with(Series::line("RMS", rms)).marker(onset_w),
        ],
    )?;
    files.finish(cfg, rep)
}

/// Calibrate the healthy baseline and write it to `baseline.json`.
pub fn run_calibrate(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let (baseline, estimates) = harness::calibrate(cfg)?;
    let mut files = Outputs::new(out)?;
    let k = cfg.estimator.k;
    let mut header = vec!["window_id".to_string(), "loss".into(), "loglik".into(), "damping".into()];
    header.extend((1..=k).map(|i| format!("omega_{i}")));
    header.extend((1..=k).map(|i| format!("rho_{i}")));
    header.push("converged".into());
    let mut table = CsvTable::new(&header);
    for (i, e) in estimates.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            fmt_f64(e.loss),
            fmt_f64(e.loglik),
            fmt_f64(probes::damping_factor(&e.params, cfg.probes.damping)),
        ];
        row.extend(e.params.omegas().iter().chain(&e.params.rhos()).map(|v| fmt_f64(*v)));
        row.push(e.converged.to_string());
        table.push(row);
    }
    files.csv("results.csv", &table)?;
    files.json("baseline.json", &baseline)?;

    let mut rep = report("calibrate");
    rep.metrics.insert("mu0".into(), baseline.mu0);
    rep.metrics.insert("sigma0".into(), baseline.sigma0);
    rep.metrics.insert("D0".into(), baseline.d0);
    let losses: Vec<(f64, f64)> = estimates.iter().enumerate().map(|(i, e)| (i as f64, e.loss)).collect();
    files.svg("calibration.svg", &[Panel::new("healthy window loss").with(Series::line("loss", losses))])?;
    files.finish(cfg, rep)
}

/// Indicator series for a signal CSV (`t, x_1 .. x_p`), or for simulated
/// stream 0 when no input is given. The baseline is read from a JSON file
/// or calibrated afresh.
pub fn run_indicators(
    cfg: &ExperimentConfig,
    input: Option<&Path>,
    baseline: Option<&Path>,
    out: &Path,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let baseline: Baseline = match baseline {
        Some(p) => io::read_json(p).map_err(|e| Error::Config(format!("baseline {}: {e}", p.display())))?,
        None => harness::calibrate(cfg)?.0,
    };
    let (windows, labels) = match input {
        Some(p) => {
            let obs = io::read_series_csv(p).map_err(|e| Error::Config(format!("input {}: {e}", p.display())))?;
            let windows = model::split_windows(&obs, cfg.window_len);
            if windows.is_empty() {
                return Err(Error::Config(format!(
                    "input has {} samples, fewer than one window of {}",
                    obs.ncols(),
                    cfg.window_len
                )));
            }
            (windows, Vec::new())
        }
        None => {
            let s = cfg.degraded_stream(0, false)?;
            (s.windows(), s.window_labels.clone())
        }
    };
    let records = harness::analyze_windows(cfg, &windows, &labels, 0, &baseline)?;
    let mut files = Outputs::new(out)?;
    let series: Vec<_> = records.iter().map(|r| r.indicators).collect();
    files.csv("results.csv", &probes::indicators_csv(&series))?;

    let mut rep = report("indicators");
    for (j, name) in INDICATOR_NAMES.iter().enumerate() {
        let v: Vec<f64> = series.iter().map(|s| s.as_array()[j]).collect();
        rep.metrics.insert(format!("mean_{name}"), harness::mean(&v));
    }
    if harness::both_classes(&labels) {
        for (name, f) in [
            ("gsi", (|r: &harness::WindowRecord| r.indicators.gsi) as fn(&harness::WindowRecord) -> f64),
            ("pcc", |r| r.indicators.pcc),
        ] {
            let d = detector::evaluate(records.iter().map(f).collect(), labels.clone())?;
            rep.metrics.insert(format!("auroc_{name}"), d.auroc);
        }
    }
    let marker = (!labels.is_empty())
        .then(|| labels.iter().position(|l| *l))
        .flatten()
        .map_or(f64::NAN, |w| w as f64);
    files.svg(
        "indicators.svg",
        &[
            harness::series_panel("GSI", &records, marker, |r| r.indicators.gsi),
            harness::series_panel("PCC", &records, marker, |r| r.indicators.pcc),
        ],
    )?;
    files.finish(cfg, rep)
}

#[derive(Serialize)]
struct FittedDetector<'a> {
    features: &'a [&'a str],
    standardizer: &'a Standardizer,
    probe: &'a LinearProbe,
}

/// Fit a linear probe on the indicators of the first half of the streams
/// and score the held-out half.
pub fn run_detect(cfg: &ExperimentConfig, nuisance: bool, out: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let (baseline, _) = harness::calibrate(cfg)?;
    let mut records = Vec::new();
    for s in 0..cfg.n_seeds {
        let stream = cfg.degraded_stream(s, nuisance)?;
        records.extend(harness::analyze_stream(cfg, &stream, s, &baseline)?);
    }
    let n_train = harness::train_streams(cfg.n_seeds);
    let is_train = |s: usize| n_train == 0 || s < n_train;
    let is_test = |s: usize| n_train == 0 || s >= n_train;
    let train: Vec<Vec<f64>> = records
        .iter()
        .filter(|r| is_train(r.stream))
        .map(|r| r.indicators.as_array().to_vec())
        .collect();
    let train_labels: Vec<bool> = records.iter().filter(|r| is_train(r.stream)).map(|r| r.label).collect();
    if !harness::both_classes(&train_labels) {
        return Err(Error::Config("detect needs healthy and degraded windows; check the onset".into()));
    }
    let (std, probe) = harness::fit_standardized_probe(&train, &train_labels)?;
    let test: Vec<&harness::WindowRecord> = records.iter().filter(|r| is_test(r.stream)).collect();
    let scores = probe.score_rows(&std.apply(&harness::rows_matrix(
        &test.iter().map(|r| r.indicators.as_array().to_vec()).collect::<Vec<_>>(),
    )))?;
    let labels: Vec<bool> = test.iter().map(|r| r.label).collect();

    let mut files = Outputs::new(out)?;
    let mut table = CsvTable::new(&["stream", "window_id", "label", "score", "flagged", "pcc", "rms"]);
    for (r, sc) in test.iter().zip(&scores) {
        table.push(vec![
            r.stream.to_string(),
            r.indicators.window_id.to_string(),
            (r.label as u8).to_string(),
            fmt_f64(*sc),
            (*sc > probe.threshold).to_string(),
            fmt_f64(r.indicators.pcc),
            fmt_f64(r.energy.rms),
        ]);
    }
    files.csv("results.csv", &table)?;
    files.json(
        "probe.json",
        &FittedDetector {
            features: &INDICATOR_NAMES,
            standardizer: &std,
            probe: &probe,
        },
    )?;

    let mut rep = report("detect");
    if harness::both_classes(&labels) {
        let probe_rep = detector::evaluate(scores.clone(), labels.clone())?;
        let pcc = detector::evaluate(test.iter().map(|r| r.indicators.pcc).collect(), labels.clone())?;
        let rms = detector::evaluate(test.iter().map(|r| r.energy.rms).collect(), labels.clone())?;
        rep.metrics.insert("auroc_probe".into(), probe_rep.auroc);
        rep.metrics.insert("auroc_pcc".into(), pcc.auroc);
        rep.metrics.insert("auroc_rms".into(), rms.auroc);
        rep.detection.insert("probe".into(), probe_rep);
        rep.detection.insert("pcc".into(), pcc);
        rep.detection.insert("rms".into(), rms);
    }
    let pts = |want: bool| -> Vec<(f64, f64)> {
        test.iter()
            .zip(&scores)
            .filter(|(r, _)| r.label == want)
            .map(|(r, s)| (r.energy.rms, *s))
            .collect()
    };
    files.svg(
        "detect.svg",
        &[Panel::new("probe score vs RMS (held-out windows)")
            .with(Series::points("healthy", pts(false)))
            .with(Series::points("degraded", pts(true)))],
    )?;
    files.finish(cfg, rep)
}
