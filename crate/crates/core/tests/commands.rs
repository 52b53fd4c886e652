use goosc::commands;
use goosc::harness::ExperimentConfig;

fn small() -> ExperimentConfig {
    ExperimentConfig::from_toml_str("n_seeds = 2\nwindow_len = 256\ntotal_samples = 4096\ncalibration_windows = 4\nbudgets = [4, 8]\n").unwrap()
}

#[test]
fn indicators_from_files_match_the_in_memory_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    let d = |s: &str| dir.path().join(s);
    commands::run_simulate(&cfg, false, &d("sim")).unwrap();
    commands::run_calibrate(&cfg, &d("cal")).unwrap();
    commands::run_indicators(&cfg, Some(&d("sim/signal.csv")), Some(&d("cal/baseline.json")), &d("from_files")).unwrap();
    commands::run_indicators(&cfg, None, None, &d("direct")).unwrap();
    let a = std::fs::read_to_string(d("from_files/results.csv")).unwrap();
    let b = std::fs::read_to_string(d("direct/results.csv")).unwrap();
    assert!(a.starts_with("window_id,gsi,pcc,ddi,fwr,mll,lqf,pcc_reliable\n"));
    assert_eq!(a.lines().count(), 1 + 4096 / 256);
    assert_eq!(a, b);
}

#[test]
fn detect_reports_probe_and_baseline_aurocs() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = commands::run_detect(&small(), false, dir.path()).unwrap();
    for k in ["auroc_probe", "auroc_pcc", "auroc_rms"] {
        let v = outcome.report.metrics[k];
        assert!((0.0..=1.0).contains(&v), "{k} = {v}");
    }
    assert!(dir.path().join("probe.json").exists());
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["window_len"], 256);
}

#[test]
fn malformed_signal_is_a_config_or_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,x_1\n0,abc\n").unwrap();
    let err = commands::run_indicators(&small(), Some(&bad), None, &dir.path().join("o")).unwrap_err();
    assert!(matches!(err, goosc::Error::Config(_) | goosc::Error::Io(_) | goosc::Error::InvalidParameter(_)), "{err:?}");
}
