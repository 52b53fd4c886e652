use std::path::Path;
use std::process::Command;

const SMALL: &str = "n_seeds = 2\nwindow_len = 256\ntotal_samples = 4096\ncalibration_windows = 4\nbudgets = [4, 8]\n";

fn goosc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_goosc")).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn simulate_writes_the_standard_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("sim");
    let o = goosc(&["simulate", "--config", &cfg, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["results.csv", "report.json", "manifest.json", "signal.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn experiment_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = goosc(&["experiment", "stress", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(matches!(o.status.code(), Some(0 | 1)));
    }
    let read = |d: &Path| std::fs::read(d.join("results.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn failed_assertions_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("m");
    let o = goosc(&["experiment", "motivation", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL gsi_increase_in_sigma0"));
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "bogus_key = 1\n").unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    let cases: [&[&str]; 4] = [
        &["experiment", "nonesuch", "--out", out],
        &["simulate", "--config", bad.to_str().unwrap(), "--out", out],
        &["calibrate", "--config", "/nonexistent/cfg.toml", "--out", out],
        &["frobnicate"],
    ];
    for args in cases {
        assert_eq!(goosc(args).status.code(), Some(2), "{args:?}");
    }
}
