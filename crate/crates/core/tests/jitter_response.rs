use goosc::harness::{self, ExperimentConfig};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

// 100 seeds cannot resolve a 1% RMS change at this damping (standard error
// about 3% per 512-sample window), so RMS is checked against its own paired
// standard error and the window is long enough for PCC to separate.
#[test]
fn jitter_moves_pcc_but_not_rms() {
    let cfg = ExperimentConfig {
        window_len: 2048,
        ..ExperimentConfig::default()
    };
    let s = harness::jitter_samples(&cfg, &[0.0, 0.3], 100).unwrap();
    let diff: Vec<f64> = s.rms[1].iter().zip(&s.rms[0]).map(|(a, b)| a - b).collect();
    let se = std(&diff) / (diff.len() as f64).sqrt();
    println!("RMS change {:.4} ± {:.4} (relative {:.4})", mean(&diff), se, mean(&diff) / mean(&s.rms[0]));
    assert!(mean(&diff).abs() < 2.0 * se);
    let shift = mean(&s.pcc[1]) - mean(&s.pcc[0]);
    println!("PCC shift {shift:.4}, healthy std {:.4}", std(&s.pcc[0]));
    assert!(shift.abs() > 10.0 * std(&s.pcc[0]));
}
