mod common;

use goosc::detector::{self, LinearProbe};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn brute_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (s, l) in scores.iter().zip(labels) {
        if !*l {
            continue;
        }
        for (t, m) in scores.iter().zip(labels) {
            if *m {
                continue;
            }
            pairs += 1.0;
            wins += if s > t {
                1.0
            } else if s == t {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec((-20i32..20).prop_map(|v| v as f64 / 4.0), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_filter("both classes", |(_, l)| l.iter().any(|v| *v) && l.iter().any(|v| !*v))
    })
}

proptest! {
    #[test]
    fn auroc_equals_pairwise_count((scores, labels) in scored()) {
        let a = detector::auroc(&scores, &labels).unwrap();
        prop_assert!((a - brute_auroc(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn auroc_is_invariant_to_monotone_maps((scores, labels) in scored()) {
        let a = detector::auroc(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| (0.3 * s).exp() * 5.0 - 2.0).collect();
        prop_assert!((detector::auroc(&mapped, &labels).unwrap() - a).abs() < 1e-12);
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((detector::auroc(&neg, &labels).unwrap() - (1.0 - a)).abs() < 1e-12);
    }
}

fn pooled(h: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let scatter = |x: &DMatrix<f64>| {
        let m = x.row_mean();
        let c = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - m[j]);
        c.transpose() * c
    };
    (scatter(h) + scatter(d)) / (h.nrows() + d.nrows() - 2) as f64
}

fn deflection(w: &DVector<f64>, delta: &DVector<f64>, sigma: &DMatrix<f64>) -> f64 {
    w.dot(delta).powi(2) / (w.transpose() * sigma * w)[(0, 0)]
}

fn fixture(seed: u64, d: usize) -> (DMatrix<f64>, DMatrix<f64>, LinearProbe) {
    let mut rng = common::rng(seed);
    let mix = common::gaussian(&mut rng, d, d) + DMatrix::identity(d, d);
    let shift = common::gaussian(&mut rng, 1, d);
    let h = common::gaussian(&mut rng, 80, d) * &mix;
    let mut g = common::gaussian(&mut rng, 70, d) * &mix;
    for mut r in g.row_iter_mut() {
        r += &shift;
    }
    let probe = detector::fit_probe(&h, &g, None).unwrap();
    (h, g, probe)
}

#[test]
fn probe_weights_maximize_deflection() {
    let mut rng = common::rng(51);
    for p in 0..20 {
        let d = 2 + p % 5;
        let (h, g, probe) = fixture(100 + p as u64, d);
        let sigma = pooled(&h, &g) + DMatrix::identity(d, d) * probe.ridge;
        let delta = DVector::from_column_slice(&probe.delta);
        let w = DVector::from_column_slice(&probe.weights);
        let best = deflection(&w, &delta, &sigma);
        for _ in 0..10_000 {
            let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            assert!(deflection(&v, &delta, &sigma) <= best * (1.0 + 1e-12));
        }
        assert!((w.norm() - 1.0).abs() < 1e-12);
        assert!(w.dot(&delta) > 0.0);
    }
}

#[test]
fn probe_threshold_separates_class_means() {
    let (h, g, probe) = fixture(7, 4);
    let mh = probe.score(&h.row_mean().iter().cloned().collect::<Vec<_>>()).unwrap();
    let md = probe.score(&g.row_mean().iter().cloned().collect::<Vec<_>>()).unwrap();
    assert!(mh < probe.threshold && probe.threshold < md);
    assert!((probe.threshold - 0.5 * (mh + md)).abs() < 1e-12);
}

#[test]
fn response_slope_recovers_a_linear_mean_shift() {
    let strengths = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3];
    let mut rng = common::rng(52);
    let values: Vec<Vec<f64>> = strengths
        .iter()
        .map(|h| (0..100).map(|_| 2.0 * h + 0.05 * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let s = detector::response_slope(&values, &strengths, 9).unwrap();
    assert!((1.8..=2.2).contains(&s.slope), "{s:?}");
    assert!(s.significant());
    let flat: Vec<Vec<f64>> = strengths
        .iter()
        .map(|_| (0..100).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let f = detector::response_slope(&flat, &strengths, 9).unwrap();
    assert!(f.ci_low < f.slope && f.slope < f.ci_high);
}
