use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smtad_core::metrics::{auprc, auroc, ScoredTestSet};

fn labelled(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2..max).prop_flat_map(|n| {
        (prop::collection::vec(-100.0..100.0f64, n), prop::collection::vec(0u8..=1, n))
            .prop_filter("both classes", |(_, y)| y.contains(&0) && y.contains(&1))
    })
}

fn set(scores: Vec<f64>, labels: Vec<u8>) -> ScoredTestSet {
    ScoredTestSet::new(scores, labels).unwrap()
}

proptest! {
    #[test]
    fn auroc_ignores_increasing_transforms((s, y) in labelled(60)) {
        let base = auroc(&set(s.clone(), y.clone())).unwrap();
        let warped: Vec<f64> = s.iter().map(|v| (v / 50.0).exp() * 3.0 + 1.0).collect();
        let cubed: Vec<f64> = s.iter().map(|v| v * v * v).collect();
        prop_assert!((auroc(&set(warped, y.clone())).unwrap() - base).abs() < 1e-12);
        prop_assert!((auroc(&set(cubed, y)).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn auroc_is_antisymmetric((s, y) in labelled(60)) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let sum = auroc(&set(s, y.clone())).unwrap() + auroc(&set(neg, y)).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_ignore_row_order((s, y) in labelled(60), seed in any::<u64>()) {
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let s2: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        let y2: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
        let (a, b) = (set(s, y), set(s2, y2));
        prop_assert!((auroc(&a).unwrap() - auroc(&b).unwrap()).abs() < 1e-12);
        prop_assert!((auprc(&a).unwrap() - auprc(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn metrics_lie_in_unit_interval((s, y) in labelled(60)) {
        let d = set(s, y);
        let (r, p) = (auroc(&d).unwrap(), auprc(&d).unwrap());
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!(p > 0.0 && p <= 1.0);
    }
}

#[test]
fn random_ranking_precision_matches_prevalence() {
    // 100 positives among 1000: E[AP] under random order is close to, slightly above,
    // the prevalence; the sample mean over 10⁴ shuffles must land within 3σ.
    let (n, pos) = (1000usize, 100usize);
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i < pos)).collect();
    let scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut values = Vec::with_capacity(10_000);
    let mut perm = labels.clone();
    for _ in 0..10_000 {
        perm.shuffle(&mut rng);
        values.push(auprc(&set(scores.clone(), perm.clone())).unwrap());
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    let sigma = (var / values.len() as f64).sqrt();
    // exact expectation of AP for a uniformly random ranking
    let expected = {
        let (n, p) = (n as f64, pos as f64);
        let harmonic: f64 = (1..=n as usize).map(|k| 1.0 / k as f64).sum();
        ((p - 1.0) / (n - 1.0)) + ((n - p) / (n * (n - 1.0))) * harmonic
    };
    assert!((mean - expected).abs() < 3.0 * sigma, "mean {mean} expected {expected} sigma {sigma}");
    assert!((mean - pos as f64 / n as f64).abs() < 0.01);
}
