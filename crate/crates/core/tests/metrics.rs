use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surveynet::metrics::{
    confusion_metrics, confusion_metrics_weighted, evaluate_binary, weighted_auc, weighted_log_loss, Weighting,
};

/// Mann–Whitney U / (n₁ n₀) from midranks.
fn mann_whitney_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let n = scores.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = mid;
        }
        i = j + 1;
    }
    let n1 = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n0 = n as f64 - n1;
    let r1: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y == 1).map(|(r, _)| r).sum();
    (r1 - n1 * (n1 + 1.0) / 2.0) / (n1 * n0)
}

fn labelled(n: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
    let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
    labels[0] = 0;
    labels[1] = 1;
    let scores = (0..n).map(|_| f64::from(rng.random_range(0..20u8)) / 20.0).collect();
    (scores, labels)
}

#[test]
fn unit_weight_auc_is_mann_whitney() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let n = rng.random_range(2..80);
        let (s, y) = labelled(n, &mut rng);
        let a = weighted_auc(&s, &y, &vec![1.0; n]).unwrap();
        assert!((a - mann_whitney_auc(&s, &y)).abs() < 1e-12);
    }
}

#[test]
fn integer_weights_equal_replication() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let n = rng.random_range(2..30);
        let (s, y) = labelled(n, &mut rng);
        let w: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(1..4u8))).collect();
        let (mut rs, mut ry) = (Vec::new(), Vec::new());
        for i in 0..n {
            for _ in 0..w[i] as usize {
                rs.push(s[i]);
                ry.push(y[i]);
            }
        }
        let weighted = weighted_auc(&s, &y, &w).unwrap();
        let replicated = weighted_auc(&rs, &ry, &vec![1.0; rs.len()]).unwrap();
        assert!((weighted - replicated).abs() < 1e-12);
        let pred: Vec<u8> = s.iter().map(|&p| u8::from(p >= 0.5)).collect();
        let rpred: Vec<u8> = rs.iter().map(|&p| u8::from(p >= 0.5)).collect();
        let a = confusion_metrics_weighted(&pred, &y, Some(&w)).unwrap();
        let b = confusion_metrics(&rpred, &ry).unwrap();
        assert!((a.accuracy - b.accuracy).abs() < 1e-12);
        assert!((weighted_log_loss(&s, &y, &w).unwrap() - weighted_log_loss(&rs, &ry, &vec![1.0; rs.len()]).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn f1_is_harmonic_mean() {
    let pred = [1, 1, 0, 0, 1, 0, 1, 1];
    let labels = [1, 0, 0, 1, 1, 0, 1, 0];
    let m = confusion_metrics(&pred, &labels).unwrap();
    let (p, r) = (m.precision.unwrap(), m.recall.unwrap());
    assert!((m.f1.unwrap() - 2.0 * p * r / (p + r)).abs() < 1e-15);
    assert_eq!((p, r), (3.0 / 5.0, 3.0 / 4.0));
}

#[test]
fn undefined_ratios_are_none() {
    let m = confusion_metrics(&[0, 0], &[0, 0]).unwrap();
    assert_eq!((m.recall, m.precision, m.f1), (None, None, None));
    assert_eq!(m.accuracy, 1.0);
    let r = evaluate_binary(&[0.2, 0.9], &[0, 1], &[1.0, 3.0], 0.5, Weighting::Survey).unwrap();
    assert_eq!((r.auc, r.accuracy, r.n_eval), (1.0, 1.0, 2));
}

proptest! {
    #[test]
    fn auc_is_invariant_under_monotone_maps(seed in 0u64..1000, a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..50);
        let (s, y) = labelled(n, &mut rng);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..5.0)).collect();
        let mapped: Vec<f64> = s.iter().map(|p| (a * p + b).exp()).collect();
        let x = weighted_auc(&s, &y, &w).unwrap();
        let z = weighted_auc(&mapped, &y, &w).unwrap();
        prop_assert!((x - z).abs() < 1e-12);
    }

    #[test]
    fn auc_flips_under_decreasing_maps(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..50);
        let (s, y) = labelled(n, &mut rng);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..5.0)).collect();
        let neg: Vec<f64> = s.iter().map(|p| -p).collect();
        let x = weighted_auc(&s, &y, &w).unwrap();
        prop_assert!((x + weighted_auc(&neg, &y, &w).unwrap() - 1.0).abs() < 1e-12);
    }
}
