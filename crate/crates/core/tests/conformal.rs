use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use surveynet::conformal::{
    cqc_calibrate, cqc_fit, cqc_threshold, split_conformal_interval, weighted_conformal_interval, CalibrationSet,
    CqcConfig, CqcModel, Region, ScoreWeighting,
};
use surveynet::numnet::{Layer, NetworkParams, TrainConfig};
use surveynet::{Dataset, WeightedSample};

fn linear(x: &[f64]) -> f64 {
    x[0]
}

#[test]
fn split_conformal_coverage_is_exact_on_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, reps, alpha) = (19, 4000, 0.1);
    let mut covered = 0;
    for _ in 0..reps {
        let features: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.sample(StandardNormal)]).collect();
        let y: Vec<f64> = features.iter().map(|x| x[0] + rng.sample::<f64, _>(StandardNormal)).collect();
        let cal = CalibrationSet::from_model(&linear, &features, &y, &vec![1.0; n]).unwrap();
        let x: f64 = rng.sample(StandardNormal);
        let y_new = x + rng.sample::<f64, _>(StandardNormal);
        if split_conformal_interval(&linear, &cal, &[x], alpha).unwrap().covers(y_new) {
            covered += 1;
        }
    }
    // n = 19 and alpha = 0.1 give exactly 18/20 = 0.9
    let rate = f64::from(covered) / f64::from(reps);
    let se = (0.9 * 0.1 / f64::from(reps)).sqrt();
    assert!((rate - 0.9).abs() < 3.0 * se, "{rate}");
}

#[test]
fn likelihood_ratio_weights_restore_coverage_under_shift() {
    // calibration X ~ N(0,1), test X ~ N(1,1): ratio exp(x - 1/2); noise grows with |x|
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (n, reps, alpha) = (200, 1500, 0.1);
    let ratio = |x: &[f64]| (x[0] - 0.5).exp();
    let noise = |x: f64, rng: &mut ChaCha8Rng| (0.3 + x.abs()) * rng.sample::<f64, _>(StandardNormal);
    let (mut weighted, mut plain) = (0, 0);
    for _ in 0..reps {
        let features: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.sample(StandardNormal)]).collect();
        let y: Vec<f64> = features.iter().map(|x| x[0] + noise(x[0], &mut rng)).collect();
        let cal = CalibrationSet::from_model(&linear, &features, &y, &vec![1.0; n]).unwrap();
        let x = 1.0 + rng.sample::<f64, _>(StandardNormal);
        let y_new = x + noise(x, &mut rng);
        weighted += i32::from(weighted_conformal_interval(&linear, &cal, &[x], ratio, alpha).unwrap().covers(y_new));
        plain += i32::from(split_conformal_interval(&linear, &cal, &[x], alpha).unwrap().covers(y_new));
    }
    let (w, p) = (f64::from(weighted) / f64::from(reps), f64::from(plain) / f64::from(reps));
    assert!(w >= 0.9 - 3.0 * (0.09f64 / f64::from(reps)).sqrt(), "weighted {w}");
    assert!(p < w, "unweighted {p} vs weighted {w}");
}

#[test]
fn split_intervals_are_nested_in_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let features: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    let y: Vec<f64> = features.iter().map(|x| x[0] + rng.random_range(-1.0..1.0)).collect();
    let cal = CalibrationSet::from_model(&linear, &features, &y, &vec![1.0; 50]).unwrap();
    let alphas = [0.5, 0.3, 0.2, 0.1, 0.05, 0.01];
    let sets: Vec<_> = alphas.iter().map(|&a| split_conformal_interval(&linear, &cal, &[0.2], a).unwrap()).collect();
    for pair in sets.windows(2) {
        assert!(pair[1].contains_set(&pair[0]));
    }
}

#[test]
fn threshold_matches_rank_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.random_range(5..60);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let alpha = rng.random_range(0.05..0.5);
        let q = cqc_threshold(&s, &vec![1.0; n], alpha).unwrap();
        let k = ((n as f64 + 1.0) * (1.0 - alpha)).ceil() as usize;
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        if k > n {
            assert_eq!(q, f64::INFINITY);
        } else {
            assert_eq!(q, sorted[k - 1], "n {n} alpha {alpha}");
        }
    }
}

fn toy_sample(n: usize, seed: u64) -> WeightedSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
    let labels: Vec<u8> = features.iter().map(|x| u8::from(rng.random_bool(1.0 / (1.0 + (-2.0 * x[0]).exp())))).collect();
    let ds = Dataset::new(
        vec!["x".into()],
        features,
        Some(labels),
        (0..n).map(|_| rng.random_range(1.0..4.0)).collect(),
        (0..n).map(|i| i.to_string()).collect(),
    )
    .unwrap();
    WeightedSample::from_weights(ds).unwrap()
}

#[test]
fn constant_quantile_net_reduces_to_score_threshold() {
    // with q̂ ≡ c the set is {k : log f_k ≥ c − Q}, Q the quantile of c − ŝ_i
    let sample = toy_sample(40, 5);
    let score_net = NetworkParams::init(1, &[3], 2, 1).unwrap();
    let c = -0.4;
    let quantile_net = NetworkParams::new(vec![Layer::new(vec![vec![0.0]], vec![c]).unwrap()]).unwrap();
    let model = CqcModel {
        score_net,
        quantile_net,
        threshold: None,
        alpha: 0.2,
        class_count: 2,
        score_weighting: ScoreWeighting::Plain,
    };
    let rows: Vec<usize> = (0..40).collect();
    let cal = cqc_calibrate(&model, &sample, &rows).unwrap();
    let q = cal.threshold.unwrap();
    for x in [-1.5, 0.0, 0.7] {
        let logf = cal.candidate_scores(&[x]).unwrap();
        let want: Vec<usize> = (0..2).filter(|&k| logf[k] >= c - q).collect();
        assert_eq!(cal.predict_set(&[x]).unwrap().region, Region::Labels(want));
    }
}

#[test]
fn fitted_cqc_covers_on_fresh_data() {
    let sample = toy_sample(900, 6);
    let fresh = toy_sample(2000, 7);
    let i1: Vec<usize> = (0..400).collect();
    let i2: Vec<usize> = (400..650).collect();
    let i3: Vec<usize> = (650..900).collect();
    let cfg = CqcConfig {
        alpha: 0.1,
        score_train: TrainConfig { hidden_widths: vec![8], epochs: 40, ..Default::default() },
        score_weighting: ScoreWeighting::Plain,
        ..Default::default()
    };
    let model = cqc_calibrate(&cqc_fit(&sample, &i1, &i2, &cfg).unwrap(), &sample, &i3).unwrap();
    let labels = fresh.data.labels.as_ref().unwrap();
    let covered = fresh
        .data
        .features
        .iter()
        .zip(labels)
        .filter(|(x, &y)| model.predict_set(x).unwrap().covers(f64::from(y)))
        .count();
    assert!(covered as f64 / 2000.0 >= 0.86, "{covered}");
}

#[test]
fn cqc_rejects_overlapping_or_empty_splits() {
    let sample = toy_sample(30, 8);
    let cfg = CqcConfig::default();
    assert!(cqc_fit(&sample, &[0, 1, 2], &[2, 3], &cfg).is_err());
    assert!(cqc_fit(&sample, &[], &[2, 3], &cfg).is_err());
    assert!(cqc_fit(&sample, &[0, 1], &[2, 99], &cfg).is_err());
}
