//! Survey-weighted binary classification metrics.
//!
//! AUC and cross-entropy use the survey weights. Accuracy, recall, precision
//! and F1 are count-based by default; [`Weighting::Survey`] switches them to
//! weighted counts (not part of the published metric table).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predicted probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Counts,
    Survey,
}

/// `[TN, FP, FN, TP]`
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", from = "[f64; 4]")]
pub struct Confusion {
    pub tn: f64,
    pub fp: f64,
    pub fn_: f64,
    pub tp: f64,
}

impl From<Confusion> for [f64; 4] {
    fn from(c: Confusion) -> Self {
        [c.tn, c.fp, c.fn_, c.tp]
    }
}

impl From<[f64; 4]> for Confusion {
    fn from(a: [f64; 4]) -> Self {
        Confusion { tn: a[0], fp: a[1], fn_: a[2], tp: a[3] }
    }
}

impl Confusion {
    pub fn total(&self) -> f64 {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub accuracy: f64,
    /// `None` when there are no positive labels.
    pub recall: Option<f64>,
    /// `None` when nothing is predicted positive.
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub accuracy: f64,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub cross_entropy: f64,
    pub confusion: Confusion,
    pub n_eval: usize,
}

fn check_lengths(n: usize, others: &[usize]) -> Result<()> {
    match others.iter().find(|&&m| m != n) {
        Some(&m) => Err(Error::DimensionMismatch { expected: n, got: m }),
        None => Ok(()),
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::invalid("weights must be positive and finite"));
    }
    Ok(())
}

/// Weighted AUC: `Σ_{i∈D} Σ_{j∈ND} w_i w_j k(p_i, p_j) / Σ_{i∈D} Σ_{j∈ND} w_i w_j`
/// with `k = 1` if `p_i > p_j`, `1/2` on ties and `0` otherwise.
///
/// Sort-based, `O(n log n)`.
pub fn weighted_auc(probs: &[f64], labels: &[u8], weights: &[f64]) -> Result<f64> {
    check_lengths(probs.len(), &[labels.len(), weights.len()])?;
    check_weights(weights)?;
    if probs.iter().any(|p| p.is_nan()) {
        return Err(Error::invalid("scores must not be NaN"));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));

    let (mut neg_below, mut num) = (0.0, 0.0);
    let (mut pos_total, mut neg_total) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0.0, 0.0);
        while j < order.len() && probs[order[j]] == probs[order[i]] {
            let k = order[j];
            if labels[k] == 1 {
                pos += weights[k];
            } else {
                neg += weights[k];
            }
            j += 1;
        }
        num += pos * neg_below + 0.5 * pos * neg;
        neg_below += neg;
        pos_total += pos;
        neg_total += neg;
        i = j;
    }
    if pos_total == 0.0 || neg_total == 0.0 {
        return Err(Error::UndefinedMetric("AUC needs both positive and negative labels".into()));
    }
    Ok(num / (pos_total * neg_total))
}

/// Accuracy, recall, precision and F1 from hard predictions, count-based.
pub fn confusion_metrics(pred: &[u8], labels: &[u8]) -> Result<ConfusionMetrics> {
    confusion_metrics_weighted(pred, labels, None)
}

/// As [`confusion_metrics`]; with `weights` every row counts `w_i` times.
pub fn confusion_metrics_weighted(pred: &[u8], labels: &[u8], weights: Option<&[f64]>) -> Result<ConfusionMetrics> {
    check_lengths(pred.len(), &[labels.len()])?;
    if let Some(w) = weights {
        check_lengths(pred.len(), &[w.len()])?;
        check_weights(w)?;
    }
    if pred.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    let mut c = Confusion::default();
    for (i, (&p, &y)) in pred.iter().zip(labels).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        match (p != 0, y != 0) {
            (false, false) => c.tn += w,
            (true, false) => c.fp += w,
            (false, true) => c.fn_ += w,
            (true, true) => c.tp += w,
        }
    }
    Ok(from_confusion(c))
}

pub fn from_confusion(c: Confusion) -> ConfusionMetrics {
    let accuracy = (c.tp + c.tn) / c.total();
    let recall = (c.tp + c.fn_ > 0.0).then(|| c.tp / (c.tp + c.fn_));
    let precision = (c.tp + c.fp > 0.0).then(|| c.tp / (c.tp + c.fp));
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    ConfusionMetrics { accuracy, recall, precision, f1, confusion: c }
}

/// Raw weighted log loss `-Σ w_i [y_i log p_i + (1-y_i) log(1-p_i)]` after clamping.
pub fn weighted_log_loss_sum(probs: &[f64], labels: &[u8], weights: &[f64]) -> Result<f64> {
    check_lengths(probs.len(), &[labels.len(), weights.len()])?;
    check_weights(weights)?;
    Ok(probs
        .iter()
        .zip(labels)
        .zip(weights)
        .map(|((&p, &y), &w)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -w * if y != 0 { p.ln() } else { (1.0 - p).ln() }
        })
        .sum())
}

/// Weighted log loss normalised by the total weight.
pub fn weighted_log_loss(probs: &[f64], labels: &[u8], weights: &[f64]) -> Result<f64> {
    let raw = weighted_log_loss_sum(probs, labels, weights)?;
    if probs.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    Ok(raw / weights.iter().sum::<f64>())
}

/// Full report at decision threshold `threshold` on `p̂`.
pub fn evaluate_binary(
    probs: &[f64],
    labels: &[u8],
    weights: &[f64],
    threshold: f64,
    weighting: Weighting,
) -> Result<MetricsReport> {
    let auc = weighted_auc(probs, labels, weights)?;
    let raw_ce = weighted_log_loss_sum(probs, labels, weights)?;
    let cross_entropy = raw_ce / weights.iter().sum::<f64>();
    log::debug!("weighted cross-entropy: raw sum {raw_ce}, normalised {cross_entropy}");
    let pred: Vec<u8> = probs.iter().map(|&p| u8::from(p >= threshold)).collect();
    let cm = match weighting {
        Weighting::Counts => confusion_metrics(&pred, labels)?,
        Weighting::Survey => confusion_metrics_weighted(&pred, labels, Some(weights))?,
    };
    Ok(MetricsReport {
        auc,
        accuracy: cm.accuracy,
        recall: cm.recall,
        precision: cm.precision,
        f1: cm.f1,
        cross_entropy,
        confusion: cm.confusion,
        n_eval: probs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_extremes() {
        let labels = [0, 0, 1, 1];
        let w = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(weighted_auc(&[0.1, 0.2, 0.8, 0.9], &labels, &w).unwrap(), 1.0);
        assert_eq!(weighted_auc(&[0.5; 4], &labels, &w).unwrap(), 0.5);
        assert_eq!(weighted_auc(&[0.9, 0.8, 0.2, 0.1], &labels, &w).unwrap(), 0.0);
        assert!(matches!(weighted_auc(&[0.1, 0.2], &[1, 1], &[1.0, 1.0]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn published_model7_confusion() {
        let c = Confusion { tn: 2732.0, fp: 346.0, fn_: 492.0, tp: 1230.0 };
        let m = from_confusion(c);
        assert!((m.accuracy - 0.825).abs() < 5e-4);
        assert!((m.recall.unwrap() - 0.714).abs() < 5e-4);
        assert!((m.precision.unwrap() - 0.780).abs() < 5e-4);
    }

    #[test]
    fn confusion_edge_cases() {
        let m = confusion_metrics(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((m.accuracy, m.f1), (1.0, Some(1.0)));
        let m = confusion_metrics(&[0, 0, 0], &[1, 0, 1]).unwrap();
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.f1, None);
        assert!(confusion_metrics(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn log_loss_cases() {
        assert!((weighted_log_loss(&[0.5], &[1], &[1.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let ll = weighted_log_loss(&[1.0, 0.0], &[1, 0], &[1.0, 1.0]).unwrap();
        assert!(ll < 1e-11);
    }

    #[test]
    fn report_json_keys() {
        let r = evaluate_binary(&[0.2, 0.7, 0.9], &[0, 1, 0], &[1.0, 1.0, 1.0], 0.5, Weighting::Counts).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["auc", "accuracy", "recall", "precision", "f1", "cross_entropy", "confusion", "n_eval"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["confusion"], serde_json::json!([1.0, 1.0, 0.0, 1.0]));
    }
}
