use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// Class indices, ascending.
    Labels(Vec<usize>),
    /// Closed interval; either end may be infinite.
    Interval { lo: f64, hi: f64 },
}

/// A conformal prediction set at miscoverage level `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub region: Region,
    pub alpha: f64,
}

impl PredictionSet {
    pub fn labels(labels: Vec<usize>, alpha: f64) -> Self {
        PredictionSet { region: Region::Labels(labels), alpha }
    }

    pub fn interval(lo: f64, hi: f64, alpha: f64) -> Self {
        PredictionSet { region: Region::Interval { lo, hi }, alpha }
    }

    /// Whether `truth` lies in the set; labels are compared as class indices.
    pub fn covers(&self, truth: f64) -> bool {
        match &self.region {
            Region::Labels(ls) => ls.iter().any(|&k| k as f64 == truth),
            Region::Interval { lo, hi } => *lo <= truth && truth <= *hi,
        }
    }

    /// Number of labels, or interval length.
    pub fn size(&self) -> f64 {
        match &self.region {
            Region::Labels(ls) => ls.len() as f64,
            Region::Interval { lo, hi } => hi - lo,
        }
    }

    /// `self ⊇ other`, for sets of the same kind.
    pub fn contains_set(&self, other: &PredictionSet) -> bool {
        match (&self.region, &other.region) {
            (Region::Labels(a), Region::Labels(b)) => b.iter().all(|k| a.contains(k)),
            (Region::Interval { lo: a0, hi: a1 }, Region::Interval { lo: b0, hi: b1 }) => a0 <= b0 && b1 <= a1,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub empirical_coverage: f64,
    pub mean_set_size: f64,
    pub n_eval: usize,
    pub alpha: f64,
}

/// Fraction of truths covered and mean set size; survey-weighted when `use_weights`.
pub fn evaluate_coverage(
    sets: &[PredictionSet],
    truths: &[f64],
    weights: &[f64],
    use_weights: bool,
) -> Result<CoverageResult> {
    if truths.len() != sets.len() {
        return Err(Error::DimensionMismatch { expected: sets.len(), got: truths.len() });
    }
    if use_weights && weights.len() != sets.len() {
        return Err(Error::DimensionMismatch { expected: sets.len(), got: weights.len() });
    }
    if sets.is_empty() {
        return Err(Error::invalid("no prediction sets to evaluate"));
    }
    let weight = |i: usize| if use_weights { weights[i] } else { 1.0 };
    let (mut covered, mut size, mut total) = (0.0, 0.0, 0.0);
    for (i, (set, &y)) in sets.iter().zip(truths).enumerate() {
        let w = weight(i);
        if set.covers(y) {
            covered += w;
        }
        size += w * set.size();
        total += w;
    }
    Ok(CoverageResult {
        empirical_coverage: covered / total,
        mean_set_size: size / total,
        n_eval: sets.len(),
        alpha: sets[0].alpha,
    })
}

/// `Σ w_i d_TV(Z, Z^i) / (1 + Σ w_i)`: bound on the coverage shortfall when
/// exchangeability fails.
pub fn coverage_gap_bound(weights: &[f64], tv_distances: &[f64]) -> Result<f64> {
    if weights.len() != tv_distances.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), got: tv_distances.len() });
    }
    if weights.iter().chain(tv_distances).any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("weights and total-variation distances must lie in [0,1]"));
    }
    let num: f64 = weights.iter().zip(tv_distances).map(|(w, d)| w * d).sum();
    Ok(num / (1.0 + weights.iter().sum::<f64>()))
}
