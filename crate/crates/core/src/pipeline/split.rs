use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numnet::{loss_value, train, weighted_mean_sd, LossKind, NetworkParams, Observations, Targets, TrainConfig};
use crate::seeds::stream_rng;

/// Index sets of a three-way random partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub architecture: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and cuts it into parts of `floor(n·f1)`, `floor(n·f2)` and the rest.
pub fn split_indices(n: usize, fractions: [f64; 3], seed: u64) -> Result<Split> {
    if n < 10 {
        return Err(Error::invalid(format!("need at least 10 rows to split, got {n}")));
    }
    if fractions.iter().any(|f| !(*f > 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions {fractions:?} must be positive and sum to 1")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, 0, 4));
    let n1 = (n as f64 * fractions[0]).floor() as usize;
    let n2 = (n as f64 * fractions[1]).floor() as usize;
    let test = order.split_off(n1 + n2);
    let architecture = order.split_off(n1);
    Ok(Split { train: order, architecture, test })
}

/// `split_indices` applied to `ds`, returning `(train, architecture, test)`.
pub fn split_dataset(ds: &Dataset, fractions: [f64; 3], seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let s = split_indices(ds.len(), fractions, seed)?;
    Ok((ds.subset(&s.train), ds.subset(&s.architecture), ds.subset(&s.test)))
}

/// Per-column z-scoring with survey-weighted means and standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::invalid("cannot standardise an empty dataset"));
        }
        let (means, sds) = (0..ds.dim())
            .map(|j| {
                let col: Vec<f64> = ds.features.iter().map(|r| r[j]).collect();
                let (m, s) = weighted_mean_sd(&col, &ds.weights);
                (m, if s > 0.0 { s } else { 1.0 })
            })
            .unzip();
        Ok(Standardizer { means, sds })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.means.iter().zip(&self.sds)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        Dataset { features: ds.features.iter().map(|r| self.transform_row(r)).collect(), ..ds.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub config: TrainConfig,
    pub params: NetworkParams,
    /// `(hidden widths, weight-normalised cross-entropy on the architecture set)`; `None` if training diverged.
    pub scores: Vec<(Vec<usize>, Option<f64>)>,
}

/// Weighted cross-entropy divided by total weight.
pub fn mean_cross_entropy(params: &NetworkParams, ds: &Dataset) -> Result<f64> {
    let labels = ds.class_labels()?;
    let obs = Observations::new(&ds.features, Targets::Classes { labels: &labels, class_count: 2 }, &ds.weights)?;
    Ok(loss_value(params, &obs, LossKind::WeightedCrossEntropy)? / ds.total_weight())
}

/// Trains every candidate on `train` and keeps the one with the lowest weighted
/// cross-entropy on `arch`; ties go to the smaller parameter count.
pub fn select_architecture(
    train_set: &Dataset,
    arch_set: &Dataset,
    candidates: &[Vec<usize>],
    base: &TrainConfig,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate architectures"));
    }
    let labels = train_set.class_labels()?;
    let obs =
        Observations::new(&train_set.features, Targets::Classes { labels: &labels, class_count: 2 }, &train_set.weights)?;
    let mut best: Option<(f64, usize, TrainConfig, NetworkParams)> = None;
    let mut scores = Vec::with_capacity(candidates.len());
    let mut last_divergence = None;
    for hidden in candidates {
        let cfg = TrainConfig { hidden_widths: hidden.clone(), loss: LossKind::WeightedCrossEntropy, ..base.clone() };
        let fitted = match train(&obs, &cfg) {
            Ok(f) => f,
            Err(e @ Error::TrainingDiverged { .. }) => {
                log::warn!("architecture {hidden:?} diverged: {e}");
                scores.push((hidden.clone(), None));
                last_divergence = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let ce = mean_cross_entropy(&fitted.params, arch_set)?;
        scores.push((hidden.clone(), Some(ce)));
        let size = fitted.params.param_count();
        let better = match &best {
            None => true,
            Some((b_ce, b_size, ..)) => ce < *b_ce || (ce == *b_ce && size < *b_size),
        };
        if better {
            best = Some((ce, size, cfg, fitted.params));
        }
    }
    match best {
        Some((_, _, config, params)) => Ok(Selection { config, params, scores }),
        None => Err(last_divergence.unwrap_or(Error::TrainingDiverged { epoch: 0 })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(n: usize) -> Dataset {
        Dataset::new(
            vec!["x".into()],
            (0..n).map(|i| vec![i as f64]).collect(),
            Some((0..n).map(|i| (i % 2) as u8).collect()),
            vec![1.0; n],
            (0..n).map(|i| i.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn proportions() {
        let s = split_indices(100, [0.5, 0.3, 0.2], 1).unwrap();
        assert_eq!((s.train.len(), s.architecture.len(), s.test.len()), (50, 30, 20));
        let mut all: Vec<usize> = s.train.iter().chain(&s.architecture).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(s, split_indices(100, [0.5, 0.3, 0.2], 1).unwrap());
    }

    #[test]
    fn split_errors() {
        assert!(split_indices(9, [0.5, 0.3, 0.2], 1).is_err());
        assert!(split_indices(100, [0.5, 0.3, 0.3], 1).is_err());
        assert!(split_indices(100, [0.8, 0.2, 0.0], 1).is_err());
    }

    #[test]
    fn standardizer_uses_weights() {
        let mut d = ds(2);
        d.features = vec![vec![0.0], vec![4.0]];
        d.weights = vec![3.0, 1.0];
        let s = Standardizer::fit(&d).unwrap();
        assert_eq!(s.means, vec![1.0]);
        assert!((s.sds[0] - 3f64.sqrt()).abs() < 1e-12);
        let t = s.transform(&d);
        assert!((t.features[0][0] + 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_candidate_and_errors() {
        let d = ds(40);
        let cfg = TrainConfig { epochs: 5, ..Default::default() };
        let sel = select_architecture(&d, &d, &[vec![4]], &cfg).unwrap();
        assert_eq!(sel.config.hidden_widths, vec![4]);
        assert!(select_architecture(&d, &d, &[], &cfg).is_err());
    }

    #[test]
    fn ties_prefer_smaller_network() {
        // zero inputs: hidden units stay at zero, only the output bias learns,
        // so every architecture reaches the same loss
        let mut d = ds(20);
        d.features.iter_mut().for_each(|r| r[0] = 0.0);
        let cfg = TrainConfig { epochs: 20, ..Default::default() };
        let sel = select_architecture(&d, &d, &[vec![16, 8], vec![4]], &cfg).unwrap();
        assert_eq!(sel.scores[0].1, sel.scores[1].1);
        assert_eq!(sel.config.hidden_widths, vec![4]);
        let again = select_architecture(&d, &d, &[vec![16, 8], vec![4]], &cfg).unwrap();
        assert_eq!(again, sel);
    }
}
