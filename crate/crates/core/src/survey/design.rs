use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seeds::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DesignKind {
    /// Every unit observed with certainty.
    Iid,
    /// Each unit kept independently with probability `pi0`.
    Bernoulli { pi0: f64 },
    /// States kept independently with `state_prob`, then one city per kept state
    /// drawn uniformly; every unit of a drawn city is observed.
    TwoStageCluster { state_prob: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurveyDesign {
    pub kind: DesignKind,
    pub population_size: usize,
}

impl SurveyDesign {
    pub fn validate(&self) -> Result<()> {
        let p = match self.kind {
            DesignKind::Iid => 1.0,
            DesignKind::Bernoulli { pi0 } => pi0,
            DesignKind::TwoStageCluster { state_prob } => state_prob,
        };
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid(format!("design probability must lie in (0,1], got {p}")));
        }
        if self.population_size == 0 {
            return Err(Error::invalid("population size must be positive"));
        }
        Ok(())
    }
}

/// Sampled rows with their first-order inclusion probabilities; `data.weights`
/// holds `1/π_i` for every row.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub data: Dataset,
    pub inclusion_probs: Vec<f64>,
}

impl WeightedSample {
    pub fn new(mut data: Dataset, inclusion_probs: Vec<f64>) -> Result<Self> {
        if inclusion_probs.len() != data.len() {
            return Err(Error::DimensionMismatch { expected: data.len(), got: inclusion_probs.len() });
        }
        if let Some(p) = inclusion_probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::invalid(format!("inclusion probability must lie in (0,1], got {p}")));
        }
        data.weights = inclusion_probs.iter().map(|p| 1.0 / p).collect();
        Ok(WeightedSample { data, inclusion_probs })
    }

    /// Wraps data whose weights are already survey weights, setting `π_i = 1/w_i`.
    pub fn from_weights(data: Dataset) -> Result<Self> {
        let probs: Vec<f64> = data.weights.iter().map(|w| 1.0 / w).collect();
        if let Some(p) = probs.iter().find(|p| **p > 1.0) {
            return Err(Error::invalid(format!("survey weights below one imply inclusion probability {p}")));
        }
        Ok(WeightedSample { data, inclusion_probs: probs })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> WeightedSample {
        WeightedSample {
            data: self.data.subset(indices),
            inclusion_probs: indices.iter().map(|&i| self.inclusion_probs[i]).collect(),
        }
    }
}

/// Draws a sample from `population` under `design`.
pub fn draw_sample(design: &SurveyDesign, population: &Dataset, seed: u64) -> Result<WeightedSample> {
    design.validate()?;
    if population.len() != design.population_size {
        return Err(Error::DimensionMismatch { expected: design.population_size, got: population.len() });
    }
    match design.kind {
        DesignKind::Iid => WeightedSample::new(population.clone(), vec![1.0; population.len()]),
        DesignKind::Bernoulli { pi0 } => {
            let mut rng = stream_rng(seed, 0, 2);
            let keep: Vec<usize> = (0..population.len()).filter(|_| rng.random::<f64>() < pi0).collect();
            WeightedSample::new(population.subset(&keep), vec![pi0; keep.len()])
        }
        DesignKind::TwoStageCluster { state_prob } => draw_two_stage_sample(state_prob, population, seed),
    }
}

/// Two-stage cluster draw: each state independently with `state_prob`, then one
/// of its `n_i` cities uniformly, so every observed unit has `π = state_prob / n_i`.
pub fn draw_two_stage_sample(state_prob: f64, population: &Dataset, seed: u64) -> Result<WeightedSample> {
    if !(state_prob > 0.0 && state_prob <= 1.0) {
        return Err(Error::invalid(format!("state probability must lie in (0,1], got {state_prob}")));
    }
    let clusters = population
        .clusters
        .as_ref()
        .ok_or_else(|| Error::invalid("population rows carry no state/city labels"))?;
    if clusters.is_empty() {
        return Err(Error::invalid("population is empty"));
    }
    // state -> city -> rows, in label order so draws are reproducible
    let mut tree: BTreeMap<u32, BTreeMap<u32, Vec<usize>>> = BTreeMap::new();
    for (row, c) in clusters.iter().enumerate() {
        tree.entry(c.state).or_default().entry(c.city).or_default().push(row);
    }

    let mut rng = stream_rng(seed, 0, 3);
    let mut rows = Vec::new();
    let mut probs = Vec::new();
    for cities in tree.values() {
        let retained = rng.random::<f64>() < state_prob;
        let pick = rng.random_range(0..cities.len());
        if !retained {
            continue;
        }
        let members = cities.values().nth(pick).expect("index in range");
        let pi = state_prob / cities.len() as f64;
        rows.extend_from_slice(members);
        probs.extend(std::iter::repeat_n(pi, members.len()));
    }
    WeightedSample::new(population.subset(&rows), probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ClusterLabel;

    fn clustered(states: &[usize], units_per_city: usize) -> Dataset {
        let mut clusters = Vec::new();
        let mut city = 0u32;
        for (s, &n_cities) in states.iter().enumerate() {
            for _ in 0..n_cities {
                for _ in 0..units_per_city {
                    clusters.push(ClusterLabel { state: s as u32, city });
                }
                city += 1;
            }
        }
        let n = clusters.len();
        Dataset::new(
            vec!["x".into()],
            (0..n).map(|i| vec![i as f64]).collect(),
            None,
            vec![1.0; n],
            (0..n).map(|i| i.to_string()).collect(),
        )
        .unwrap()
        .with_clusters(clusters)
        .unwrap()
    }

    #[test]
    fn four_city_state_weights() {
        let pop = clustered(&[4], 5);
        for seed in 0..20 {
            let s = draw_two_stage_sample(0.8, &pop, seed).unwrap();
            assert!(s.len() == 0 || s.len() == 5);
            for (&p, &w) in s.inclusion_probs.iter().zip(&s.data.weights) {
                assert!((p - 0.2).abs() < 1e-15);
                assert_eq!(w, 1.0 / p);
                assert!((w - 5.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn census_when_certain() {
        let pop = clustered(&[1, 1, 1], 4);
        let s = draw_two_stage_sample(1.0, &pop, 1).unwrap();
        assert_eq!(s.len(), 12);
        assert!(s.inclusion_probs.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn unlabeled_population_is_rejected() {
        let pop = Dataset::new(vec!["x".into()], vec![vec![0.0]], None, vec![1.0], vec!["0".into()]).unwrap();
        assert!(draw_two_stage_sample(0.8, &pop, 0).is_err());
        assert!(draw_two_stage_sample(0.0, &clustered(&[2], 1), 0).is_err());
    }

    #[test]
    fn bernoulli_and_iid() {
        let pop = clustered(&[3], 10);
        let d = SurveyDesign { kind: DesignKind::Bernoulli { pi0: 0.5 }, population_size: 30 };
        let s = draw_sample(&d, &pop, 4).unwrap();
        assert!(s.data.weights.iter().all(|&w| w == 2.0));
        let d = SurveyDesign { kind: DesignKind::Iid, population_size: 30 };
        assert_eq!(draw_sample(&d, &pop, 4).unwrap().len(), 30);
        let d = SurveyDesign { kind: DesignKind::Bernoulli { pi0: 0.0 }, population_size: 30 };
        assert!(draw_sample(&d, &pop, 4).is_err());
    }
}
