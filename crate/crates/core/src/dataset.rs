//! Tabular survey data shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cluster membership of a population unit: first-stage state, second-stage city.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClusterLabel {
    pub state: u32,
    pub city: u32,
}

/// Rows of real-valued features with optional binary labels, survey weights,
/// record ids and optional cluster labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
    pub weights: Vec<f64>,
    pub ids: Vec<String>,
    pub clusters: Option<Vec<ClusterLabel>>,
}

impl Dataset {
    /// Builds a dataset, checking that every per-row vector has the same length.
    pub fn new(
        columns: Vec<String>,
        features: Vec<Vec<f64>>,
        labels: Option<Vec<u8>>,
        weights: Vec<f64>,
        ids: Vec<String>,
    ) -> Result<Self> {
        let n = features.len();
        if weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
        }
        if ids.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: ids.len() });
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
            }
        }
        if let Some(row) = features.iter().find(|r| r.len() != columns.len()) {
            return Err(Error::DimensionMismatch { expected: columns.len(), got: row.len() });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!("survey weight must be positive and finite, got {w}")));
        }
        Ok(Dataset { columns, features, labels, weights, ids, clusters: None })
    }

    pub fn with_clusters(mut self, clusters: Vec<ClusterLabel>) -> Result<Self> {
        if clusters.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: clusters.len() });
        }
        self.clusters = Some(clusters);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Labels as class indices; fails for unlabeled data.
    pub fn class_labels(&self) -> Result<Vec<usize>> {
        self.labels
            .as_ref()
            .map(|l| l.iter().map(|&y| y as usize).collect())
            .ok_or_else(|| Error::invalid("dataset has no labels"))
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            clusters: self.clusters.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Keeps only the named feature columns, in the order given.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n.as_ref()).ok_or_else(|| Error::MissingColumn(n.as_ref().to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            columns: names.iter().map(|n| n.as_ref().to_string()).collect(),
            features: self.features.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect(),
            ..self.clone()
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
            Some(vec![0, 1, 1]),
            vec![1.0, 2.0, 3.0],
            vec!["r1".into(), "r2".into(), "r3".into()],
        )
        .unwrap()
    }

    #[test]
    fn subset_and_select() {
        let ds = toy();
        let sub = ds.subset(&[2, 0]);
        assert_eq!(sub.features, vec![vec![5.0, 6.0], vec![1.0, 2.0]]);
        assert_eq!(sub.labels, Some(vec![1, 0]));
        assert_eq!(sub.ids, vec!["r3", "r1"]);
        let sel = ds.select_columns(&["b"]).unwrap();
        assert_eq!(sel.features[1], vec![4.0]);
        assert!(matches!(ds.select_columns(&["zz"]), Err(Error::MissingColumn(c)) if c == "zz"));
    }

    #[test]
    fn rejects_nonpositive_weight() {
        let err = Dataset::new(vec!["a".into()], vec![vec![1.0]], None, vec![0.0], vec!["x".into()]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }
}
