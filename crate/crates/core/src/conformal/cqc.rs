//! Split survey conformalized quantile classification.
//!
//! 1. A classifier is fit on `I1` and yields per-record scores
//!    `ŝ_i = w_i log f_{y_i}(x_i)`.
//! 2. A quantile network `q̂_α(x)` is fit on `I2` by minimising the survey-weighted
//!    pinball loss of `ŝ_i − q(x_i)`.
//! 3. On `I3`, `S_i = q̂_α(x_i) − ŝ_i` and the threshold `Q` is the survey-weighted
//!    quantile of the `S_i` at level `(1 + 1/n₃)(1 − α)`, or `+∞` when that level
//!    reaches one. A new point gets `{k : log f_k(x) ≥ q̂_α(x) − Q}`.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sets::PredictionSet;
use crate::error::{Error, Result};
use crate::numnet::{log_softmax, train, BatchSize, LossKind, NetworkParams, Observations, Targets, TrainConfig};
use crate::survey::{WeightedEmpirical, WeightedSample};

pub const ARTIFACT_VERSION: u32 = 1;

/// Whether calibration scores keep the survey weight factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreWeighting {
    /// `ŝ_i = w_i log f_{y_i}(x_i)` on fitted records.
    #[default]
    Literal,
    /// `ŝ_i = log f_{y_i}(x_i)` everywhere.
    Plain,
}

impl std::str::FromStr for ScoreWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(ScoreWeighting::Literal),
            "plain" => Ok(ScoreWeighting::Plain),
            other => Err(Error::Config(format!("unknown score weighting `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CqcConfig {
    /// Miscoverage level; sets target coverage `1 − alpha`.
    pub alpha: f64,
    pub score_train: TrainConfig,
    pub quantile_train: TrainConfig,
    pub score_weighting: ScoreWeighting,
}

impl Default for CqcConfig {
    fn default() -> Self {
        CqcConfig {
            alpha: 0.1,
            score_train: TrainConfig::default(),
            quantile_train: TrainConfig {
                hidden_widths: vec![16],
                epochs: 100,
                learning_rate: 5e-3,
                batch_size: BatchSize::Rows(128),
                standardize_targets: true,
                ..TrainConfig::default()
            },
            score_weighting: ScoreWeighting::Literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqcModel {
    pub score_net: NetworkParams,
    pub quantile_net: NetworkParams,
    /// `None` until calibrated; `Some(+∞)` for the degenerate threshold.
    #[serde(with = "threshold_repr")]
    pub threshold: Option<f64>,
    pub alpha: f64,
    pub class_count: usize,
    pub score_weighting: ScoreWeighting,
}

mod threshold_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Tag(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(t) if *t == f64::INFINITY => Repr::Tag("inf".into()).serialize(s),
            Some(t) => Repr::Finite(*t).serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Finite(t)) => Ok(Some(t)),
            Some(Repr::Tag(t)) if t == "inf" => Ok(Some(f64::INFINITY)),
            Some(Repr::Tag(t)) => Err(serde::de::Error::custom(format!("bad threshold `{t}`"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Artifact {
    format_version: u32,
    #[serde(flatten)]
    model: CqcModel,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

fn check_indices(name: &str, idx: &[usize], n: usize) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::invalid(format!("index set {name} is empty")));
    }
    if let Some(i) = idx.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("index {i} in {name} out of range for {n} rows")));
    }
    Ok(())
}

fn check_disjoint(a: &[usize], b: &[usize], what: &str) -> Result<()> {
    let set: HashSet<usize> = a.iter().copied().collect();
    if b.iter().any(|i| set.contains(i)) {
        return Err(Error::invalid(format!("index sets {what} overlap")));
    }
    Ok(())
}

/// `ŝ_i` for the given rows of `sample`.
pub fn record_scores(
    score_net: &NetworkParams,
    sample: &WeightedSample,
    rows: &[usize],
    weighting: ScoreWeighting,
) -> Result<Vec<f64>> {
    let labels = sample.data.class_labels()?;
    rows.iter()
        .map(|&i| {
            let log_f = log_softmax(&score_net.forward(&sample.data.features[i])?);
            let y = labels[i];
            if y >= log_f.len() {
                return Err(Error::invalid(format!("label {y} outside the classifier's classes")));
            }
            Ok(match weighting {
                ScoreWeighting::Literal => sample.data.weights[i] * log_f[y],
                ScoreWeighting::Plain => log_f[y],
            })
        })
        .collect()
}

/// Trains the score classifier on `i1` with weighted cross-entropy.
pub fn fit_score_net(sample: &WeightedSample, i1: &[usize], class_count: usize, cfg: &TrainConfig) -> Result<NetworkParams> {
    check_indices("I1", i1, sample.len())?;
    let part = sample.data.subset(i1);
    let labels = part.class_labels()?;
    let obs = Observations::new(&part.features, Targets::Classes { labels: &labels, class_count }, &part.weights)?;
    let cfg = TrainConfig { loss: LossKind::WeightedCrossEntropy, ..cfg.clone() };
    Ok(train(&obs, &cfg)?.params)
}

/// Fits `q̂_α` on `i2` against the scores of `score_net`.
pub fn fit_quantile_net(
    score_net: &NetworkParams,
    sample: &WeightedSample,
    i2: &[usize],
    alpha: f64,
    weighting: ScoreWeighting,
    cfg: &TrainConfig,
) -> Result<NetworkParams> {
    check_alpha(alpha)?;
    check_indices("I2", i2, sample.len())?;
    let scores = record_scores(score_net, sample, i2, weighting)?;
    let part = sample.data.subset(i2);
    let obs = Observations::new(&part.features, Targets::Values(&scores), &part.weights)?;
    let cfg = TrainConfig { loss: LossKind::Pinball { alpha }, ..cfg.clone() };
    Ok(train(&obs, &cfg)?.params)
}

/// Steps 1–2: score network on `i1`, quantile network on `i2`; threshold unset.
pub fn cqc_fit(sample: &WeightedSample, i1: &[usize], i2: &[usize], cfg: &CqcConfig) -> Result<CqcModel> {
    check_alpha(cfg.alpha)?;
    check_indices("I1", i1, sample.len())?;
    check_indices("I2", i2, sample.len())?;
    check_disjoint(i1, i2, "I1 and I2")?;
    let class_count = 2;
    let score_net = fit_score_net(sample, i1, class_count, &cfg.score_train)?;
    let quantile_net = fit_quantile_net(&score_net, sample, i2, cfg.alpha, cfg.score_weighting, &cfg.quantile_train)?;
    Ok(CqcModel {
        score_net,
        quantile_net,
        threshold: None,
        alpha: cfg.alpha,
        class_count,
        score_weighting: cfg.score_weighting,
    })
}

/// `(1 + 1/n₃)(1 − α)`.
pub fn calibration_level(n3: usize, alpha: f64) -> f64 {
    (1.0 + 1.0 / n3 as f64) * (1.0 - alpha)
}

/// Survey-weighted quantile of `scores` at [`calibration_level`]; `+∞` once the level reaches one.
pub fn cqc_threshold(scores: &[f64], weights: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if scores.is_empty() {
        return Err(Error::invalid("calibration index set is empty"));
    }
    let level = calibration_level(scores.len(), alpha);
    if level >= 1.0 {
        return Ok(f64::INFINITY);
    }
    WeightedEmpirical::new(scores, weights)?.quantile(level)
}

/// Step 3: nonconformity `S_i = q̂_α(x_i) − ŝ_i` on `i3` and the threshold `Q`.
pub fn cqc_calibrate(model: &CqcModel, sample: &WeightedSample, i3: &[usize]) -> Result<CqcModel> {
    check_indices("I3", i3, sample.len())?;
    let s_hat = record_scores(&model.score_net, sample, i3, model.score_weighting)?;
    let nonconformity = i3
        .iter()
        .zip(&s_hat)
        .map(|(&i, s)| Ok(model.quantile_net.predict_scalar(&sample.data.features[i])? - s))
        .collect::<Result<Vec<f64>>>()?;
    let weights: Vec<f64> = i3.iter().map(|&i| sample.data.weights[i]).collect();
    let threshold = cqc_threshold(&nonconformity, &weights, model.alpha)?;
    Ok(CqcModel { threshold: Some(threshold), ..model.clone() })
}

impl CqcModel {
    /// `ŝ(x, k) = log f_k(x)`: a new point carries unit weight.
    pub fn candidate_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(log_softmax(&self.score_net.forward(x)?))
    }

    /// `{k : ŝ(x,k) ≥ q̂_α(x) − Q}`.
    pub fn predict_set(&self, x: &[f64]) -> Result<PredictionSet> {
        let q = self
            .threshold
            .ok_or_else(|| Error::InvalidState("CQC model has not been calibrated".into()))?;
        if q == f64::INFINITY {
            return Ok(PredictionSet::labels((0..self.class_count).collect(), self.alpha));
        }
        let cut = self.quantile_net.predict_scalar(x)? - q;
        let labels =
            self.candidate_scores(x)?.iter().enumerate().filter(|(_, s)| **s >= cut).map(|(k, _)| k).collect();
        Ok(PredictionSet::labels(labels, self.alpha))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Artifact { format_version: ARTIFACT_VERSION, model: self.clone() })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let a: Artifact = serde_json::from_str(s)?;
        if a.format_version != ARTIFACT_VERSION {
            return Err(Error::invalid(format!("unsupported CQC artifact version {}", a.format_version)));
        }
        Ok(a.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Free-function form of [`CqcModel::predict_set`].
pub fn cqc_predict_set(model: &CqcModel, x: &[f64]) -> Result<PredictionSet> {
    model.predict_set(x)
}
