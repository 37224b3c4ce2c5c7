use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{check_compatible, Backprop, LossKind, Observations, Targets};
use super::network::NetworkParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchSize {
    Full,
    #[serde(untagged)]
    Rows(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub seed: u64,
    pub loss: LossKind,
    pub hidden_widths: Vec<usize>,
    /// Regression losses only: fit on centred/scaled targets and fold the
    /// affine map back into the output layer afterwards.
    pub standardize_targets: bool,
    /// Decoupled weight decay on connection weights (biases are not decayed).
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            epochs: 100,
            batch_size: BatchSize::Rows(64),
            seed: 0,
            loss: LossKind::WeightedCrossEntropy,
            hidden_widths: vec![32, 16],
            standardize_targets: false,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0 && self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("adam betas must lie in (0,1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == BatchSize::Rows(0) {
            return bad("batch_size must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be nonnegative");
        }
        if self.hidden_widths.contains(&0) {
            return bad("hidden widths must be positive");
        }
        self.loss.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// Result of [`train`]: fitted parameters plus the per-epoch training loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNetwork {
    pub params: NetworkParams,
    /// Sum over the epoch's minibatches of the weighted loss, each evaluated
    /// before its update; with full batches this is the loss at the start of the epoch.
    pub loss_trace: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], decay_mask: &[bool], cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let shrink = 1.0 - cfg.learning_rate * cfg.weight_decay;
        for ((((p, &g), m), v), &decay) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v).zip(decay_mask) {
            if decay {
                *p *= shrink;
            }
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
        }
    }
}

/// Fits a fresh network with Adam on the configured weighted loss.
///
/// Minibatch gradients are rescaled by `total weight / batch weight`, so every
/// step estimates the gradient of the full weighted objective.
pub fn train(obs: &Observations<'_>, cfg: &TrainConfig) -> Result<TrainedNetwork> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    let output_dim = match obs.targets {
        Targets::Classes { class_count, .. } => class_count,
        Targets::Values(_) => 1,
    };
    let init = NetworkParams::init(obs.features[0].len(), &cfg.hidden_widths, output_dim, cfg.seed)?;
    train_from(init, obs, cfg)
}

/// As [`train`], starting from the given parameters.
pub fn train_from(mut params: NetworkParams, obs: &Observations<'_>, cfg: &TrainConfig) -> Result<TrainedNetwork> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    check_compatible(&params, obs)?;
    if !matches!(cfg.loss, LossKind::WeightedCrossEntropy) && !matches!(obs.targets, Targets::Values(_)) {
        return Err(Error::invalid("regression losses need real-valued targets"));
    }
    if matches!(cfg.loss, LossKind::WeightedCrossEntropy) && !matches!(obs.targets, Targets::Classes { .. }) {
        return Err(Error::invalid("cross-entropy needs class targets"));
    }

    let scaled;
    let (obs, shift, scale) = match (cfg.standardize_targets, obs.targets) {
        (true, Targets::Values(y)) => {
            let (mean, sd) = weighted_mean_sd(y, obs.weights);
            let sd = if sd > 0.0 { sd } else { 1.0 };
            scaled = y.iter().map(|v| (v - mean) / sd).collect::<Vec<_>>();
            (Observations { targets: Targets::Values(&scaled), ..*obs }, mean, sd)
        }
        _ => (*obs, 0.0, 1.0),
    };
    // loss in the original target units
    let unit = match cfg.loss {
        LossKind::WeightedMse => scale * scale,
        _ => scale,
    };

    let n = obs.len();
    let total_weight: f64 = obs.weights.iter().sum();
    let batch = match cfg.batch_size {
        BatchSize::Full => n,
        BatchSize::Rows(b) => b.min(n),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..n).collect();
    let mut flat = params.to_flat();
    let mut grad = vec![0.0; flat.len()];
    let mut adam = Adam::new(flat.len());
    let decay_mask: Vec<bool> = params
        .layers()
        .iter()
        .flat_map(|l| {
            std::iter::repeat(cfg.weight_decay > 0.0)
                .take(l.weights_row_major().len())
                .chain(std::iter::repeat(false).take(l.bias().len()))
        })
        .collect();
    let mut engine = Backprop::new(&params);
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for rows in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let batch_loss = engine.accumulate(&params, &obs, cfg.loss, rows.iter().copied(), &mut grad);
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            epoch_loss += batch_loss;
            if rows.len() < n {
                let batch_weight: f64 = rows.iter().map(|&i| obs.weights[i]).sum();
                let factor = total_weight / batch_weight;
                grad.iter_mut().for_each(|g| *g *= factor);
            }
            adam.step(&mut flat, &grad, &decay_mask, cfg);
            if flat.iter().any(|v| !v.is_finite()) {
                return Err(Error::TrainingDiverged { epoch });
            }
            params.set_flat(&flat)?;
        }
        trace.push(epoch_loss * unit);
    }

    if scale != 1.0 || shift != 0.0 {
        let last = params.layers_mut().last_mut().expect("non-empty");
        last.weights_mut().iter_mut().for_each(|w| *w *= scale);
        last.bias_mut().iter_mut().for_each(|b| *b = *b * scale + shift);
    }
    Ok(TrainedNetwork { params, loss_trace: trace })
}

pub fn weighted_mean_sd(values: &[f64], weights: &[f64]) -> (f64, f64) {
    let total: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
    let var = values.iter().zip(weights).map(|(v, w)| w * (v - mean).powi(2)).sum::<f64>() / total;
    (mean, var.sqrt())
}
