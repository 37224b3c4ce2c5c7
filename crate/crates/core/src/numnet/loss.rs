use serde::{Deserialize, Serialize};

use super::network::{log_softmax, softmax_in_place, NetworkParams};
use crate::error::{Error, Result};

/// Training targets: class indices for classification, reals for regression losses.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes { labels: &'a [usize], class_count: usize },
    Values(&'a [f64]),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Values(v) => v.len(),
        }
    }
}

/// Borrowed view of weighted training observations.
#[derive(Debug, Clone, Copy)]
pub struct Observations<'a> {
    pub features: &'a [Vec<f64>],
    pub targets: Targets<'a>,
    pub weights: &'a [f64],
}

impl<'a> Observations<'a> {
    pub fn new(features: &'a [Vec<f64>], targets: Targets<'a>, weights: &'a [f64]) -> Result<Self> {
        let n = features.len();
        if targets.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: targets.len() });
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!("weights must be strictly positive, got {w}")));
        }
        if let Targets::Classes { labels, class_count } = targets {
            if let Some(y) = labels.iter().find(|&&y| y >= class_count) {
                return Err(Error::invalid(format!("label {y} outside 0..{class_count}")));
            }
        }
        Ok(Observations { features, targets, weights })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossKind {
    WeightedCrossEntropy,
    Pinball { alpha: f64 },
    WeightedMse,
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        if let LossKind::Pinball { alpha } = self {
            check_alpha(*alpha)?;
        }
        Ok(())
    }
}

/// Loss value together with its gradient in flat parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub gradient: Vec<f64>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("pinball level must lie in (0,1), got {alpha}")))
    }
}

/// `(1-α)·max(-t,0) + α·max(t,0)`
pub fn pinball_loss(t: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(pinball_unchecked(t, alpha))
}

#[inline]
fn pinball_unchecked(t: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * (-t).max(0.0) + alpha * t.max(0.0)
}

/// `-Σ_i w_i log f_{y_i}(x_i)` with its backprop gradient.
pub fn weighted_cross_entropy(params: &NetworkParams, obs: &Observations<'_>) -> Result<LossValue> {
    evaluate(params, obs, LossKind::WeightedCrossEntropy)
}

/// `Σ_i w_i (y_i - ŷ_i)^2` with its backprop gradient.
pub fn weighted_mse(params: &NetworkParams, obs: &Observations<'_>) -> Result<LossValue> {
    evaluate(params, obs, LossKind::WeightedMse)
}

/// `Σ_i w_i ρ_α(y_i - ŷ_i)` with its backprop (sub)gradient.
pub fn weighted_pinball(params: &NetworkParams, obs: &Observations<'_>, alpha: f64) -> Result<LossValue> {
    evaluate(params, obs, LossKind::Pinball { alpha })
}

/// Evaluates any supported loss over all observations.
pub fn evaluate(params: &NetworkParams, obs: &Observations<'_>, kind: LossKind) -> Result<LossValue> {
    kind.validate()?;
    check_compatible(params, obs)?;
    let mut engine = Backprop::new(params);
    let mut gradient = vec![0.0; params.param_count()];
    let value = engine.accumulate(params, obs, kind, 0..obs.len(), &mut gradient);
    Ok(LossValue { value, gradient })
}

/// Loss value only, no gradient.
pub fn loss_value(params: &NetworkParams, obs: &Observations<'_>, kind: LossKind) -> Result<f64> {
    kind.validate()?;
    check_compatible(params, obs)?;
    let mut total = 0.0;
    for i in 0..obs.len() {
        let z = params.forward(&obs.features[i])?;
        total += sample_loss(&z, obs, i, kind);
    }
    Ok(total)
}

fn sample_loss(z: &[f64], obs: &Observations<'_>, i: usize, kind: LossKind) -> f64 {
    let w = obs.weights[i];
    match (kind, obs.targets) {
        (LossKind::WeightedCrossEntropy, Targets::Classes { labels, .. }) => -w * log_softmax(z)[labels[i]],
        (LossKind::WeightedMse, Targets::Values(y)) => w * (y[i] - z[0]).powi(2),
        (LossKind::Pinball { alpha }, Targets::Values(y)) => w * pinball_unchecked(y[i] - z[0], alpha),
        _ => unreachable!("checked by check_compatible"),
    }
}

pub(crate) fn check_compatible(params: &NetworkParams, obs: &Observations<'_>) -> Result<()> {
    if let Some(row) = obs.features.iter().find(|r| r.len() != params.input_dim()) {
        return Err(Error::DimensionMismatch { expected: params.input_dim(), got: row.len() });
    }
    match obs.targets {
        Targets::Classes { class_count, .. } => {
            if class_count < 2 {
                return Err(Error::invalid("cross-entropy needs at least two classes"));
            }
            if params.output_dim() != class_count {
                return Err(Error::DimensionMismatch { expected: class_count, got: params.output_dim() });
            }
        }
        Targets::Values(_) => {
            if params.output_dim() != 1 {
                return Err(Error::DimensionMismatch { expected: 1, got: params.output_dim() });
            }
        }
    }
    Ok(())
}

/// Reusable activation buffers for per-sample forward/backward passes.
pub(crate) struct Backprop {
    // pre-activations per layer
    pre: Vec<Vec<f64>>,
    // post-activations per layer (input to the next layer)
    post: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Backprop {
    pub(crate) fn new(params: &NetworkParams) -> Self {
        let widths: Vec<usize> = params.layers().iter().map(|l| l.out_dim()).collect();
        Backprop {
            pre: widths.iter().map(|&w| vec![0.0; w]).collect(),
            post: widths.iter().map(|&w| vec![0.0; w]).collect(),
            delta: widths.iter().map(|&w| vec![0.0; w]).collect(),
        }
    }

    /// Adds the gradient of the loss over `rows` into `grad` and returns the loss over `rows`.
    pub(crate) fn accumulate(
        &mut self,
        params: &NetworkParams,
        obs: &Observations<'_>,
        kind: LossKind,
        rows: impl IntoIterator<Item = usize>,
        grad: &mut [f64],
    ) -> f64 {
        let layers = params.layers();
        let last = layers.len() - 1;
        let mut offsets = Vec::with_capacity(layers.len());
        let mut off = 0;
        for layer in layers {
            offsets.push(off);
            off += layer.in_dim() * layer.out_dim() + layer.out_dim();
        }
        let mut total = 0.0;
        for i in rows {
            let x = &obs.features[i];
            for (l, layer) in layers.iter().enumerate() {
                let input: &[f64] = if l == 0 { x } else { &self.post[l - 1] };
                layer.affine_into(input, &mut self.pre[l]);
                let (pre, post) = (&self.pre[l], &mut self.post[l]);
                if l < last {
                    for (p, &z) in post.iter_mut().zip(pre) {
                        *p = z.max(0.0);
                    }
                } else {
                    post.copy_from_slice(pre);
                }
            }

            let w = obs.weights[i];
            let out = &self.pre[last];
            let d = &mut self.delta[last];
            match (kind, obs.targets) {
                (LossKind::WeightedCrossEntropy, Targets::Classes { labels, .. }) => {
                    let y = labels[i];
                    total -= w * log_softmax(out)[y];
                    d.copy_from_slice(out);
                    softmax_in_place(d);
                    d[y] -= 1.0;
                    for v in d.iter_mut() {
                        *v *= w;
                    }
                }
                (LossKind::WeightedMse, Targets::Values(y)) => {
                    let r = y[i] - out[0];
                    total += w * r * r;
                    d[0] = -2.0 * w * r;
                }
                (LossKind::Pinball { alpha }, Targets::Values(y)) => {
                    let t = y[i] - out[0];
                    total += w * pinball_unchecked(t, alpha);
                    d[0] = if t > 0.0 {
                        -alpha * w
                    } else if t < 0.0 {
                        (1.0 - alpha) * w
                    } else {
                        0.0
                    };
                }
                _ => unreachable!("checked by check_compatible"),
            }

            // walk layers backwards, writing parameter gradients in flat order
            for l in (0..layers.len()).rev() {
                let layer = &layers[l];
                let input: &[f64] = if l == 0 { x } else { &self.post[l - 1] };
                let (n_in, n_out) = (layer.in_dim(), layer.out_dim());
                let base = offsets[l];
                let (gw, gb) = grad[base..base + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                let delta = &self.delta[l];
                for (r, &dr) in delta.iter().enumerate() {
                    if dr == 0.0 {
                        continue;
                    }
                    for (g, &a) in gw[r * n_in..(r + 1) * n_in].iter_mut().zip(input) {
                        *g += dr * a;
                    }
                    gb[r] += dr;
                }
                if l > 0 {
                    let (below, above) = self.delta.split_at_mut(l);
                    let prev = &mut below[l - 1];
                    prev.iter_mut().for_each(|v| *v = 0.0);
                    let wm = layer.weights_row_major();
                    for (r, &dr) in above[0].iter().enumerate() {
                        if dr == 0.0 {
                            continue;
                        }
                        for (p, &wv) in prev.iter_mut().zip(&wm[r * n_in..(r + 1) * n_in]) {
                            *p += wv * dr;
                        }
                    }
                    for (p, &z) in prev.iter_mut().zip(&self.pre[l - 1]) {
                        if z <= 0.0 {
                            *p = 0.0;
                        }
                    }
                }
            }
        }
        total
    }
}
