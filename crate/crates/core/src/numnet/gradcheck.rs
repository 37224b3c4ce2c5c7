//! Central finite-difference check of the backprop gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::loss::{evaluate, loss_value, LossKind, Observations, Targets};
use super::network::NetworkParams;
use crate::error::Result;

/// Central-difference gradient of `kind` at `params`, one coordinate at a time.
pub fn finite_difference_gradient(
    params: &NetworkParams,
    obs: &Observations<'_>,
    kind: LossKind,
    step: f64,
) -> Result<Vec<f64>> {
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut flat = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        flat[i] = base[i] + step;
        probe.set_flat(&flat)?;
        let plus = loss_value(&probe, obs, kind)?;
        flat[i] = base[i] - step;
        probe.set_flat(&flat)?;
        let minus = loss_value(&probe, obs, kind)?;
        flat[i] = base[i];
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckCase {
    pub case: usize,
    pub loss: LossKind,
    pub param_count: usize,
    pub relative_error: f64,
}

/// Random small networks (at most 200 parameters) checked against finite
/// differences for every loss kind.
pub fn gradient_battery(networks: usize, seed: u64, step: f64) -> Result<Vec<GradCheckCase>> {
    let kinds = [
        LossKind::WeightedCrossEntropy,
        LossKind::Pinball { alpha: 0.1 },
        LossKind::Pinball { alpha: 0.5 },
        LossKind::Pinball { alpha: 0.9 },
        LossKind::WeightedMse,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for case in 0..networks {
        let input = rng.random_range(1..=4);
        let depth = rng.random_range(0..=2);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=6)).collect();
        let n = rng.random_range(3..=8);
        let features: Vec<Vec<f64>> =
            (0..n).map(|_| (0..input).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..5.0)).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let values: Vec<f64> = (0..n).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let net_seed = rng.random::<u64>();
        for kind in kinds {
            let (obs, k) = match kind {
                LossKind::WeightedCrossEntropy => {
                    (Observations::new(&features, Targets::Classes { labels: &labels, class_count: 3 }, &weights)?, 3)
                }
                _ => (Observations::new(&features, Targets::Values(&values), &weights)?, 1),
            };
            let mut params = NetworkParams::init(input, &hidden, k, net_seed)?;
            // nonzero biases so kinks are not hit at the origin
            let mut flat = params.to_flat();
            for v in flat.iter_mut() {
                *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
            params.set_flat(&flat)?;
            debug_assert!(params.param_count() <= 200);
            let analytic = evaluate(&params, &obs, kind)?.gradient;
            let numeric = finite_difference_gradient(&params, &obs, kind, step)?;
            out.push(GradCheckCase {
                case,
                loss: kind,
                param_count: params.param_count(),
                relative_error: relative_error(&analytic, &numeric),
            });
        }
    }
    Ok(out)
}
