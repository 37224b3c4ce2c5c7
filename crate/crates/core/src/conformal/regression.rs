use super::sets::PredictionSet;
use crate::error::{Error, Result};
use crate::numnet::NetworkParams;
use crate::survey::{covariate_shift_weights, WeightedEmpirical};

/// A fitted point predictor `m̃(x)`.
pub trait PointPredictor {
    fn predict(&self, x: &[f64]) -> Result<f64>;
}

impl PointPredictor for NetworkParams {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.predict_scalar(x)
    }
}

impl<F: Fn(&[f64]) -> f64> PointPredictor for F {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self(x))
    }
}

/// Absolute-residual nonconformity `|y − m̃(x)|`.
pub fn residual_score<M: PointPredictor + ?Sized>(model: &M, x: &[f64], y: f64) -> Result<f64> {
    Ok((y - model.predict(x)?).abs())
}

/// Held-out calibration points with their residual scores and survey weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    pub features: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
    pub survey_weights: Vec<f64>,
}

impl CalibrationSet {
    pub fn from_model<M: PointPredictor + ?Sized>(
        model: &M,
        features: &[Vec<f64>],
        responses: &[f64],
        survey_weights: &[f64],
    ) -> Result<Self> {
        if responses.len() != features.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), got: responses.len() });
        }
        if survey_weights.len() != features.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), got: survey_weights.len() });
        }
        if features.is_empty() {
            return Err(Error::invalid("calibration set is empty"));
        }
        let scores = features
            .iter()
            .zip(responses)
            .map(|(x, &y)| residual_score(model, x, y))
            .collect::<Result<Vec<_>>>()?;
        Ok(CalibrationSet { features: features.to_vec(), scores, survey_weights: survey_weights.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

fn interval<M: PointPredictor + ?Sized>(model: &M, x: &[f64], q: f64, alpha: f64) -> Result<PredictionSet> {
    if q.is_infinite() {
        return Ok(PredictionSet::interval(f64::NEG_INFINITY, f64::INFINITY, alpha));
    }
    let centre = model.predict(x)?;
    Ok(PredictionSet::interval(centre - q, centre + q, alpha))
}

/// Classical split conformal interval: `m̃(x) ± q`, `q` the `(1−α)` quantile of
/// `{scores} ∪ {+∞}` under uniform mass `1/(n+1)`.
pub fn split_conformal_interval<M: PointPredictor + ?Sized>(
    model: &M,
    calibration: &CalibrationSet,
    x_new: &[f64],
    alpha: f64,
) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    if calibration.is_empty() {
        return Err(Error::invalid("calibration set is empty"));
    }
    let n = calibration.len();
    let dist = WeightedEmpirical::with_infinity(&calibration.scores, &vec![1.0; n], 1.0)?;
    interval(model, x_new, dist.quantile(1.0 - alpha)?, alpha)
}

/// Covariate-shift conformal interval: atoms carry `p_i^w(x)` and the `+∞`
/// atom carries `p_{n+1}^w(x)`, with `w` the likelihood ratio `w_fn`.
pub fn weighted_conformal_interval<M, W>(
    model: &M,
    calibration: &CalibrationSet,
    x_new: &[f64],
    w_fn: W,
    alpha: f64,
) -> Result<PredictionSet>
where
    M: PointPredictor + ?Sized,
    W: Fn(&[f64]) -> f64,
{
    let train_w: Vec<f64> = calibration.features.iter().map(|x| w_fn(x)).collect();
    weighted_interval(model, calibration, x_new, &train_w, w_fn(x_new), alpha)
}

/// Weighted interval using the calibration survey weights and a supplied weight
/// for the new point.
pub fn survey_conformal_interval<M: PointPredictor + ?Sized>(
    model: &M,
    calibration: &CalibrationSet,
    x_new: &[f64],
    test_weight: f64,
    alpha: f64,
) -> Result<PredictionSet> {
    weighted_interval(model, calibration, x_new, &calibration.survey_weights, test_weight, alpha)
}

fn weighted_interval<M: PointPredictor + ?Sized>(
    model: &M,
    calibration: &CalibrationSet,
    x_new: &[f64],
    train_w: &[f64],
    test_w: f64,
    alpha: f64,
) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    if calibration.is_empty() {
        return Err(Error::invalid("calibration set is empty"));
    }
    let p = covariate_shift_weights(train_w, test_w)?;
    let n = calibration.len();
    let dist = WeightedEmpirical::with_infinity(&calibration.scores, &p[..n], p[n])?;
    interval(model, x_new, dist.quantile(1.0 - alpha)?, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::Region;

    fn zero_model(_: &[f64]) -> f64 {
        0.0
    }

    fn cal(scores: &[f64]) -> CalibrationSet {
        CalibrationSet {
            features: scores.iter().map(|_| vec![0.0]).collect(),
            scores: scores.to_vec(),
            survey_weights: vec![1.0; scores.len()],
        }
    }

    #[test]
    fn residuals() {
        let two = |_: &[f64]| 2.0;
        assert_eq!(residual_score(&two, &[0.0], 2.0).unwrap(), 0.0);
        assert_eq!(residual_score(&two, &[0.0], 5.0).unwrap(), 3.0);
    }

    #[test]
    fn split_rank_rule() {
        let c = cal(&[5.0, 3.0, 1.0, 9.0, 2.0, 8.0, 4.0, 7.0, 6.0]);
        let s = split_conformal_interval(&zero_model, &c, &[0.0], 0.1).unwrap();
        assert_eq!(s.region, Region::Interval { lo: -9.0, hi: 9.0 });
    }

    #[test]
    fn tiny_alpha_gives_whole_line() {
        let c = cal(&[1.0, 2.0, 3.0]);
        let s = split_conformal_interval(&zero_model, &c, &[0.0], 0.01).unwrap();
        assert_eq!(s.region, Region::Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY });
    }

    #[test]
    fn heavy_test_weight_gives_whole_line() {
        let c = cal(&[1.0]);
        let w = |x: &[f64]| if x[0] == 1.0 { 3.0 } else { 1.0 };
        let s = weighted_conformal_interval(&zero_model, &c, &[1.0], w, 0.1).unwrap();
        assert_eq!(s.size(), f64::INFINITY);
    }

    #[test]
    fn unit_weights_reduce_to_split() {
        let c = cal(&[0.3, 1.7, 0.2, 4.0, 2.2]);
        for alpha in [0.1, 0.2, 0.35, 0.5] {
            let a = split_conformal_interval(&zero_model, &c, &[0.0], alpha).unwrap();
            let b = weighted_conformal_interval(&zero_model, &c, &[0.0], |_| 1.0, alpha).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn errors() {
        let empty = CalibrationSet { features: vec![], scores: vec![], survey_weights: vec![] };
        assert!(split_conformal_interval(&zero_model, &empty, &[0.0], 0.1).is_err());
        assert!(split_conformal_interval(&zero_model, &cal(&[1.0]), &[0.0], 1.0).is_err());
        assert!(weighted_conformal_interval(&zero_model, &cal(&[1.0]), &[0.0], |_| 0.0, 0.1).is_err());
    }
}
