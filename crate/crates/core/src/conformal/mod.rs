//! Split conformal prediction adapted to survey weights: regression intervals,
//! covariate-shift weighted intervals, the CQC set-valued classifier and
//! coverage evaluation.

mod cqc;
mod regression;
mod sets;

pub use cqc::{
    calibration_level, cqc_calibrate, cqc_fit, cqc_predict_set, cqc_threshold, fit_quantile_net, fit_score_net,
    record_scores, CqcConfig, CqcModel, ScoreWeighting, ARTIFACT_VERSION,
};
pub use regression::{
    residual_score, split_conformal_interval, survey_conformal_interval, weighted_conformal_interval,
    CalibrationSet, PointPredictor,
};
pub use sets::{coverage_gap_bound, evaluate_coverage, CoverageResult, PredictionSet, Region};
