//! Sampling designs, Horvitz–Thompson estimation, weighted empirical
//! distributions and the two-stage cluster simulator.

mod design;
mod empirical;
mod estimator;
mod population;

pub use design::{draw_sample, draw_two_stage_sample, DesignKind, SurveyDesign, WeightedSample};
pub use empirical::{covariate_shift_weights, oracle, weighted_quantile, WeightedEmpirical, CUMULATIVE_TOLERANCE};
pub use estimator::{ht_cdf, ht_mean};
pub use population::{generate_population, ClusterLayout, Scenario, COVARIATE_DIM};
