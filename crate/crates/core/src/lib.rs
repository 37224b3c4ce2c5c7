//! Survey-weighted neural networks and survey-adapted conformal prediction.
//!
//! - [`numnet`]: feed-forward ReLU networks, weighted losses, backprop, Adam.
//! - [`survey`]: designs, Horvitz–Thompson estimation, weighted quantiles, the
//!   two-stage cluster simulator.
//! - [`metrics`]: weighted AUC, confusion metrics, weighted log loss.
//! - [`conformal`]: split/weighted conformal intervals and CQC prediction sets.
//! - [`pipeline`]: CSV ingestion, the NHANES model suite and experiment runners.

pub mod conformal;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod numnet;
pub mod pipeline;
pub mod seeds;
pub mod survey;

pub use conformal::{CqcModel, PredictionSet};
pub use dataset::{ClusterLabel, Dataset};
pub use error::{Error, ErrorKind, Result};
pub use metrics::MetricsReport;
pub use numnet::{NetworkParams, TrainConfig};
pub use survey::{SurveyDesign, WeightedSample};
