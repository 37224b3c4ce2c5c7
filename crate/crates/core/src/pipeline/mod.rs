//! Data ingestion, model fitting workflows and experiment drivers.

pub mod csv_io;
pub mod experiment;
pub mod nhanes;
pub mod report;
pub mod split;

pub use csv_io::{load_csv, CsvSchema, LabelSource, LoadReport, Loaded, RawTable, RowIssue};
pub use experiment::{
    prepare_sample, run_coverage, run_simulation, CoverageMethod, CoverageOutput, CoverageRecord, CoverageSummary,
    ExperimentConfig, MetricSummary, ReplicateRecord, SimulationOutput,
};
pub use nhanes::{
    ada_label, load_nhanes, model_spec, run_nhanes, ModelReport, ModelSpec, NhanesConfig, NhanesOutput, RecordScore,
    Variable, MODEL_IDS,
};
pub use report::{config_hash, Summary};
pub use split::{select_architecture, split_dataset, split_indices, Selection, Split, Standardizer};
