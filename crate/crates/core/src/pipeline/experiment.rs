use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{config_hash, write_rows, Summary};
use super::split::{select_architecture, split_indices, Split, Standardizer};
use crate::conformal::{
    cqc_calibrate, evaluate_coverage, fit_quantile_net, split_conformal_interval, CalibrationSet, CqcModel,
    PredictionSet, ScoreWeighting,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_binary, MetricsReport, Weighting};
use crate::numnet::{softmax, train, BatchSize, LossKind, NetworkParams, Observations, Targets, TrainConfig};
use crate::seeds::stream_seed;
use crate::survey::{draw_two_stage_sample, generate_population, ClusterLayout, Scenario, WeightedSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageMethod {
    /// Conformalized quantile classification sets.
    #[default]
    Cqc,
    /// Split conformal intervals around a regression fit of the 0/1 response.
    Split,
}

impl std::str::FromStr for CoverageMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cqc" => Ok(CoverageMethod::Cqc),
            "split" => Ok(CoverageMethod::Split),
            other => Err(Error::Config(format!("unknown coverage method `{other}`"))),
        }
    }
}

/// Settings for the synthetic two-stage-cluster experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Population sizes `N`; one block of replicates per size.
    pub population_sizes: Vec<usize>,
    pub replicates: usize,
    /// Nominal coverage levels for the coverage study.
    pub levels: Vec<f64>,
    /// Train / architecture / test proportions of each drawn sample.
    pub fractions: [f64; 3],
    pub seed: u64,
    pub state_prob: f64,
    pub layout: ClusterLayout,
    pub architectures: Vec<Vec<usize>>,
    pub train: TrainConfig,
    pub quantile_train: TrainConfig,
    pub score_weighting: ScoreWeighting,
    pub method: CoverageMethod,
    /// Size of the fresh population on which coverage is measured.
    pub test_size: usize,
    /// Decision threshold on `P(Y = 1 | x)`.
    pub threshold: f64,
    pub metric_weighting: Weighting,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    pub workers: usize,
}

pub fn default_architectures() -> Vec<Vec<usize>> {
    vec![vec![16], vec![32, 16], vec![64, 32]]
}

/// Classifier training defaults used by the experiment runners.
pub fn default_classifier_train() -> TrainConfig {
    TrainConfig {
        epochs: 60,
        learning_rate: 2e-3,
        batch_size: BatchSize::Rows(32),
        weight_decay: 3.0,
        ..TrainConfig::default()
    }
}

pub fn default_quantile_train() -> TrainConfig {
    TrainConfig {
        hidden_widths: vec![16],
        epochs: 100,
        learning_rate: 5e-3,
        batch_size: BatchSize::Rows(64),
        standardize_targets: true,
        ..TrainConfig::default()
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::A,
            population_sizes: vec![5000],
            replicates: 20,
            levels: vec![0.8, 0.9, 0.95],
            fractions: [0.5, 0.3, 0.2],
            seed: 2024,
            state_prob: 0.8,
            layout: ClusterLayout::default(),
            architectures: default_architectures(),
            train: default_classifier_train(),
            quantile_train: default_quantile_train(),
            score_weighting: ScoreWeighting::Literal,
            method: CoverageMethod::Cqc,
            test_size: 5000,
            threshold: 0.5,
            metric_weighting: Weighting::Counts,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.population_sizes.is_empty() || self.population_sizes.contains(&0) {
            return bad("population sizes must be a nonempty list of positive integers".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return bad(format!("coverage level {l} outside (0,1)"));
        }
        if self.fractions.iter().any(|f| !(*f > 0.0)) || (self.fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("fractions {:?} must be positive and sum to 1", self.fractions));
        }
        if !(self.state_prob > 0.0 && self.state_prob <= 1.0) {
            return bad(format!("state_prob {} outside (0,1]", self.state_prob));
        }
        if self.architectures.is_empty() || self.architectures.iter().any(|a| a.contains(&0)) {
            return bad("architectures must be a nonempty list of positive widths".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} outside (0,1)", self.threshold));
        }
        if self.test_size == 0 {
            return bad("test_size must be positive".into());
        }
        self.layout.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.train.validate()?;
        self.quantile_train.validate()
    }

    /// Hash of every setting that can change results.
    pub fn hash(&self) -> Result<String> {
        config_hash(&ExperimentConfig { workers: 0, ..self.clone() })
    }

    fn replicate_key(&self, population_size: usize, replicate: usize) -> u64 {
        let scenario = match self.scenario {
            Scenario::A => 0xa,
            Scenario::B => 0xb,
        };
        stream_seed(self.seed ^ scenario, population_size as u64, replicate as u64)
    }
}

mod purpose {
    pub const POPULATION: u64 = 1;
    pub const DESIGN: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const TEST_POPULATION: u64 = 5;
    pub const QUANTILE: u64 = 6;
}

fn run_parallel<T: Send, F>(workers: usize, jobs: &[(usize, usize)], f: F) -> Result<Vec<T>>
where
    F: Fn(usize, usize) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| jobs.par_iter().map(|&(n, r)| f(n, r)).collect());
    results.into_iter().collect()
}

fn jobs(cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    cfg.population_sizes.iter().flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r))).collect()
}

fn tag(replicate: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Replicate { replicate, source: Box::new(e) }
}

/// One drawn, standardised sample and its three-way split.
pub struct PreparedSample {
    pub sample: WeightedSample,
    pub split: Split,
    pub standardizer: Standardizer,
}

/// Population, two-stage draw, split and standardisation for one replicate.
pub fn prepare_sample(cfg: &ExperimentConfig, population_size: usize, replicate: usize) -> Result<PreparedSample> {
    let key = cfg.replicate_key(population_size, replicate);
    let pop = generate_population(
        cfg.scenario,
        population_size,
        stream_seed(key, 0, purpose::POPULATION),
        &cfg.layout,
    )?;
    let mut sample = draw_two_stage_sample(cfg.state_prob, &pop, stream_seed(key, 0, purpose::DESIGN))?;
    let split = split_indices(sample.len(), cfg.fractions, stream_seed(key, 0, purpose::SPLIT))?;
    let standardizer = Standardizer::fit(&sample.data.subset(&split.train))?;
    sample.data = standardizer.transform(&sample.data);
    Ok(PreparedSample { sample, split, standardizer })
}

pub fn hidden_label(widths: &[usize]) -> String {
    widths.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

/// `P(Y = 1 | x)` from a two-output classifier.
pub fn positive_probability(net: &NetworkParams, x: &[f64]) -> Result<f64> {
    Ok(softmax(&net.forward(x)?)?[1])
}

pub fn binary_labels(ds: &Dataset) -> Result<Vec<u8>> {
    ds.labels.clone().ok_or_else(|| Error::invalid("dataset has no labels"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub scenario: Scenario,
    pub population_size: usize,
    pub replicate: usize,
    pub sample_size: usize,
    pub hidden: String,
    pub auc: f64,
    pub accuracy: f64,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub cross_entropy: f64,
    pub tn: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tp: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub scenario: Scenario,
    pub population_size: usize,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub records: Vec<ReplicateRecord>,
    pub summary: Vec<MetricSummary>,
    pub config_hash: String,
}

impl SimulationOutput {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_rows(&dir.join("simulation_replicates.csv"), &self.records)?;
        write_rows(&dir.join("simulation_summary.csv"), &self.summary)
    }

    /// Mean of `metric` over the replicates at `population_size`.
    pub fn mean(&self, population_size: usize, metric: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.population_size == population_size && s.metric == metric).map(|s| s.mean)
    }
}

fn simulate_replicate(cfg: &ExperimentConfig, hash: &str, population_size: usize, replicate: usize) -> Result<ReplicateRecord> {
    let prep = prepare_sample(cfg, population_size, replicate)?;
    let data = &prep.sample.data;
    let train_cfg = TrainConfig {
        seed: stream_seed(cfg.replicate_key(population_size, replicate), 0, purpose::TRAIN),
        ..cfg.train.clone()
    };
    let sel = select_architecture(
        &data.subset(&prep.split.train),
        &data.subset(&prep.split.architecture),
        &cfg.architectures,
        &train_cfg,
    )?;
    let test = data.subset(&prep.split.test);
    let probs = test.features.iter().map(|x| positive_probability(&sel.params, x)).collect::<Result<Vec<_>>>()?;
    let m: MetricsReport =
        evaluate_binary(&probs, &binary_labels(&test)?, &test.weights, cfg.threshold, cfg.metric_weighting)?;
    Ok(ReplicateRecord {
        scenario: cfg.scenario,
        population_size,
        replicate,
        sample_size: data.len(),
        hidden: hidden_label(&sel.config.hidden_widths),
        auc: m.auc,
        accuracy: m.accuracy,
        recall: m.recall,
        precision: m.precision,
        f1: m.f1,
        cross_entropy: m.cross_entropy,
        tn: m.confusion.tn,
        fp: m.confusion.fp,
        fn_: m.confusion.fn_,
        tp: m.confusion.tp,
        config_hash: hash.to_string(),
    })
}

/// Monte-Carlo study of classifier quality under the two-stage cluster design.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    let hash = cfg.hash()?;
    let records = run_parallel(cfg.workers, &jobs(cfg), |n, r| simulate_replicate(cfg, &hash, n, r).map_err(tag(r)))?;
    let mut summary = Vec::new();
    for &n in &cfg.population_sizes {
        let block: Vec<&ReplicateRecord> = records.iter().filter(|r| r.population_size == n).collect();
        let metrics: [(&str, fn(&ReplicateRecord) -> Option<f64>); 6] = [
            ("auc", |r| Some(r.auc)),
            ("accuracy", |r| Some(r.accuracy)),
            ("recall", |r| r.recall),
            ("precision", |r| r.precision),
            ("f1", |r| r.f1),
            ("cross_entropy", |r| Some(r.cross_entropy)),
        ];
        for (name, get) in metrics {
            let values: Vec<f64> = block.iter().filter_map(|r| get(r)).collect();
            if let Some(s) = Summary::of(&values) {
                summary.push(MetricSummary {
                    scenario: cfg.scenario,
                    population_size: n,
                    metric: name.to_string(),
                    count: s.count,
                    mean: s.mean,
                    sd: s.sd,
                    config_hash: hash.clone(),
                });
            }
        }
    }
    Ok(SimulationOutput { records, summary, config_hash: hash })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRecord {
    pub method: CoverageMethod,
    pub scenario: Scenario,
    pub population_size: usize,
    pub level: f64,
    pub replicate: usize,
    pub n_calibration: usize,
    pub threshold: f64,
    pub coverage: f64,
    pub mean_set_size: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub method: CoverageMethod,
    pub scenario: Scenario,
    pub population_size: usize,
    pub level: f64,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub mean_set_size: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageOutput {
    pub records: Vec<CoverageRecord>,
    pub summary: Vec<CoverageSummary>,
    pub config_hash: String,
}

impl CoverageOutput {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_rows(&dir.join("coverage_replicates.csv"), &self.records)?;
        write_rows(&dir.join("coverage_summary.csv"), &self.summary)
    }

    pub fn cell(&self, population_size: usize, level: f64) -> Option<&CoverageSummary> {
        self.summary.iter().find(|s| s.population_size == population_size && s.level == level)
    }
}

fn coverage_replicate(
    cfg: &ExperimentConfig,
    hash: &str,
    population_size: usize,
    replicate: usize,
) -> Result<Vec<CoverageRecord>> {
    let key = cfg.replicate_key(population_size, replicate);
    let prep = prepare_sample(cfg, population_size, replicate)?;
    let mut test_pop = generate_population(
        cfg.scenario,
        cfg.test_size,
        stream_seed(key, 0, purpose::TEST_POPULATION),
        &cfg.layout,
    )?;
    test_pop = prep.standardizer.transform(&test_pop);
    let truths: Vec<f64> = binary_labels(&test_pop)?.iter().map(|&y| f64::from(y)).collect();
    let train_cfg = TrainConfig { seed: stream_seed(key, 0, purpose::TRAIN), ..cfg.train.clone() };
    let split = &prep.split;
    let record = |level: f64, threshold: f64, sets: &[PredictionSet]| -> Result<CoverageRecord> {
        let cov = evaluate_coverage(sets, &truths, &test_pop.weights, false)?;
        Ok(CoverageRecord {
            method: cfg.method,
            scenario: cfg.scenario,
            population_size,
            level,
            replicate,
            n_calibration: split.test.len(),
            threshold,
            coverage: cov.empirical_coverage,
            mean_set_size: cov.mean_set_size,
            config_hash: hash.to_string(),
        })
    };

    match cfg.method {
        CoverageMethod::Cqc => {
            let data = &prep.sample.data;
            let score_net = select_architecture(
                &data.subset(&split.train),
                &data.subset(&split.architecture),
                &cfg.architectures,
                &train_cfg,
            )?
            .params;
            let q_cfg = TrainConfig { seed: stream_seed(key, 0, purpose::QUANTILE), ..cfg.quantile_train.clone() };
            cfg.levels
                .iter()
                .map(|&level| {
                    let alpha = 1.0 - level;
                    let quantile_net = fit_quantile_net(
                        &score_net,
                        &prep.sample,
                        &split.architecture,
                        alpha,
                        cfg.score_weighting,
                        &q_cfg,
                    )?;
                    let model = CqcModel {
                        score_net: score_net.clone(),
                        quantile_net,
                        threshold: None,
                        alpha,
                        class_count: 2,
                        score_weighting: cfg.score_weighting,
                    };
                    let model = cqc_calibrate(&model, &prep.sample, &split.test)?;
                    let sets =
                        test_pop.features.iter().map(|x| model.predict_set(x)).collect::<Result<Vec<_>>>()?;
                    record(level, model.threshold.unwrap_or(f64::NAN), &sets)
                })
                .collect()
        }
        CoverageMethod::Split => {
            let data = &prep.sample.data;
            let fit_rows: Vec<usize> = split.train.iter().chain(&split.architecture).copied().collect();
            let fit = data.subset(&fit_rows);
            let y: Vec<f64> = binary_labels(&fit)?.iter().map(|&v| f64::from(v)).collect();
            let obs = Observations::new(&fit.features, Targets::Values(&y), &fit.weights)?;
            let reg_cfg = TrainConfig {
                loss: LossKind::WeightedMse,
                hidden_widths: cfg.architectures[0].clone(),
                ..train_cfg
            };
            let model = train(&obs, &reg_cfg)?.params;
            let cal = data.subset(&split.test);
            let cal_y: Vec<f64> = binary_labels(&cal)?.iter().map(|&v| f64::from(v)).collect();
            let calibration = CalibrationSet::from_model(&model, &cal.features, &cal_y, &cal.weights)?;
            cfg.levels
                .iter()
                .map(|&level| {
                    let sets = test_pop
                        .features
                        .iter()
                        .map(|x| split_conformal_interval(&model, &calibration, x, 1.0 - level))
                        .collect::<Result<Vec<_>>>()?;
                    let half_width = match sets.first().map(|s| s.size()) {
                        Some(w) => w / 2.0,
                        None => f64::NAN,
                    };
                    record(level, half_width, &sets)
                })
                .collect()
        }
    }
}

/// Monte-Carlo coverage study on fresh populations.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<CoverageOutput> {
    cfg.validate()?;
    if cfg.levels.is_empty() {
        return Err(Error::Config("at least one coverage level is required".into()));
    }
    let hash = cfg.hash()?;
    let blocks = run_parallel(cfg.workers, &jobs(cfg), |n, r| coverage_replicate(cfg, &hash, n, r).map_err(tag(r)))?;
    // order rows by (N, level, replicate)
    let mut records: Vec<CoverageRecord> = Vec::with_capacity(blocks.len() * cfg.levels.len());
    for &n in &cfg.population_sizes {
        for (li, _) in cfg.levels.iter().enumerate() {
            for b in &blocks {
                if b[li].population_size == n {
                    records.push(b[li].clone());
                }
            }
        }
    }
    let mut summary = Vec::new();
    for &n in &cfg.population_sizes {
        for &level in &cfg.levels {
            let cell: Vec<&CoverageRecord> =
                records.iter().filter(|r| r.population_size == n && r.level == level).collect();
            let cov: Vec<f64> = cell.iter().map(|r| r.coverage).collect();
            let s = Summary::of(&cov).expect("replicates > 0");
            summary.push(CoverageSummary {
                method: cfg.method,
                scenario: cfg.scenario,
                population_size: n,
                level,
                count: s.count,
                mean: s.mean,
                median: s.median,
                q1: s.q1,
                q3: s.q3,
                iqr: s.iqr(),
                mean_set_size: cell.iter().map(|r| r.mean_set_size).sum::<f64>() / cell.len() as f64,
                config_hash: hash.clone(),
            });
        }
    }
    Ok(CoverageOutput { records, summary, config_hash: hash })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            population_sizes: vec![1500],
            replicates: 2,
            architectures: vec![vec![4]],
            train: TrainConfig { epochs: 5, ..default_classifier_train() },
            quantile_train: TrainConfig { epochs: 5, ..default_quantile_train() },
            test_size: 200,
            workers: 2,
            ..Default::default()
        }
    }

    #[test]
    fn config_json_roundtrip_and_validation() {
        let c = ExperimentConfig::default();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"scenario":"b","replicates":3}"#).unwrap();
        assert_eq!((partial.scenario, partial.replicates), (Scenario::B, 3));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus":1}"#).is_err());
        assert!(ExperimentConfig { levels: vec![1.0], ..c.clone() }.validate().is_err());
        assert!(ExperimentConfig { replicates: 0, ..c.clone() }.validate().is_err());
        assert_eq!(ExperimentConfig { workers: 7, ..c.clone() }.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn simulation_is_deterministic_across_worker_counts() {
        let a = run_simulation(&small()).unwrap();
        let b = run_simulation(&ExperimentConfig { workers: 1, ..small() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 2);
        assert!(a.records.iter().all(|r| (0.0..=1.0).contains(&r.auc)));
    }

    #[test]
    fn coverage_rows_per_cell() {
        let out = run_coverage(&small()).unwrap();
        assert_eq!(out.records.len(), 2 * 3);
        assert_eq!(out.summary.len(), 3);
        assert!(out.summary.iter().all(|s| s.count == 2));
        let split = run_coverage(&ExperimentConfig { method: CoverageMethod::Split, ..small() }).unwrap();
        assert_eq!(split.records.len(), 6);
    }
}
