use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::csv_io::{CsvSchema, LoadReport, RawTable};
use super::experiment::{binary_labels, default_architectures, default_classifier_train, default_quantile_train, hidden_label, positive_probability};
use super::report::{config_hash, write_rows, Summary};
use super::split::{select_architecture, split_indices, Standardizer};
use crate::conformal::{cqc_calibrate, evaluate_coverage, fit_quantile_net, CqcModel, ScoreWeighting};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_binary, Confusion, MetricsReport, Weighting};
use crate::numnet::TrainConfig;
use crate::seeds::stream_seed;
use crate::survey::WeightedSample;

pub const FPG_CUTOFF: f64 = 126.0;
pub const HBA1C_CUTOFF: f64 = 6.5;

/// ADA diabetes status: fasting glucose ≥ 126 mg/dL, HbA1c ≥ 6.5 %, or a prior
/// diagnosis. Missing inputs count as negative unless all three are missing.
pub fn ada_label(fpg: Option<f64>, hba1c: Option<f64>, prior_dx: Option<bool>) -> Result<u8> {
    if fpg.is_none() && hba1c.is_none() && prior_dx.is_none() {
        return Err(Error::invalid("no glucose, HbA1c or diagnosis recorded"));
    }
    let positive =
        fpg.is_some_and(|v| v >= FPG_CUTOFF) || hba1c.is_some_and(|v| v >= HBA1C_CUTOFF) || prior_dx == Some(true);
    Ok(u8::from(positive))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variable {
    Age,
    Gender,
    Height,
    Weight,
    Bmi,
    Waist,
    DiastolicBp,
    SystolicBp,
    Pulse,
    Cholesterol,
    Triglycerides,
    Glucose,
    Hba1c,
}

impl Variable {
    pub fn column(self) -> &'static str {
        match self {
            Variable::Age => "age",
            Variable::Gender => "gender",
            Variable::Height => "height",
            Variable::Weight => "weight_kg",
            Variable::Bmi => "bmi",
            Variable::Waist => "waist",
            Variable::DiastolicBp => "dbp",
            Variable::SystolicBp => "sbp",
            Variable::Pulse => "pulse",
            Variable::Cholesterol => "cholesterol",
            Variable::Triglycerides => "triglycerides",
            Variable::Glucose => "glucose",
            Variable::Hba1c => "hba1c",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub id: u8,
    pub variables: Vec<Variable>,
    /// Approximate USD cost of the laboratory measurements.
    pub cost: f64,
}

impl ModelSpec {
    pub fn columns(&self) -> Vec<&'static str> {
        self.variables.iter().map(|v| v.column()).collect()
    }
}

pub const MODEL_IDS: std::ops::RangeInclusive<u8> = 1..=7;

/// The seven nested covariate sets, from demographics only up to both glucose markers.
pub fn model_spec(id: u8) -> Result<ModelSpec> {
    use Variable::*;
    let body = [Height, Weight, Bmi, Waist, DiastolicBp, SystolicBp, Pulse];
    let model3: Vec<Variable> = [Age].into_iter().chain(body).chain([Gender]).collect();
    let model4: Vec<Variable> =
        [Age].into_iter().chain(body).chain([Cholesterol, Triglycerides, Gender]).collect();
    let with = |extra: &[Variable]| model4.iter().copied().chain(extra.iter().copied()).collect::<Vec<_>>();
    let (variables, cost) = match id {
        1 => (vec![Age, Gender], 0.0),
        2 => (body.to_vec(), 0.0),
        3 => (model3, 0.0),
        4 => (model4.clone(), 0.5),
        5 => (with(&[Hba1c]), 4.5),
        6 => (with(&[Glucose]), 2.1),
        7 => (with(&[Glucose, Hba1c]), 6.1),
        other => return Err(Error::Config(format!("unknown model {other}; expected 1..7"))),
    };
    Ok(ModelSpec { id, variables, cost })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NhanesConfig {
    pub data: PathBuf,
    pub models: Vec<u8>,
    /// Nominal coverage of the CQC sets.
    pub level: f64,
    pub score_weighting: ScoreWeighting,
    /// Random train/architecture/test re-splits per model.
    pub repeats: usize,
    pub fractions: [f64; 3],
    pub seed: u64,
    pub architectures: Vec<Vec<usize>>,
    pub train: TrainConfig,
    pub quantile_train: TrainConfig,
    pub threshold: f64,
    pub metric_weighting: Weighting,
}

impl Default for NhanesConfig {
    fn default() -> Self {
        NhanesConfig {
            data: PathBuf::new(),
            models: MODEL_IDS.collect(),
            level: 0.95,
            score_weighting: ScoreWeighting::Literal,
            repeats: 10,
            fractions: [0.5, 0.3, 0.2],
            seed: 2024,
            architectures: default_architectures(),
            train: default_classifier_train(),
            quantile_train: default_quantile_train(),
            threshold: 0.5,
            metric_weighting: Weighting::Survey,
        }
    }
}

impl NhanesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("no models requested".into()));
        }
        for &m in &self.models {
            model_spec(m)?;
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("coverage level {} outside (0,1)", self.level)));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be positive".into()));
        }
        if self.architectures.is_empty() {
            return Err(Error::Config("no candidate architectures".into()));
        }
        self.train.validate()?;
        self.quantile_train.validate()
    }
}

/// Covariates exported next to the per-record scores.
pub const EXPORT_COLUMNS: [&str; 3] = ["glucose", "pulse", "age"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformalSummary {
    pub level: f64,
    pub threshold: f64,
    /// Survey-weighted coverage on the held-out half of the test split.
    pub coverage: f64,
    pub mean_set_size: f64,
    pub n_calibration: usize,
    pub n_eval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub model: u8,
    pub cost: f64,
    pub variables: Vec<&'static str>,
    /// Metrics averaged over the re-splits.
    pub metrics: MetricsReport,
    pub auc_sd: f64,
    pub auc_per_repeat: Vec<f64>,
    pub hidden_per_repeat: Vec<String>,
    pub conformal: ConformalSummary,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordScore {
    pub id: String,
    pub model: u8,
    pub log_prob_positive: f64,
    pub set_size: usize,
    pub glucose: f64,
    pub pulse: f64,
    pub age: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NhanesOutput {
    pub load: LoadReport,
    pub rows: usize,
    pub age_range: (f64, f64),
    pub reports: Vec<ModelReport>,
    pub scores: Vec<RecordScore>,
    pub artifacts: Vec<(u8, CqcModel)>,
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    model: u8,
    cost: f64,
    auc: f64,
    auc_sd: f64,
    accuracy: f64,
    recall: Option<f64>,
    precision: Option<f64>,
    f1: Option<f64>,
    cross_entropy: f64,
    coverage: f64,
    mean_set_size: f64,
    config_hash: &'a str,
}

impl NhanesOutput {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("nhanes_metrics.json"), serde_json::to_string_pretty(&self.reports)?)?;
        let rows: Vec<MetricsRow> = self
            .reports
            .iter()
            .map(|r| MetricsRow {
                model: r.model,
                cost: r.cost,
                auc: r.metrics.auc,
                auc_sd: r.auc_sd,
                accuracy: r.metrics.accuracy,
                recall: r.metrics.recall,
                precision: r.metrics.precision,
                f1: r.metrics.f1,
                cross_entropy: r.metrics.cross_entropy,
                coverage: r.conformal.coverage,
                mean_set_size: r.conformal.mean_set_size,
                config_hash: &r.config_hash,
            })
            .collect();
        write_rows(&dir.join("nhanes_metrics.csv"), &rows)?;
        write_rows(&dir.join("nhanes_scores.csv"), &self.scores)?;
        for (id, model) in &self.artifacts {
            model.save(&dir.join(format!("cqc_model_{id}.json")))?;
        }
        Ok(())
    }

    pub fn report(&self, model: u8) -> Option<&ModelReport> {
        self.reports.iter().find(|r| r.model == model)
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn average(reports: &[MetricsReport]) -> MetricsReport {
    let n = reports.len() as f64;
    let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    MetricsReport {
        auc: avg(|r| r.auc),
        accuracy: avg(|r| r.accuracy),
        recall: mean_of(reports.iter().map(|r| r.recall)),
        precision: mean_of(reports.iter().map(|r| r.precision)),
        f1: mean_of(reports.iter().map(|r| r.f1)),
        cross_entropy: avg(|r| r.cross_entropy),
        confusion: Confusion {
            tn: avg(|r| r.confusion.tn),
            fp: avg(|r| r.confusion.fp),
            fn_: avg(|r| r.confusion.fn_),
            tp: avg(|r| r.confusion.tp),
        },
        n_eval: reports[0].n_eval,
    }
}

/// Loads the extract once; every model sees the rows complete for the union of their columns.
pub fn load_nhanes(path: &Path, models: &[u8]) -> Result<(Dataset, LoadReport)> {
    let mut columns: Vec<String> = Vec::new();
    for &m in models {
        for c in model_spec(m)?.columns().into_iter().chain(EXPORT_COLUMNS) {
            if !columns.iter().any(|x| x == c) {
                columns.push(c.to_string());
            }
        }
    }
    let loaded = RawTable::read(path)?.to_dataset(&CsvSchema::nhanes(columns))?;
    Ok((loaded.dataset, loaded.report))
}

fn fit_model(cfg: &NhanesConfig, all: &Dataset, spec: &ModelSpec, hash: &str) -> Result<(ModelReport, Vec<RecordScore>, CqcModel)> {
    let ds = all.select_columns(&spec.columns())?;
    let mut reports = Vec::with_capacity(cfg.repeats);
    let mut hidden = Vec::with_capacity(cfg.repeats);
    let mut first = None;
    for r in 0..cfg.repeats {
        // the split depends only on the repeat, so every model sees the same partition
        let split = split_indices(ds.len(), cfg.fractions, stream_seed(cfg.seed, r as u64, 1))?;
        let standardizer = Standardizer::fit(&ds.subset(&split.train))?;
        let data = standardizer.transform(&ds);
        let train_cfg = TrainConfig { seed: stream_seed(cfg.seed, r as u64, 2), ..cfg.train.clone() };
        let sel =
            select_architecture(&data.subset(&split.train), &data.subset(&split.architecture), &cfg.architectures, &train_cfg)?;
        let test = data.subset(&split.test);
        let probs = test.features.iter().map(|x| positive_probability(&sel.params, x)).collect::<Result<Vec<_>>>()?;
        reports.push(evaluate_binary(&probs, &binary_labels(&test)?, &test.weights, cfg.threshold, cfg.metric_weighting)?);
        hidden.push(hidden_label(&sel.config.hidden_widths));
        if r == 0 {
            first = Some((split, data, sel.params));
        }
    }
    let (split, data, score_net) = first.expect("repeats > 0");

    // CQC: I1 = train, I2 = architecture split, I3 = first half of the test split
    let half = split.test.len() / 2;
    let (i3, eval) = split.test.split_at(half);
    if i3.is_empty() || eval.is_empty() {
        return Err(Error::invalid("test split too small for calibration"));
    }
    let sample = WeightedSample {
        inclusion_probs: data.weights.iter().map(|w| 1.0 / w).collect(),
        data,
    };
    let alpha = 1.0 - cfg.level;
    let q_cfg = TrainConfig { seed: stream_seed(cfg.seed, 0, 3), ..cfg.quantile_train.clone() };
    let quantile_net = fit_quantile_net(&score_net, &sample, &split.architecture, alpha, cfg.score_weighting, &q_cfg)?;
    let model = CqcModel {
        score_net,
        quantile_net,
        threshold: None,
        alpha,
        class_count: 2,
        score_weighting: cfg.score_weighting,
    };
    let model = cqc_calibrate(&model, &sample, i3)?;
    let eval_set = sample.data.subset(eval);
    let sets = eval_set.features.iter().map(|x| model.predict_set(x)).collect::<Result<Vec<_>>>()?;
    let truths: Vec<f64> = binary_labels(&eval_set)?.iter().map(|&y| f64::from(y)).collect();
    let cov = evaluate_coverage(&sets, &truths, &eval_set.weights, true)?;

    let col = |name: &str| all.column_index(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let (g, p, a) = (col("glucose")?, col("pulse")?, col("age")?);
    let scores = (0..sample.len())
        .map(|i| {
            let x = &sample.data.features[i];
            let raw = &all.features[i];
            Ok(RecordScore {
                id: all.ids[i].clone(),
                model: spec.id,
                log_prob_positive: model.candidate_scores(x)?[1],
                set_size: model.predict_set(x)?.size() as usize,
                glucose: raw[g],
                pulse: raw[p],
                age: raw[a],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let aucs: Vec<f64> = reports.iter().map(|m| m.auc).collect();
    let report = ModelReport {
        model: spec.id,
        cost: spec.cost,
        variables: spec.columns(),
        metrics: average(&reports),
        auc_sd: Summary::of(&aucs).map_or(0.0, |s| s.sd),
        auc_per_repeat: aucs,
        hidden_per_repeat: hidden,
        conformal: ConformalSummary {
            level: cfg.level,
            threshold: model.threshold.unwrap_or(f64::NAN),
            coverage: cov.empirical_coverage,
            mean_set_size: cov.mean_set_size,
            n_calibration: i3.len(),
            n_eval: eval.len(),
        },
        config_hash: hash.to_string(),
    };
    Ok((report, scores, model))
}

/// Fits and evaluates every requested model on the NHANES extract.
pub fn run_nhanes(cfg: &NhanesConfig) -> Result<NhanesOutput> {
    cfg.validate()?;
    let hash = config_hash(cfg)?;
    let (all, load) = load_nhanes(&cfg.data, &cfg.models)?;
    if all.len() < 10 {
        return Err(Error::invalid(format!("only {} usable rows after cleaning", all.len())));
    }
    let age = all.column_index("age").expect("age is always loaded");
    let age_range = all.features.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r[age]), hi.max(r[age]))
    });
    log::info!("{} rows kept of {}; ages {:?}", all.len(), load.rows_read, age_range);

    let mut reports = Vec::new();
    let mut scores = Vec::new();
    let mut artifacts = Vec::new();
    for &id in &cfg.models {
        let spec = model_spec(id)?;
        let (report, s, model) = fit_model(cfg, &all, &spec, &hash)?;
        reports.push(report);
        scores.extend(s);
        artifacts.push((id, model));
    }
    Ok(NhanesOutput { load, rows: all.len(), age_range, reports, scores, artifacts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ada_rule() {
        assert_eq!(ada_label(Some(130.0), Some(5.0), Some(false)).unwrap(), 1);
        assert_eq!(ada_label(Some(100.0), Some(6.5), Some(false)).unwrap(), 1);
        assert_eq!(ada_label(Some(90.0), Some(5.0), Some(true)).unwrap(), 1);
        assert_eq!(ada_label(Some(125.9), Some(6.4), Some(false)).unwrap(), 0);
        assert_eq!(ada_label(Some(126.0), None, None).unwrap(), 1);
        assert_eq!(ada_label(None, None, Some(false)).unwrap(), 0);
        assert!(ada_label(None, None, None).is_err());
    }

    #[test]
    fn model_table() {
        assert_eq!(model_spec(1).unwrap().columns(), vec!["age", "gender"]);
        assert_eq!(model_spec(2).unwrap().variables.len(), 7);
        assert_eq!(model_spec(3).unwrap().variables.len(), 9);
        assert_eq!(model_spec(4).unwrap().variables.len(), 11);
        let m7 = model_spec(7).unwrap();
        assert_eq!(m7.variables.len(), 13);
        assert!(m7.columns().contains(&"glucose") && m7.columns().contains(&"hba1c"));
        let costs: Vec<f64> = MODEL_IDS.map(|i| model_spec(i).unwrap().cost).collect();
        assert_eq!(costs, vec![0.0, 0.0, 0.0, 0.5, 4.5, 2.1, 6.1]);
        assert!(matches!(model_spec(8), Err(Error::Config(_))));
    }
}
