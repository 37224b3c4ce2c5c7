use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use super::nhanes::ada_label;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Where the binary outcome of each row comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelSource {
    None,
    /// A 0/1 column.
    Column(String),
    /// ADA definition from fasting glucose (mg/dL), HbA1c (%) and prior diagnosis columns.
    Ada { glucose: String, hba1c: String, prior_dx: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub id_column: Option<String>,
    pub weight_column: String,
    /// Requested numeric features. `gender` accepts male/female spellings and
    /// `race` expands to one-hot columns `race_1`..`race_6`.
    pub features: Vec<String>,
    pub label: LabelSource,
}

pub const RACE_CODES: std::ops::RangeInclusive<u8> = 1..=6;

impl CsvSchema {
    /// NHANES extract layout with the ADA outcome.
    pub fn nhanes(features: Vec<String>) -> Self {
        CsvSchema {
            id_column: Some("id".into()),
            weight_column: "weight".into(),
            features,
            label: LabelSource::Ada { glucose: "glucose".into(), hba1c: "hba1c".into(), prior_dx: "prior_dx".into() },
        }
    }

    fn output_columns(&self) -> Vec<String> {
        self.features
            .iter()
            .flat_map(|f| {
                if f == "race" {
                    RACE_CODES.map(|c| format!("race_{c}")).collect()
                } else {
                    vec![f.clone()]
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowIssue {
    pub line: u64,
    pub column: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    /// Rows dropped because a requested value was empty or `NA`.
    pub dropped_missing: usize,
    /// Rows dropped because none of the outcome inputs were present.
    pub dropped_unlabeled: usize,
    /// Rows dropped for an unparseable or invalid cell.
    pub bad_cells: Vec<RowIssue>,
}

impl LoadReport {
    pub fn warning_count(&self) -> usize {
        self.bad_cells.len()
    }
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub report: LoadReport,
}

/// A CSV file held as strings, so several schemas can be applied to one read.
#[derive(Debug, Clone)]
pub struct RawTable {
    headers: Vec<String>,
    index: HashMap<String, usize>,
    records: Vec<(u64, Vec<String>)>,
}

impl RawTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let index = headers.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            records.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(RawTable { headers, index, records })
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Applies `schema`, dropping rows with missing or invalid requested values.
    pub fn to_dataset(&self, schema: &CsvSchema) -> Result<Loaded> {
        // resolve every column up front so schema errors precede row handling
        let weight_col = self.column(&schema.weight_column)?;
        let id_col = schema.id_column.as_deref().map(|c| self.column(c)).transpose()?;
        let feature_cols =
            schema.features.iter().map(|f| Ok((f.as_str(), self.column(f)?))).collect::<Result<Vec<_>>>()?;
        let label_cols = match &schema.label {
            LabelSource::None => LabelCols::None,
            LabelSource::Column(c) => LabelCols::Column(self.column(c)?),
            LabelSource::Ada { glucose, hba1c, prior_dx } => {
                LabelCols::Ada(self.column(glucose)?, self.column(hba1c)?, self.column(prior_dx)?)
            }
        };

        let mut report = LoadReport { rows_read: self.records.len(), ..Default::default() };
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        let mut ids = Vec::new();
        'rows: for (line, cells) in &self.records {
            let issue = |column: &str, message: String| RowIssue { line: *line, column: column.to_string(), message };
            let mut row = Vec::with_capacity(feature_cols.len());
            for &(name, col) in &feature_cols {
                match parse_feature(name, &cells[col]) {
                    Cell::Missing => {
                        report.dropped_missing += 1;
                        continue 'rows;
                    }
                    Cell::Bad(msg) => {
                        log::warn!("line {line}: column `{name}`: {msg}");
                        report.bad_cells.push(issue(name, msg));
                        continue 'rows;
                    }
                    Cell::Values(v) => row.extend(v),
                }
            }
            let weight = match parse_number(&cells[weight_col]) {
                Cell::Values(v) if v[0] > 0.0 && v[0].is_finite() => v[0],
                Cell::Missing => {
                    report.dropped_missing += 1;
                    continue;
                }
                Cell::Values(v) => {
                    report.bad_cells.push(issue(&schema.weight_column, format!("nonpositive weight {}", v[0])));
                    continue;
                }
                Cell::Bad(msg) => {
                    report.bad_cells.push(issue(&schema.weight_column, msg));
                    continue;
                }
            };
            let label = match label_cols {
                LabelCols::None => None,
                LabelCols::Column(c) => match cells[c].as_str() {
                    "0" => Some(0),
                    "1" => Some(1),
                    "" | "NA" => {
                        report.dropped_missing += 1;
                        continue;
                    }
                    other => {
                        report.bad_cells.push(issue(&self.headers[c], format!("label `{other}` is not 0/1")));
                        continue;
                    }
                },
                LabelCols::Ada(g, h, p) => {
                    let parsed = (optional_number(&cells[g]), optional_number(&cells[h]), parse_flag(&cells[p]));
                    match parsed {
                        (Ok(fpg), Ok(a1c), Ok(dx)) => match ada_label(fpg, a1c, dx) {
                            Ok(y) => Some(y),
                            Err(_) => {
                                report.dropped_unlabeled += 1;
                                continue;
                            }
                        },
                        (Err(m), _, _) | (_, Err(m), _) | (_, _, Err(m)) => {
                            report.bad_cells.push(issue("outcome", m));
                            continue;
                        }
                    }
                }
            };
            let id = id_col.map_or_else(|| line.to_string(), |c| cells[c].clone());
            features.push(row);
            labels.extend(label);
            weights.push(weight);
            ids.push(id);
        }
        report.rows_kept = features.len();
        if report.dropped_missing > 0 {
            log::info!("dropped {} rows with missing values", report.dropped_missing);
        }
        let labels = (!matches!(schema.label, LabelSource::None)).then_some(labels);
        let dataset = Dataset::new(schema.output_columns(), features, labels, weights, ids)?;
        Ok(Loaded { dataset, report })
    }
}

#[derive(Clone, Copy)]
enum LabelCols {
    None,
    Column(usize),
    Ada(usize, usize, usize),
}

enum Cell {
    Missing,
    Bad(String),
    Values(Vec<f64>),
}

fn is_missing(s: &str) -> bool {
    matches!(s, "" | "NA" | "na" | "NaN" | ".")
}

fn parse_number(s: &str) -> Cell {
    if is_missing(s) {
        return Cell::Missing;
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Cell::Values(vec![v]),
        _ => Cell::Bad(format!("cannot parse `{s}` as a number")),
    }
}

fn optional_number(s: &str) -> std::result::Result<Option<f64>, String> {
    match parse_number(s) {
        Cell::Missing => Ok(None),
        Cell::Values(v) if v[0] >= 0.0 => Ok(Some(v[0])),
        Cell::Values(v) => Err(format!("negative biomarker value {}", v[0])),
        Cell::Bad(m) => Err(m),
    }
}

fn parse_flag(s: &str) -> std::result::Result<Option<bool>, String> {
    match s.to_ascii_lowercase().as_str() {
        "" | "na" | "." => Ok(None),
        "1" | "yes" | "true" | "y" => Ok(Some(true)),
        "0" | "2" | "no" | "false" | "n" => Ok(Some(false)),
        other => Err(format!("cannot parse `{other}` as yes/no")),
    }
}

fn parse_feature(name: &str, s: &str) -> Cell {
    match name {
        // male = 1, female = 0; the NHANES code 2 means female
        "gender" => match s.to_ascii_lowercase().as_str() {
            "1" | "male" | "m" => Cell::Values(vec![1.0]),
            "0" | "2" | "female" | "f" => Cell::Values(vec![0.0]),
            v if is_missing(v) || v == "na" => Cell::Missing,
            other => Cell::Bad(format!("unknown gender `{other}`")),
        },
        "race" => match parse_number(s) {
            Cell::Values(v) if v[0].fract() == 0.0 && RACE_CODES.contains(&(v[0] as u8)) => {
                Cell::Values(RACE_CODES.map(|c| f64::from(u8::from(c as f64 == v[0]))).collect())
            }
            Cell::Values(v) => Cell::Bad(format!("race code {} outside 1..6", v[0])),
            other => other,
        },
        _ => parse_number(s),
    }
}

/// Reads `path` and applies `schema`.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Loaded> {
    RawTable::read(path)?.to_dataset(schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(s: &str) -> RawTable {
        RawTable::from_reader(s.as_bytes()).unwrap()
    }

    fn schema() -> CsvSchema {
        CsvSchema {
            id_column: Some("id".into()),
            weight_column: "weight".into(),
            features: vec!["age".into(), "gender".into()],
            label: LabelSource::Column("y".into()),
        }
    }

    #[test]
    fn well_formed() {
        let t = table("id,weight,age,gender,y\na,1.5,40,male,1\nb,2,51,0,0\nc,3,60,2,1\n");
        let l = t.to_dataset(&schema()).unwrap();
        assert_eq!(l.dataset.len(), 3);
        assert_eq!(l.dataset.features[0], vec![40.0, 1.0]);
        assert_eq!(l.dataset.features[2], vec![60.0, 0.0]);
        assert_eq!(l.dataset.labels, Some(vec![1, 0, 1]));
        assert_eq!(l.dataset.ids, vec!["a", "b", "c"]);
    }

    #[test]
    fn missing_weight_column() {
        let t = table("id,age,gender,y\na,40,1,1\n");
        assert!(matches!(t.to_dataset(&schema()), Err(Error::MissingColumn(c)) if c == "weight"));
    }

    #[test]
    fn bad_cell_is_dropped_with_line() {
        let t = table("id,weight,age,gender,y\na,1,40,1,1\nb,1,forty,1,0\nc,1,60,0,1\n");
        let l = t.to_dataset(&schema()).unwrap();
        assert_eq!(l.dataset.len(), 2);
        assert_eq!(l.report.warning_count(), 1);
        assert_eq!(l.report.bad_cells[0].line, 3);
        assert_eq!(l.report.bad_cells[0].column, "age");
    }

    #[test]
    fn missing_values_are_counted() {
        let t = table("id,weight,age,gender,y\na,1,,1,1\nb,1,NA,1,0\nc,1,60,0,1\n");
        let l = t.to_dataset(&schema()).unwrap();
        assert_eq!(l.dataset.len(), 1);
        assert_eq!(l.report.dropped_missing, 2);
    }

    #[test]
    fn ada_outcome_and_race() {
        let t = table(
            "id,weight,race,glucose,hba1c,prior_dx\n1,1,3,130,5.0,0\n2,1,1,90,5.2,no\n3,1,6,90,5.0,yes\n4,1,2,,,\n",
        );
        let s = CsvSchema::nhanes(vec!["race".into()]);
        let l = t.to_dataset(&s).unwrap();
        assert_eq!(l.dataset.labels, Some(vec![1, 0, 1]));
        assert_eq!(l.report.dropped_unlabeled, 1);
        assert_eq!(l.dataset.columns.len(), 6);
        assert_eq!(l.dataset.features[0], vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }
}
