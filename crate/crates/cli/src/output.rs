//! Result rows and their CSV / JSON-lines encodings.
//!
//! CSV header (fixed, in this order):
//!
//! ```text
//! schema_version,trial,cell,cell_trial,master_seed,advice_model,d,epsilon,delta,eta,tau,
//! c,threshold_factor,lasso_constant,baseline_constant,sample_multiplier,stage2_policy,
//! reuse_stage1,branch,stage1_outcome,lambda,samples_stage1,samples_stage2,total_samples,
//! true_l1,realized_l2,realized_tv,advice,estimate,wall_clock_seconds,revision
//! ```
//!
//! Vectors are `;`-separated, missing values are empty. Floats use the
//! shortest representation that parses back to the same value.

use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use advice_learn_core::approx_l1::L1Outcome;
use advice_learn_core::pipeline::{Branch, ExperimentRecord, PipelineConfig, PipelineConstants, Stage2Policy};
use advice_learn_core::MeanVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::AdviceModel;
use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const REVISION: &str = match option_env!("ADVICE_LEARN_REVISION") {
    Some(r) => r,
    None => concat!("v", env!("CARGO_PKG_VERSION")),
};

pub const HEADER: [&str; 31] = [
    "schema_version",
    "trial",
    "cell",
    "cell_trial",
    "master_seed",
    "advice_model",
    "d",
    "epsilon",
    "delta",
    "eta",
    "tau",
    "c",
    "threshold_factor",
    "lasso_constant",
    "baseline_constant",
    "sample_multiplier",
    "stage2_policy",
    "reuse_stage1",
    "branch",
    "stage1_outcome",
    "lambda",
    "samples_stage1",
    "samples_stage2",
    "total_samples",
    "true_l1",
    "realized_l2",
    "realized_tv",
    "advice",
    "estimate",
    "wall_clock_seconds",
    "revision",
];

const WALL_CLOCK: usize = 29;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(format!("unknown format `{other}` (expected csv or jsonl)")),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

/// One trial: every [`ExperimentRecord`] field, flattened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub trial: usize,
    pub cell: usize,
    pub cell_trial: usize,
    pub master_seed: u64,
    pub advice_model: String,
    pub d: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub eta: f64,
    pub tau: f64,
    pub c: f64,
    pub threshold_factor: f64,
    pub lasso_constant: f64,
    pub baseline_constant: f64,
    pub sample_multiplier: f64,
    pub stage2_policy: Stage2Policy,
    pub reuse_stage1: bool,
    pub branch: Branch,
    pub stage1_outcome: L1Outcome,
    pub lambda: Option<f64>,
    pub samples_stage1: u64,
    pub samples_stage2: u64,
    pub total_samples: u64,
    pub true_l1: f64,
    pub realized_l2: f64,
    pub realized_tv: Option<f64>,
    pub advice: Vec<f64>,
    pub estimate: Vec<f64>,
    pub wall_clock_seconds: f64,
    pub revision: String,
}

impl ResultRow {
    pub fn new(
        trial: usize,
        cell: usize,
        cell_trial: usize,
        master_seed: u64,
        advice: &AdviceModel,
        rec: ExperimentRecord,
        wall_clock_seconds: f64,
    ) -> Self {
        let k = rec.config.constants;
        ResultRow {
            schema_version: SCHEMA_VERSION,
            trial,
            cell,
            cell_trial,
            master_seed,
            advice_model: advice.label(),
            d: rec.config.dim(),
            epsilon: rec.config.epsilon,
            delta: rec.config.delta,
            eta: rec.config.eta,
            tau: rec.config.tau,
            c: k.c,
            threshold_factor: k.threshold_factor,
            lasso_constant: k.lasso_constant,
            baseline_constant: k.baseline_constant,
            sample_multiplier: k.sample_multiplier,
            stage2_policy: k.stage2_policy,
            reuse_stage1: k.reuse_stage1,
            branch: rec.branch,
            stage1_outcome: rec.stage1_outcome,
            lambda: rec.lambda,
            samples_stage1: rec.samples_stage1,
            samples_stage2: rec.samples_stage2,
            total_samples: rec.total_samples(),
            true_l1: rec.true_l1,
            realized_l2: rec.realized_l2,
            realized_tv: rec.realized_tv,
            advice: rec.config.advice.into_inner(),
            estimate: rec.estimate.into_inner(),
            wall_clock_seconds,
            revision: REVISION.to_string(),
        }
    }

    /// Rebuilds the record the row was made from.
    pub fn to_record(&self) -> Result<ExperimentRecord> {
        let config = PipelineConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            eta: self.eta,
            tau: self.tau,
            advice: MeanVector::new(self.advice.clone())?,
            constants: PipelineConstants {
                c: self.c,
                threshold_factor: self.threshold_factor,
                lasso_constant: self.lasso_constant,
                baseline_constant: self.baseline_constant,
                sample_multiplier: self.sample_multiplier,
                stage2_policy: self.stage2_policy,
                reuse_stage1: self.reuse_stage1,
            },
        };
        Ok(ExperimentRecord {
            config,
            branch: self.branch,
            stage1_outcome: self.stage1_outcome,
            lambda: self.lambda,
            samples_stage1: self.samples_stage1,
            samples_stage2: self.samples_stage2,
            estimate: MeanVector::new(self.estimate.clone())?,
            true_l1: self.true_l1,
            realized_l2: self.realized_l2,
            realized_tv: self.realized_tv,
        })
    }

    fn fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let vec = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        vec![
            self.schema_version.to_string(),
            self.trial.to_string(),
            self.cell.to_string(),
            self.cell_trial.to_string(),
            self.master_seed.to_string(),
            self.advice_model.clone(),
            self.d.to_string(),
            self.epsilon.to_string(),
            self.delta.to_string(),
            self.eta.to_string(),
            self.tau.to_string(),
            self.c.to_string(),
            self.threshold_factor.to_string(),
            self.lasso_constant.to_string(),
            self.baseline_constant.to_string(),
            self.sample_multiplier.to_string(),
            enum_name(&self.stage2_policy),
            self.reuse_stage1.to_string(),
            enum_name(&self.branch),
            enum_name(&self.stage1_outcome),
            opt(self.lambda),
            self.samples_stage1.to_string(),
            self.samples_stage2.to_string(),
            self.total_samples.to_string(),
            self.true_l1.to_string(),
            self.realized_l2.to_string(),
            opt(self.realized_tv),
            vec(&self.advice),
            vec(&self.estimate),
            self.wall_clock_seconds.to_string(),
            self.revision.clone(),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self> {
        if f.len() != HEADER.len() {
            return Err(CliError::Format(format!("expected {} columns, found {}", HEADER.len(), f.len())));
        }
        let opt = |i: usize| -> Result<Option<f64>> {
            if f[i].is_empty() {
                Ok(None)
            } else {
                parse(f, i).map(Some)
            }
        };
        let vec = |i: usize| -> Result<Vec<f64>> {
            if f[i].is_empty() {
                return Ok(Vec::new());
            }
            f[i].split(';')
                .map(|x| x.parse().map_err(|_| bad_cell(i, x)))
                .collect()
        };
        Ok(ResultRow {
            schema_version: parse(f, 0)?,
            trial: parse(f, 1)?,
            cell: parse(f, 2)?,
            cell_trial: parse(f, 3)?,
            master_seed: parse(f, 4)?,
            advice_model: f[5].to_string(),
            d: parse(f, 6)?,
            epsilon: parse(f, 7)?,
            delta: parse(f, 8)?,
            eta: parse(f, 9)?,
            tau: parse(f, 10)?,
            c: parse(f, 11)?,
            threshold_factor: parse(f, 12)?,
            lasso_constant: parse(f, 13)?,
            baseline_constant: parse(f, 14)?,
            sample_multiplier: parse(f, 15)?,
            stage2_policy: enum_parse(f, 16)?,
            reuse_stage1: parse(f, 17)?,
            branch: enum_parse(f, 18)?,
            stage1_outcome: enum_parse(f, 19)?,
            lambda: opt(20)?,
            samples_stage1: parse(f, 21)?,
            samples_stage2: parse(f, 22)?,
            total_samples: parse(f, 23)?,
            true_l1: parse(f, 24)?,
            realized_l2: parse(f, 25)?,
            realized_tv: opt(26)?,
            advice: vec(27)?,
            estimate: vec(28)?,
            wall_clock_seconds: parse(f, 29)?,
            revision: f[30].to_string(),
        })
    }
}

fn bad_cell(col: usize, v: &str) -> CliError {
    CliError::Format(format!("column {}: cannot parse `{v}`", HEADER[col]))
}

fn parse<T: FromStr>(f: &[&str], i: usize) -> Result<T> {
    f[i].parse().map_err(|_| bad_cell(i, f[i]))
}

fn enum_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => panic!("unit enum expected, got {other:?}"),
    }
}

fn enum_parse<T: DeserializeOwned>(f: &[&str], i: usize) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(f[i].to_string())).map_err(|_| bad_cell(i, f[i]))
}

fn csv_bytes(rows: &[ResultRow], with_wall_clock: bool) -> Result<Vec<u8>> {
    let keep = |i: usize| with_wall_clock || i != WALL_CLOCK;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Format(e.to_string());
    w.write_record(HEADER.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, h)| h))
        .map_err(io)?;
    for row in rows {
        let fields = row.fields();
        w.write_record(fields.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, v)| v))
            .map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Format(e.to_string()))
}

pub fn write_csv<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    out.write_all(&csv_bytes(rows, true)?)?;
    Ok(())
}

pub fn write_jsonl<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    for row in rows {
        serde_json::to_writer(&mut out, row).map_err(|e| CliError::Format(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| CliError::Format(e.to_string()))?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(CliError::Format("unexpected CSV header".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| CliError::Format(e.to_string()))?;
            ResultRow::from_fields(&rec.iter().collect::<Vec<_>>())
        })
        .collect()
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ResultRow = serde_json::from_str(&line).map_err(|e| CliError::Format(e.to_string()))?;
        if row.schema_version != SCHEMA_VERSION {
            return Err(CliError::Format(format!("schema version {} unsupported", row.schema_version)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// SHA-256 of the CSV encoding with the wall-clock column dropped.
pub fn content_hash(rows: &[ResultRow]) -> Result<String> {
    Ok(hex::encode(Sha256::digest(csv_bytes(rows, false)?)))
}

/// Writes `rows` next to `base` with the extension of each format.
pub fn write_files(rows: &[ResultRow], base: &Path, formats: &[Format]) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    for &f in formats {
        let path = base.with_extension(f.extension());
        let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        match f {
            Format::Csv => write_csv(rows, file)?,
            Format::Jsonl => write_jsonl(rows, file)?,
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize, wall: f64) -> ResultRow {
        ResultRow {
            schema_version: SCHEMA_VERSION,
            trial,
            cell: 0,
            cell_trial: trial,
            master_seed: 7,
            advice_model: "sparse(t=2,magnitude=0.1)".into(),
            d: 3,
            epsilon: 0.3,
            delta: 1.0 / 3.0,
            eta: 0.1,
            tau: 0.25,
            c: 0.5,
            threshold_factor: 2.5,
            lasso_constant: 32.0,
            baseline_constant: 8.0,
            sample_multiplier: 1.0,
            stage2_policy: Stage2Policy::CapAtBaseline,
            reuse_stage1: false,
            branch: Branch::Baseline,
            stage1_outcome: L1Outcome::Estimate,
            lambda: Some(0.1 + 0.2),
            samples_stage1: 10,
            samples_stage2: 20,
            total_samples: 30,
            true_l1: 0.2,
            realized_l2: 1e-17,
            realized_tv: None,
            advice: vec![0.5, 0.25, 1.0 / 3.0],
            estimate: vec![0.1, 0.7, 0.123456789012345],
            wall_clock_seconds: wall,
            revision: REVISION.into(),
        }
    }

    #[test]
    fn csv_round_trips() {
        let rows = vec![row(0, 0.5), row(1, 1.5)];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(&HEADER.join(",")));
    }

    #[test]
    fn jsonl_round_trips() {
        let rows = vec![row(0, 0.5), row(1, 1.5)];
        let mut buf = Vec::new();
        write_jsonl(&rows, &mut buf).unwrap();
        assert_eq!(read_jsonl(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn hash_ignores_wall_clock() {
        let a = content_hash(&[row(0, 0.5)]).unwrap();
        assert_eq!(a, content_hash(&[row(0, 99.0)]).unwrap());
        assert_ne!(a, content_hash(&[row(1, 0.5)]).unwrap());
        assert_eq!(HEADER[WALL_CLOCK], "wall_clock_seconds");
    }

    #[test]
    fn rows_rebuild_records() {
        let rec = row(0, 0.0).to_record().unwrap();
        assert_eq!(rec.total_samples(), 30);
        assert_eq!(rec.config.dim(), 3);
    }
}
