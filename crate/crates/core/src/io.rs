//! CSV and JSON readers and writers.
//!
//! Panels are stored one row per time point with a header of series names.
//! Coefficient tensors use long format `i,j,lag,value` (1-based, every entry
//! written, zeros included). Floats are printed with Rust's shortest
//! round-trip formatting, so files reload bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::evaluation::{AggregateRow, SuiteReport};
use crate::series::{CoefficientTensor, MaxlagMatrix, TimeSeriesPanel};
use crate::simulation::SimulatedDataset;
use crate::{Error, Result, Scalar};

fn parse_float<F: Scalar>(cell: &str, what: &str) -> Result<F> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Err(Error::Parse(format!("missing value in {what}")));
    }
    let v: f64 = cell.parse().map_err(|_| Error::Parse(format!("`{cell}` is not a number in {what}")))?;
    Ok(F::of(v))
}

fn parse_index(cell: &str, what: &str) -> Result<usize> {
    cell.trim().parse().map_err(|_| Error::Parse(format!("`{cell}` is not an index in {what}")))
}

/// Reads a panel: header of names, then one row of `k` values per time point.
pub fn read_panel<F: Scalar, R: Read>(reader: R) -> Result<TimeSeriesPanel<F>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::Empty("panel header"));
    }
    let k = names.len();
    let mut values: Vec<F> = Vec::new();
    let mut n = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != k {
            return Err(Error::Parse(format!("row {} has {} fields, expected {k}", r + 2, record.len())));
        }
        for cell in record.iter() {
            values.push(parse_float(cell, &format!("row {}", r + 2))?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("panel rows"));
    }
    let by_time = Array2::from_shape_vec((n, k), values).expect("row lengths checked");
    TimeSeriesPanel::with_names(by_time.reversed_axes().as_standard_layout().to_owned(), names)
}

pub fn read_panel_file<F: Scalar>(path: impl AsRef<Path>) -> Result<TimeSeriesPanel<F>> {
    read_panel(File::open(path)?)
}

pub fn write_panel<F: Scalar, W: Write>(writer: W, panel: &TimeSeriesPanel<F>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(panel.names())?;
    for t in 0..panel.total_length() {
        w.write_record(panel.column(t).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_coefficients<F: Scalar, W: Write>(writer: W, tensor: &CoefficientTensor<F>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "j", "lag", "value"])?;
    let b = tensor.b();
    for i in 0..tensor.k() {
        for j in 0..tensor.k() {
            for l in 0..tensor.p() {
                w.write_record([(i + 1).to_string(), (j + 1).to_string(), (l + 1).to_string(), b[[i, j, l]].to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a long-format tensor; `k` and `p` are the largest indices present
/// and every `(i, j, lag)` must appear exactly once.
pub fn read_coefficients<F: Scalar, R: Read>(reader: R) -> Result<Array3<F>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut entries = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let what = format!("coefficient row {}", r + 2);
        if record.len() != 4 {
            return Err(Error::Parse(format!("{what} has {} fields, expected 4", record.len())));
        }
        let (i, j, l) = (parse_index(&record[0], &what)?, parse_index(&record[1], &what)?, parse_index(&record[2], &what)?);
        if i == 0 || j == 0 || l == 0 {
            return Err(Error::Parse(format!("{what}: indices are 1-based")));
        }
        entries.push((i - 1, j - 1, l - 1, parse_float::<F>(&record[3], &what)?));
    }
    if entries.is_empty() {
        return Err(Error::Empty("coefficient file"));
    }
    let k = entries.iter().map(|e| e.0.max(e.1)).max().expect("non-empty") + 1;
    let p = entries.iter().map(|e| e.2).max().expect("non-empty") + 1;
    let mut b = Array3::zeros((k, k, p));
    let mut seen = Array3::from_elem((k, k, p), false);
    for (i, j, l, v) in entries {
        if std::mem::replace(&mut seen[[i, j, l]], true) {
            return Err(Error::Parse(format!("duplicate coefficient ({}, {}, {})", i + 1, j + 1, l + 1)));
        }
        b[[i, j, l]] = v;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Parse(format!("coefficient file does not cover a full {k}x{k}x{p} tensor")));
    }
    Ok(b)
}

pub fn write_intercepts<F: Scalar, W: Write>(writer: W, nu: &Array1<F>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "value"])?;
    for (i, v) in nu.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_intercepts<F: Scalar, R: Read>(reader: R) -> Result<Array1<F>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut values: Vec<Option<F>> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let what = format!("intercept row {}", r + 2);
        if record.len() != 2 {
            return Err(Error::Parse(format!("{what} has {} fields, expected 2", record.len())));
        }
        let i = parse_index(&record[0], &what)?;
        if i == 0 {
            return Err(Error::Parse(format!("{what}: indices are 1-based")));
        }
        if values.len() < i {
            values.resize(i, None);
        }
        if values[i - 1].replace(parse_float(&record[1], &what)?).is_some() {
            return Err(Error::Parse(format!("duplicate intercept {i}")));
        }
    }
    if values.is_empty() {
        return Err(Error::Empty("intercept file"));
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::Parse(format!("intercept {} missing", i + 1))))
        .collect::<Result<Vec<_>>>()
        .map(Array1::from)
}

/// Reads a tensor and its intercepts written by [`write_coefficients`] and
/// [`write_intercepts`].
pub fn read_model<F: Scalar>(coefficients: impl AsRef<Path>, intercepts: impl AsRef<Path>) -> Result<CoefficientTensor<F>> {
    let b = read_coefficients(File::open(coefficients)?)?;
    let nu = read_intercepts(File::open(intercepts)?)?;
    CoefficientTensor::new(b, nu)
}

/// `L̂` as a square table with series names on both margins.
pub fn write_maxlag<W: Write>(writer: W, maxlag: &MaxlagMatrix, names: &[String]) -> Result<()> {
    if names.len() != maxlag.k() {
        return Err(Error::Dimension(format!("{} names for k = {}", names.len(), maxlag.k())));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(std::iter::once("series").chain(names.iter().map(String::as_str)))?;
    for (i, name) in names.iter().enumerate() {
        w.write_record(std::iter::once(name.clone()).chain(maxlag.as_array().row(i).iter().map(|v| v.to_string())))?;
    }
    w.flush()?;
    Ok(())
}

/// Ground truth written next to a simulated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub scenario: String,
    pub k: usize,
    pub p: usize,
    pub t: usize,
    pub seed: u64,
    pub sigma_u: f64,
    pub target_spectral_radius: f64,
    pub burn_in: usize,
    pub own_boost: f64,
    pub block1_own_lag: usize,
    pub rng: String,
    /// `B_ij^(ℓ)` flattened with `i` slowest and `ℓ` fastest.
    pub true_b: Vec<f64>,
    pub intercept: Vec<f64>,
    pub true_l: Vec<Vec<usize>>,
}

impl TruthSidecar {
    pub fn from_dataset(data: &SimulatedDataset) -> Self {
        let spec = &data.spec;
        let scenario = match spec.scenario.number() {
            Some(n) => n.to_string(),
            None => "custom".to_string(),
        };
        Self {
            scenario,
            k: spec.k,
            p: spec.p,
            t: spec.t,
            seed: spec.seed,
            sigma_u: spec.sigma_u,
            target_spectral_radius: spec.target_spectral_radius,
            burn_in: spec.burn_in,
            own_boost: spec.own_boost,
            block1_own_lag: spec.block1_own_lag,
            rng: "ChaCha8 (rand_chacha), seed_from_u64(seed); stream 0 coefficients, stream 1 innovations".into(),
            true_b: data.true_b.b().iter().copied().collect(),
            intercept: data.true_b.nu().to_vec(),
            true_l: data.true_l.as_array().outer_iter().map(|r| r.to_vec()).collect(),
        }
    }

    pub fn maxlag(&self) -> Result<MaxlagMatrix> {
        if self.true_l.len() != self.k || self.true_l.iter().any(|r| r.len() != self.k) {
            return Err(Error::Dimension("true_l is not k x k".into()));
        }
        let flat: Vec<usize> = self.true_l.iter().flatten().copied().collect();
        MaxlagMatrix::new(Array2::from_shape_vec((self.k, self.k), flat).expect("checked"), self.p)
    }

    pub fn tensor(&self) -> Result<CoefficientTensor<f64>> {
        let b = Array3::from_shape_vec((self.k, self.k, self.p), self.true_b.clone())
            .map_err(|_| Error::Dimension(format!("true_b has {} entries for k = {}, p = {}", self.true_b.len(), self.k, self.p)))?;
        CoefficientTensor::new(b, Array1::from(self.intercept.clone()))
    }
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<TruthSidecar> {
    Ok(serde_json::from_reader(File::open(path)?)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file(path: impl AsRef<Path>, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per method: MSFE, its standard error, tuning choices, lag score.
pub fn write_suite_table<F: Scalar, W: Write>(writer: W, report: &SuiteReport<F>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "msfe", "msfe_se", "lambda", "lambda_index", "alpha", "lag_score", "origins", "error"])?;
    for o in &report.outcomes {
        match &o.report {
            Some(r) => w.write_record([
                o.method.clone(),
                r.msfe.to_string(),
                r.msfe_se.to_string(),
                opt(r.lambda),
                opt(r.lambda_index),
                opt(r.alpha),
                opt(r.lag_score),
                r.squared_errors.len().to_string(),
                String::new(),
            ])?,
            None => w.write_record([
                o.method.as_str(),
                "",
                "",
                "",
                "",
                "",
                "",
                "",
                o.error.as_deref().unwrap_or("failed"),
            ])?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Tidy cross-validation curves: one row per method, α and λ.
pub fn write_cv_curves<F: Scalar, W: Write>(writer: W, report: &SuiteReport<F>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "kind", "lambda_index", "lambda", "msfe", "se", "argmin", "chosen"])?;
    for o in &report.outcomes {
        let Some(r) = &o.report else { continue };
        for c in &r.curves {
            for (j, lambda) in c.lambdas.iter().enumerate() {
                w.write_record([
                    o.method.clone(),
                    c.kind.to_string(),
                    j.to_string(),
                    lambda.to_string(),
                    c.msfe[j].to_string(),
                    c.se[j].to_string(),
                    (j == c.argmin).to_string(),
                    (j == c.chosen).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_table<W: Write>(writer: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "replicates", "failures", "msfe_mean", "msfe_se", "lag_score_mean", "lag_score_se"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.replicates.to_string(),
            r.failures.to_string(),
            r.msfe_mean.to_string(),
            r.msfe_se.to_string(),
            opt(r.lag_score_mean),
            opt(r.lag_score_se),
        ])?;
    }
    w.flush()?;
    Ok(())
}
