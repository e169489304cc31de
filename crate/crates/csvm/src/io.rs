//! File formats: dataset CSV, model file, JSON-lines reports, and the
//! plot-ready aggregate CSV.
//!
//! Schemas are fixed so outputs are byte-reproducible:
//!
//! * **Dataset CSV** — UTF-8, LF line endings. Optional leading comment
//!   lines starting with `#` carry provenance (tool version, resolved
//!   config, seed, PRNG id); then a header row `label,x1,...,xp`; then
//!   one row per observation with `label` in `{-1, 1}` and decimal
//!   float features.
//! * **Model file** — versioned plain-text header (`csvm-model v1`)
//!   followed by a provenance line, kernel spec, intercept, margin, and
//!   one support-point row per line (`label coefficient weight x1..xp`).
//!   Decimal text keeps models human-diffable; values round-trip
//!   exactly through Rust's shortest-representation float formatting.
//! * **Reports** — one JSON object per line; the first line is a meta
//!   record with the provenance fields.
//! * **Plot CSV** — fixed column order
//!   `n,method,noncov_neg,noncov_pos,ambiguity,stderr_noncov_neg,stderr_noncov_pos,stderr_ambiguity`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::MethodAggregate;
use crate::datagen::PRNG_ID;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::types::{CsvmModel, Dataset};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MODEL_FORMAT: &str = "csvm-model v1";

/// Provenance embedded in every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub seed: u64,
    pub prng: String,
    /// The fully resolved configuration of the producing command.
    pub config: serde_json::Value,
}

impl RunMeta {
    pub fn new(seed: u64, config: serde_json::Value) -> Self {
        RunMeta {
            tool_version: TOOL_VERSION.to_string(),
            seed,
            prng: PRNG_ID.to_string(),
            config,
        }
    }

    fn comment_line(&self) -> Result<String> {
        Ok(format!("# csvm {}", serde_json::to_string(self)?))
    }
}

/// Writes a dataset with a provenance comment line.
pub fn write_dataset(path: &Path, data: &Dataset, meta: &RunMeta) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", meta.comment_line()?)?;
    let mut header = String::from("label");
    for j in 1..=data.dim() {
        header.push_str(&format!(",x{j}"));
    }
    writeln!(out, "{header}")?;
    for i in 0..data.n() {
        let mut line = format!("{}", data.label(i));
        for v in data.row(i) {
            line.push_str(&format!(",{v}"));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a dataset, enforcing the schema: a `label` column restricted to
/// ±1 followed by `x1..xp`, all features finite.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(BufReader::new(file));

    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.get(0) != Some("label") {
        return Err(Error::Schema(
            "first column must be named 'label'".into(),
        ));
    }
    let p = headers.len() - 1;
    if p == 0 {
        return Err(Error::MissingColumns(
            "no feature columns found; expected x1..xp after 'label'".into(),
        ));
    }
    for j in 1..=p {
        let expected = format!("x{j}");
        if headers.get(j) != Some(expected.as_str()) {
            return Err(Error::MissingColumns(format!(
                "feature column {j} must be named '{expected}', found '{}'",
                headers.get(j).unwrap_or("<none>")
            )));
        }
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != p + 1 {
            return Err(Error::Schema(format!(
                "row {idx} has {} fields, expected {}",
                record.len(),
                p + 1
            )));
        }
        let label: i64 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::Schema(format!("row {idx}: label '{}' is not an integer", &record[0])))?;
        if label != -1 && label != 1 {
            return Err(Error::Schema(format!(
                "row {idx}: label {label}; only -1 and 1 are accepted"
            )));
        }
        labels.push(label as i8);
        for j in 1..=p {
            let v: f64 = record[j].trim().parse().map_err(|_| {
                Error::Schema(format!("row {idx}: '{}' is not a number", &record[j]))
            })?;
            features.push(v);
        }
    }
    let n = labels.len();
    Dataset::new(n, p, features, labels)
}

/// Writes a model in the versioned plain-text format.
pub fn write_model(path: &Path, model: &CsvmModel, meta: &RunMeta) -> Result<()> {
    model.validate()?;
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{MODEL_FORMAT}")?;
    writeln!(out, "meta {}", serde_json::to_string(meta)?)?;
    writeln!(out, "kernel {}", model.kernel)?;
    writeln!(out, "intercept {}", model.intercept)?;
    writeln!(out, "margin {}", model.margin)?;
    writeln!(out, "support {} {}", model.support.n(), model.support.dim())?;
    for i in 0..model.support.n() {
        let mut line = format!(
            "{} {} {}",
            model.support.label(i),
            model.coefficients[i],
            model.weights_final[i]
        );
        for v in model.support.row(i) {
            line.push_str(&format!(" {v}"));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<(CsvmModel, RunMeta)> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let mut next_line = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Schema("model file ended early".into()))?
            .map_err(Error::from)
    };

    let version = next_line()?;
    if version.trim() != MODEL_FORMAT {
        return Err(Error::Schema(format!(
            "unsupported model format '{}', expected '{MODEL_FORMAT}'",
            version.trim()
        )));
    }
    let meta_line = next_line()?;
    let meta: RunMeta = serde_json::from_str(
        meta_line
            .strip_prefix("meta ")
            .ok_or_else(|| Error::Schema("missing meta line".into()))?,
    )?;
    let kernel = parse_kernel(
        next_line()?
            .strip_prefix("kernel ")
            .ok_or_else(|| Error::Schema("missing kernel line".into()))?,
    )?;
    let intercept: f64 = parse_field(&next_line()?, "intercept")?;
    let margin: f64 = parse_field(&next_line()?, "margin")?;
    let support_line = next_line()?;
    let dims: Vec<&str> = support_line
        .strip_prefix("support ")
        .ok_or_else(|| Error::Schema("missing support line".into()))?
        .split_whitespace()
        .collect();
    if dims.len() != 2 {
        return Err(Error::Schema("support line must carry n and p".into()));
    }
    let n: usize = dims[0]
        .parse()
        .map_err(|_| Error::Schema("bad support count".into()))?;
    let p: usize = dims[1]
        .parse()
        .map_err(|_| Error::Schema("bad support dimension".into()))?;

    let mut labels = Vec::with_capacity(n);
    let mut coefficients = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n * p);
    for _ in 0..n {
        let line = next_line()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 + p {
            return Err(Error::Schema(format!(
                "support row has {} fields, expected {}",
                parts.len(),
                3 + p
            )));
        }
        labels.push(
            parts[0]
                .parse::<i8>()
                .map_err(|_| Error::Schema("bad support label".into()))?,
        );
        coefficients.push(
            parts[1]
                .parse::<f64>()
                .map_err(|_| Error::Schema("bad coefficient".into()))?,
        );
        weights.push(
            parts[2]
                .parse::<f64>()
                .map_err(|_| Error::Schema("bad weight".into()))?,
        );
        for part in &parts[3..] {
            features.push(
                part.parse::<f64>()
                    .map_err(|_| Error::Schema("bad feature value".into()))?,
            );
        }
    }
    let support = Dataset::new(n, p, features, labels)?;
    let model = CsvmModel {
        coefficients,
        intercept,
        margin,
        kernel,
        support,
        weights_final: weights,
    };
    model.validate()?;
    Ok((model, meta))
}

fn parse_field<T: std::str::FromStr>(line: &str, name: &str) -> Result<T> {
    line.strip_prefix(name)
        .map(str::trim)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Schema(format!("missing or malformed '{name}' line")))
}

/// Parses the CLI kernel syntax: `linear`, `gaussian:<rho>`, `poly:<degree>`.
pub fn parse_kernel(text: &str) -> Result<KernelSpec> {
    let text = text.trim();
    if text == "linear" {
        return Ok(KernelSpec::Linear);
    }
    if let Some(rho) = text.strip_prefix("gaussian:") {
        let rho: f64 = rho
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad bandwidth in '{text}'")))?;
        return KernelSpec::gaussian(rho);
    }
    if let Some(degree) = text.strip_prefix("poly:") {
        let degree: u32 = degree
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad degree in '{text}'")))?;
        return KernelSpec::polynomial(degree);
    }
    Err(Error::InvalidArgument(format!(
        "unknown kernel '{text}'; expected linear, gaussian:<rho>, or poly:<degree>"
    )))
}

/// Writes a JSON-lines report: a meta record first, then one object per
/// item.
pub fn write_jsonl<T: Serialize>(path: &Path, meta: &RunMeta, items: &[T]) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(
        out,
        "{}",
        serde_json::to_string(&serde_json::json!({ "record": "meta", "meta": meta }))?
    )?;
    for item in items {
        writeln!(out, "{}", serde_json::to_string(item)?)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the aggregate plot CSV with its fixed column order.
pub fn write_plot_csv(path: &Path, meta: &RunMeta, rows: &[MethodAggregate]) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", meta.comment_line()?)?;
    writeln!(
        out,
        "n,method,noncov_neg,noncov_pos,ambiguity,stderr_noncov_neg,stderr_noncov_pos,stderr_ambiguity"
    )?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.n_train,
            row.method,
            fmt_opt(row.mean_noncov_neg),
            fmt_opt(row.mean_noncov_pos),
            row.mean_ambiguity,
            fmt_opt(row.stderr_noncov_neg),
            fmt_opt(row.stderr_noncov_pos),
            row.stderr_ambiguity,
        )?;
    }
    out.flush()?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}
