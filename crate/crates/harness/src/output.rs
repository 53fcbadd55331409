//! On-disk formats shared with the plotting component.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which round-trips
//! every `f64` exactly and keeps reruns byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use conlearn_core::metrics::MetricsRecord;
use conlearn_core::Vector;
use serde::Serialize;

use crate::error::{HarnessError, Result};

pub const METRICS_HEADER: [&str; 10] = [
    "t",
    "est_err_sq",
    "forgetting",
    "regret",
    "lambda_min",
    "q_lambda_min",
    "l_star",
    "p_star",
    "learner",
    "seed",
];

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn metrics_file_name(seed: u64) -> String {
    format!("metrics_{seed}.csv")
}

pub fn trajectory_file_name(seed: u64) -> String {
    format!("trajectory_{seed}.csv")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord], learner: &str, seed: u64) -> Result<()> {
    write_metrics(create(path)?, records, learner, seed)
}

pub fn write_metrics<W: Write>(out: W, records: &[MetricsRecord], learner: &str, seed: u64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            fmt_float(r.est_err_sq),
            fmt_float(r.forgetting),
            fmt_float(r.regret),
            fmt_float(r.lambda_min),
            fmt_float(r.q_lambda_min),
            fmt_float(r.l_star),
            fmt_float(r.p_star),
            learner.to_string(),
            seed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))
}

/// `t, w_0, …, w_{d−1}`; row `t = 0` is the initial estimate.
pub fn write_trajectory_csv(path: &Path, trajectory: &[Vector]) -> Result<()> {
    let dim = trajectory.first().map_or(0, Vector::dim);
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|i| format!("w_{i}")));
    w.write_record(&header)?;
    for (t, v) in trajectory.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(v.iter().map(|x| fmt_float(*x)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| HarnessError::io(path, e))?;
    out.flush().map_err(|e| HarnessError::io(path, e))
}

/// One parsed metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub record: MetricsRecord,
    pub learner: String,
    pub seed: u64,
}

/// Read a metrics CSV, insisting on the exact column order.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let bad = |reason: String| HarnessError::MalformedCsv {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.clone();
    if header.len() != METRICS_HEADER.len() {
        return Err(bad(format!(
            "expected {} columns, found {}",
            METRICS_HEADER.len(),
            header.len()
        )));
    }
    for (i, (got, want)) in header.iter().zip(METRICS_HEADER).enumerate() {
        if got != want {
            return Err(bad(format!("column {} is `{got}`, expected `{want}`", i + 1)));
        }
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}, column `{}`: {e}", line + 1, METRICS_HEADER[i])))
        };
        let t = rec[0]
            .parse::<usize>()
            .map_err(|e| bad(format!("row {}, column `t`: {e}", line + 1)))?;
        let seed = rec[9]
            .parse::<u64>()
            .map_err(|e| bad(format!("row {}, column `seed`: {e}", line + 1)))?;
        rows.push(MetricsRow {
            record: MetricsRecord {
                t,
                est_err_sq: num(1)?,
                forgetting: num(2)?,
                regret: num(3)?,
                lambda_min: num(4)?,
                q_lambda_min: num(5)?,
                l_star: num(6)?,
                p_star: num(7)?,
            },
            learner: rec[8].to_string(),
            seed,
        });
    }
    Ok(rows)
}
