//! CSV and JSON persistence of trial records and summaries.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{BenchError, Result};
use crate::runner::{Status, TrialRecord};
use crate::spec::{Algorithm, Axis};
use crate::summary::Summary;

/// Column order of the results CSV, format version 1.
pub const CSV_COLUMNS: [&str; 13] = [
    "axis",
    "value",
    "trial",
    "seed",
    "algorithm",
    "status",
    "sum_rate",
    "scheduled_count",
    "runtime_seconds",
    "converged",
    "rates",
    "bs_powers",
    "error",
];

/// JSON Schema the summary document conforms to.
pub const SUMMARY_SCHEMA: &str = include_str!("../schema/summary.schema.json");

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn split(s: &str, line: u64) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(|x| parse(x, "list entry", line)).collect()
}

fn parse<T: std::str::FromStr>(s: &str, what: &str, line: u64) -> Result<T> {
    s.parse().map_err(|_| BenchError::Malformed(format!("line {line}: bad {what} `{s}`")))
}

/// Writes one row per record. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record([
            r.axis.as_str().to_string(),
            r.value.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.algorithm.as_str().to_string(),
            r.status.as_str().to_string(),
            r.sum_rate.to_string(),
            r.scheduled_count.to_string(),
            r.runtime_seconds.to_string(),
            r.converged.to_string(),
            join(&r.rates),
            join(&r.bs_powers),
            r.error.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(BenchError::Malformed(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let f = |i: usize| row.get(i).unwrap_or("");
        let status = match f(5) {
            "ok" => Status::Ok,
            "failed" => Status::Failed,
            s => return Err(BenchError::Malformed(format!("line {line}: bad status `{s}`"))),
        };
        out.push(TrialRecord {
            axis: f(0).parse::<Axis>().map_err(|e| BenchError::Malformed(format!("line {line}: {e}")))?,
            value: parse(f(1), "value", line)?,
            trial: parse(f(2), "trial", line)?,
            seed: parse(f(3), "seed", line)?,
            algorithm: f(4).parse::<Algorithm>().map_err(|e| BenchError::Malformed(format!("line {line}: {e}")))?,
            status,
            sum_rate: parse(f(6), "sum_rate", line)?,
            scheduled_count: parse(f(7), "scheduled_count", line)?,
            runtime_seconds: parse(f(8), "runtime_seconds", line)?,
            converged: parse(f(9), "converged", line)?,
            rates: split(f(10), line)?,
            bs_powers: split(f(11), line)?,
            error: f(12).to_string(),
        });
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<TrialRecord>> {
    read_csv(File::open(path)?)
}

pub fn write_summary_json<W: Write>(summary: &Summary, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes `<prefix>.csv` and `<prefix>.summary.json`, creating parent
/// directories as needed.
pub fn emit(records: &[TrialRecord], summary: &Summary, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let stem = prefix.as_os_str().to_string_lossy();
    let csv_path = PathBuf::from(format!("{stem}.csv"));
    let json_path = PathBuf::from(format!("{stem}.summary.json"));
    write_csv(records, File::create(&csv_path)?)?;
    write_summary_json(summary, File::create(&json_path)?)?;
    Ok((csv_path, json_path))
}

/// Consistency problems in a set of records, one message each.
pub fn check_records(records: &[TrialRecord]) -> Vec<String> {
    let mut problems = Vec::new();
    let mut keys = HashMap::new();
    let mut seeds: HashMap<(u64, usize), u64> = HashMap::new();
    let axis = records.first().map(|r| r.axis);
    for (i, r) in records.iter().enumerate() {
        let at = format!("row {} ({} {} trial {})", i + 1, r.algorithm, r.value, r.trial);
        if Some(r.axis) != axis {
            problems.push(format!("{at}: axis {} differs from the first row", r.axis));
        }
        if let Some(j) = keys.insert((r.value.to_bits(), r.trial, r.algorithm), i) {
            problems.push(format!("{at}: duplicates row {}", j + 1));
        }
        if let Some(&s) = seeds.get(&(r.value.to_bits(), r.trial)) {
            if s != r.seed {
                problems.push(format!("{at}: seed {} differs from the other algorithms ({s})", r.seed));
            }
        } else {
            seeds.insert((r.value.to_bits(), r.trial), r.seed);
        }
        if !(r.runtime_seconds >= 0.0 && r.runtime_seconds.is_finite()) {
            problems.push(format!("{at}: runtime {} is not a nonnegative number", r.runtime_seconds));
        }
        match r.status {
            Status::Failed => {
                if r.error.is_empty() {
                    problems.push(format!("{at}: failed without an error message"));
                }
            }
            Status::Ok => {
                if !(r.sum_rate >= 0.0 && r.sum_rate.is_finite()) {
                    problems.push(format!("{at}: sum rate {} is not a nonnegative number", r.sum_rate));
                }
                if r.rates.iter().chain(&r.bs_powers).any(|x| !(*x >= 0.0 && x.is_finite())) {
                    problems.push(format!("{at}: negative or non-finite rate or power"));
                }
                let total: f64 = r.rates.iter().sum();
                if (total - r.sum_rate).abs() > 1e-9 * r.sum_rate.max(1.0) {
                    problems.push(format!("{at}: per-user rates add up to {total}, not {}", r.sum_rate));
                }
                let served = r.rates.iter().filter(|&&x| x > 0.0).count();
                if served != r.scheduled_count {
                    problems.push(format!("{at}: {served} users with positive rate but scheduled_count {}", r.scheduled_count));
                }
                if !r.error.is_empty() {
                    problems.push(format!("{at}: error message on a successful run"));
                }
            }
        }
    }
    problems
}
