//! Per (algorithm, sweep value) statistics over successful trials.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::runner::TrialRecord;
use crate::spec::{Algorithm, Axis, ExperimentSpec};

/// Bumped whenever the CSV columns or the summary layout change.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub value: f64,
    /// Records seen for this point, failed ones included.
    pub trials: usize,
    pub failures: usize,
    /// `None` when every trial failed.
    pub mean_sum_rate: Option<f64>,
    /// Sample standard deviation; zero for a single trial.
    pub std_sum_rate: Option<f64>,
    pub stderr_sum_rate: Option<f64>,
    pub mean_scheduled: Option<f64>,
    pub mean_runtime_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: u32,
    pub name: Option<String>,
    pub axis: Option<Axis>,
    /// Trials per sweep point.
    pub trials: usize,
    pub base_seed: Option<u64>,
    pub record_timing: Option<bool>,
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// Summary of `records`. Spec-level fields are filled in when the spec
    /// is known and left empty for a summary rebuilt from a CSV file.
    pub fn new(records: &[TrialRecord], spec: Option<&ExperimentSpec>) -> Self {
        let trials = match spec {
            Some(s) => s.trials,
            None => records.iter().map(|r| r.trial + 1).max().unwrap_or(0),
        };
        Summary {
            format_version: FORMAT_VERSION,
            name: spec.map(|s| s.name.clone()),
            axis: spec.map(|s| s.axis).or_else(|| records.first().map(|r| r.axis)),
            trials,
            base_seed: spec.map(|s| s.base_seed),
            record_timing: spec.map(|s| s.record_timing),
            rows: summarize(records),
        }
    }

    pub fn row(&self, algorithm: Algorithm, value: f64) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.value == value)
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Rows sorted by algorithm, then value.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Algorithm, u64), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.algorithm, order_key(r.value))).or_default().push(r);
    }
    groups
        .into_values()
        .map(|group| {
            let ok: Vec<&TrialRecord> = group.iter().copied().filter(|r| r.is_ok()).collect();
            let rates: Vec<f64> = ok.iter().map(|r| r.sum_rate).collect();
            let counts: Vec<f64> = ok.iter().map(|r| r.scheduled_count as f64).collect();
            let times: Vec<f64> = ok.iter().map(|r| r.runtime_seconds).collect();
            let std = sample_std(&rates);
            SummaryRow {
                algorithm: group[0].algorithm,
                value: group[0].value,
                trials: group.len(),
                failures: group.len() - ok.len(),
                mean_sum_rate: mean(&rates),
                std_sum_rate: std,
                stderr_sum_rate: std.map(|s| s / (rates.len() as f64).sqrt()),
                mean_scheduled: mean(&counts),
                mean_runtime_seconds: mean(&times),
            }
        })
        .collect()
}

/// Order-preserving map of an `f64` onto `u64`, so values sort numerically
/// inside the map key.
fn order_key(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// Fixed-width text table of the summary.
pub fn render_table(summary: &Summary) -> String {
    let axis = summary.axis.map_or("value", |a| a.as_str());
    let mut out = format!(
        "{:<6} {:>9} {:>7} {:>6} {:>10} {:>9} {:>9} {:>8} {:>11}\n",
        "alg", axis, "trials", "failed", "sum_rate", "std", "stderr", "mean|S|", "runtime_s"
    );
    let num = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
    for r in &summary.rows {
        out.push_str(&format!(
            "{:<6} {:>9} {:>7} {:>6} {:>10} {:>9} {:>9} {:>8} {:>11}\n",
            r.algorithm.as_str(),
            r.value,
            r.trials,
            r.failures,
            num(r.mean_sum_rate, 4),
            num(r.std_sum_rate, 4),
            num(r.stderr_sum_rate, 4),
            num(r.mean_scheduled, 2),
            num(r.mean_runtime_seconds, 4),
        ));
    }
    out
}
