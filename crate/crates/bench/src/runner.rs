//! Monte Carlo driver: one job per (sweep value, trial), every requested
//! algorithm on the same channel draw.

use std::fs::{self, File};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use jtsched_core::exhaustive::{run_algorithm2, write_subset_csv, ExhaustiveSettings, SubsetRecord};
use jtsched_core::phy::rate_targets;
use jtsched_core::sca::{run_algorithm1, ScaSettings};
use jtsched_core::scenario::draw;
use jtsched_core::schedule::write_trace_csv;
use jtsched_core::zfbf::run_algorithm3;
use jtsched_core::{ChannelSet, NetworkConfig, RateTargets, ScheduleSolution};
use log::{info, warn};
use rayon::prelude::*;

use crate::error::{BenchError, Result};
use crate::spec::{Algorithm, Axis, ExperimentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Failed => "failed",
        }
    }
}

/// Result of one algorithm on one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub axis: Axis,
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub status: Status,
    pub sum_rate: f64,
    pub scheduled_count: usize,
    pub runtime_seconds: f64,
    pub converged: bool,
    pub rates: Vec<f64>,
    pub bs_powers: Vec<f64>,
    /// Empty unless the run failed.
    pub error: String,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    fn failed(key: &Job, algorithm: Algorithm, runtime_seconds: f64, error: String) -> Self {
        TrialRecord {
            axis: key.axis,
            value: key.value,
            trial: key.trial,
            seed: key.seed,
            algorithm,
            status: Status::Failed,
            sum_rate: 0.0,
            scheduled_count: 0,
            runtime_seconds,
            converged: false,
            rates: Vec::new(),
            bs_powers: Vec::new(),
            error,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Job {
    axis: Axis,
    value: f64,
    trial: usize,
    seed: u64,
}

/// Output of one algorithm call.
#[derive(Debug, Clone)]
pub struct Run {
    pub solution: ScheduleSolution,
    /// Per-set outcomes of the exhaustive search.
    pub subsets: Option<Vec<SubsetRecord>>,
}

/// One network instance handed to an algorithm.
#[derive(Debug, Clone)]
pub struct Instance {
    pub channels: ChannelSet,
    pub targets: RateTargets,
    pub config: NetworkConfig,
    pub sus_threshold: f64,
}

/// Runs every (value, trial) job on a bounded pool and returns the records
/// sorted by value, trial and algorithm.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<TrialRecord>> {
    run_experiment_with(spec, solve)
}

/// [`run_experiment`] with a custom algorithm dispatcher.
pub fn run_experiment_with<F>(spec: &ExperimentSpec, solve: F) -> Result<Vec<TrialRecord>>
where
    F: Fn(Algorithm, &Instance) -> jtsched_core::Result<Run> + Sync,
{
    spec.validate()?;
    let jobs: Vec<Job> = spec
        .values
        .iter()
        .flat_map(|&value| {
            (0..spec.trials).map(move |trial| Job { axis: spec.axis, value, trial, seed: spec.trial_seed(value, trial) })
        })
        .collect();
    for dir in [&spec.trace_dir, &spec.subset_dir].into_iter().flatten() {
        fs::create_dir_all(dir)?;
    }

    let done = AtomicUsize::new(0);
    let total = jobs.len();
    let work = || -> Result<Vec<TrialRecord>> {
        let chunks: Vec<Vec<TrialRecord>> = jobs
            .par_iter()
            .map(|job| {
                let out = run_job(spec, job, &solve);
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                info!("{} = {} trial {}: done ({n}/{total})", spec.axis, job.value, job.trial);
                out
            })
            .collect::<Result<_>>()?;
        Ok(chunks.into_iter().flatten().collect())
    };
    let mut records = match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::Spec(format!("cannot start {n} worker threads: {e}")))?
            .install(work)?,
        None => work()?,
    };
    records.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.trial.cmp(&b.trial)).then(a.algorithm.cmp(&b.algorithm)));
    Ok(records)
}

/// Channel and rate targets of one job. Targets come from the worst SNR of
/// an SNR sweep so that every point of the trial serves the same demands.
fn instance(spec: &ExperimentSpec, job: &Job) -> Result<Instance> {
    let config = spec.config_for(job.value)?.with_seed(job.seed);
    let channels = draw(&config)?;
    let screen = config.clone().with_snr_db(spec.target_snr(job.value));
    let targets = rate_targets(&channels, &screen);
    Ok(Instance { channels, targets, config, sus_threshold: spec.sus_threshold })
}

fn run_job<F>(spec: &ExperimentSpec, job: &Job, solve: &F) -> Result<Vec<TrialRecord>>
where
    F: Fn(Algorithm, &Instance) -> jtsched_core::Result<Run>,
{
    let inst = match instance(spec, job) {
        Ok(v) => v,
        Err(e) => {
            warn!("{} = {} trial {}: scenario failed: {e}", job.axis, job.value, job.trial);
            let msg = format!("scenario: {e}");
            return Ok(spec.algorithms.iter().map(|&a| TrialRecord::failed(job, a, 0.0, msg.clone())).collect());
        }
    };
    let mut out = Vec::with_capacity(spec.algorithms.len());
    for &alg in &spec.algorithms {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(|| solve(alg, &inst)));
        let elapsed = if spec.record_timing { start.elapsed().as_secs_f64() } else { 0.0 };
        let record = match result {
            Ok(Ok(Run { solution: sol, subsets })) => {
                write_artifacts(spec, job, alg, &sol, subsets.as_deref())?;
                TrialRecord {
                    axis: job.axis,
                    value: job.value,
                    trial: job.trial,
                    seed: job.seed,
                    algorithm: alg,
                    status: Status::Ok,
                    sum_rate: sol.sum_rate,
                    scheduled_count: sol.num_scheduled(),
                    runtime_seconds: elapsed,
                    converged: sol.converged,
                    rates: sol.rates,
                    bs_powers: sol.bs_power,
                    error: String::new(),
                }
            }
            Ok(Err(e)) => {
                warn!("{alg} at {} = {} trial {}: {e}", job.axis, job.value, job.trial);
                TrialRecord::failed(job, alg, elapsed, e.to_string())
            }
            Err(payload) => {
                let msg = payload
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| payload.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "panic".to_string());
                warn!("{alg} at {} = {} trial {} panicked: {msg}", job.axis, job.value, job.trial);
                TrialRecord::failed(job, alg, elapsed, format!("panic: {msg}"))
            }
        };
        out.push(record);
    }
    Ok(out)
}

/// Default dispatcher: the library schedulers with default settings.
pub fn solve(alg: Algorithm, inst: &Instance) -> jtsched_core::Result<Run> {
    let (ch, t, cfg) = (&inst.channels, &inst.targets, &inst.config);
    Ok(match alg {
        Algorithm::Alg1 => Run { solution: run_algorithm1(ch, t, cfg, &ScaSettings::default())?, subsets: None },
        Algorithm::Alg2 => {
            let (solution, subsets) = run_algorithm2(ch, t, cfg, &ExhaustiveSettings::default())?;
            Run { solution, subsets: Some(subsets) }
        }
        Algorithm::Alg3 => Run { solution: run_algorithm3(ch, t, cfg, inst.sus_threshold)?, subsets: None },
    })
}

fn artifact_name(job: &Job, alg: Algorithm) -> String {
    format!("{alg}_{}_{}_{}.csv", job.axis, job.value, job.trial)
}

fn write_artifacts(spec: &ExperimentSpec, job: &Job, alg: Algorithm, sol: &ScheduleSolution, subsets: Option<&[SubsetRecord]>) -> Result<()> {
    if let (Some(dir), Algorithm::Alg1) = (&spec.trace_dir, alg) {
        write_trace_csv(&sol.trace, create(&dir.join(artifact_name(job, alg)))?)?;
    }
    if let (Some(dir), Some(subsets)) = (&spec.subset_dir, subsets) {
        write_subset_csv(subsets, create(&dir.join(artifact_name(job, alg)))?)?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    Ok(File::create(path)?)
}
