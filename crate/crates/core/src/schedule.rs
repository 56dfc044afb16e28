//! Scheduler output type and the final power-restoration step shared by the
//! duality-based schedulers.

use std::fmt::Write as _;
use std::io;

use crate::duality::downlink_power_for_targets;
use crate::linalg::CVector;
use crate::phy::{bs_powers, downlink_sinr, rate};
use crate::scenario::{ChannelSet, NetworkConfig};

const BISECTION_STEPS: usize = 60;

/// One row of an optimizer's iteration history.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub outer: usize,
    pub middle: usize,
    pub inner: usize,
    /// Subproblem objective.
    pub zeta: f64,
    /// Uplink (weighted) sum rate after the beamformer refresh.
    pub upsilon: f64,
    pub tau: f64,
    /// Binary penalty `Σ(μ − μ²)`.
    pub penalty: f64,
    pub lambda: Vec<f64>,
}

/// Writes a trace as CSV: `outer,middle,inner,zeta,upsilon,tau,penalty,lambda_1..lambda_B`.
pub fn write_trace_csv<W: io::Write>(rows: &[TraceRow], mut out: W) -> io::Result<()> {
    let nb = rows.first().map_or(0, |r| r.lambda.len());
    let mut header = String::from("outer,middle,inner,zeta,upsilon,tau,penalty");
    for b in 1..=nb {
        let _ = write!(header, ",lambda_{b}");
    }
    writeln!(out, "{header}")?;
    for r in rows {
        write!(out, "{},{},{},{},{},{},{}", r.outer, r.middle, r.inner, r.zeta, r.upsilon, r.tau, r.penalty)?;
        for l in &r.lambda {
            write!(out, ",{l}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// A complete schedule: who is served, with which beamformer and power.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSolution {
    /// Scheduling variables before rounding (0/1 for non-relaxing schedulers).
    pub relaxed_mask: Vec<f64>,
    pub scheduled: Vec<bool>,
    pub downlink_power: Vec<f64>,
    pub uplink_power: Vec<f64>,
    pub beamformers: Vec<CVector>,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    pub bs_power: Vec<f64>,
    pub lambda: Vec<f64>,
    pub converged: bool,
    /// Downlink power that the unrestricted uplink→downlink mapping assigns
    /// to users that were rounded out. Zero for schedulers without rounding.
    pub unscheduled_power: f64,
    pub trace: Vec<TraceRow>,
}

impl ScheduleSolution {
    /// Nobody scheduled.
    pub fn empty(num_users: usize, num_bs: usize, total_antennas: usize) -> Self {
        ScheduleSolution {
            relaxed_mask: vec![0.0; num_users],
            scheduled: vec![false; num_users],
            downlink_power: vec![0.0; num_users],
            uplink_power: vec![0.0; num_users],
            beamformers: vec![CVector::zeros(total_antennas); num_users],
            rates: vec![0.0; num_users],
            sum_rate: 0.0,
            bs_power: vec![0.0; num_bs],
            lambda: vec![1.0 / num_bs as f64; num_bs],
            converged: true,
            unscheduled_power: 0.0,
            trace: Vec::new(),
        }
    }

    /// Builds a solution and evaluates its rates and per-BS powers. Powers of
    /// unscheduled users are forced to zero.
    pub fn assemble(
        channels: &ChannelSet,
        config: &NetworkConfig,
        scheduled: Vec<bool>,
        mut downlink_power: Vec<f64>,
        beamformers: Vec<CVector>,
        uplink_power: Vec<f64>,
        lambda: Vec<f64>,
    ) -> Self {
        for (p, &s) in downlink_power.iter_mut().zip(&scheduled) {
            if !s {
                *p = 0.0;
            }
        }
        let rates: Vec<f64> = (0..scheduled.len())
            .map(|k| {
                if scheduled[k] {
                    rate(downlink_sinr(k, &downlink_power, &beamformers, &channels.normalized, &scheduled))
                } else {
                    0.0
                }
            })
            .collect();
        ScheduleSolution {
            relaxed_mask: scheduled.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect(),
            bs_power: bs_powers(&downlink_power, &beamformers, config.num_bs, config.antennas_per_bs),
            sum_rate: rates.iter().sum(),
            rates,
            scheduled,
            downlink_power,
            uplink_power,
            beamformers,
            lambda,
            converged: true,
            unscheduled_power: 0.0,
            trace: Vec::new(),
        }
    }

    pub fn scheduled_users(&self) -> Vec<usize> {
        (0..self.scheduled.len()).filter(|&k| self.scheduled[k]).collect()
    }

    pub fn num_scheduled(&self) -> usize {
        self.scheduled.iter().filter(|&&s| s).count()
    }
}

fn within_budgets(p: &[f64], w: &[CVector], config: &NetworkConfig) -> bool {
    bs_powers(p, w, config.num_bs, config.antennas_per_bs)
        .iter()
        .zip(&config.power_budgets)
        .all(|(used, budget)| used <= budget)
}

/// Downlink powers for `set` that meet every per-BS budget, pushing the
/// SINRs as far as possible from `floor` towards `ceiling` along the
/// segment between them. Returns `None` when even `floor` cannot be met.
pub fn fit_to_budgets(
    set: &[usize],
    w: &[CVector],
    channels: &ChannelSet,
    config: &NetworkConfig,
    floor: &[f64],
    ceiling: &[f64],
) -> Option<Vec<f64>> {
    let h = &channels.normalized;
    let targets = |beta: f64| -> Vec<f64> {
        let mut t = vec![0.0; h.len()];
        for &k in set {
            t[k] = floor[k] + beta * (ceiling[k] - floor[k]).max(0.0);
        }
        t
    };
    let attempt = |beta: f64| {
        downlink_power_for_targets(set, w, h, &targets(beta))
            .ok()
            .filter(|p| within_budgets(p, w, config))
    };
    if let Some(p) = attempt(1.0) {
        return Some(p);
    }
    let mut best = attempt(0.0)?;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        match attempt(mid) {
            Some(p) => {
                best = p;
                lo = mid;
            }
            None => hi = mid,
        }
    }
    Some(best)
}
