//! SINR, rate and power bookkeeping shared by every scheduler.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{block_energy, block_range, gain, is_unit_norm, unit, CVector};
use crate::scenario::{ChannelSet, NetworkConfig};
use crate::schedule::ScheduleSolution;
use crate::{Error, Result};

/// Diagonal 0/1 matrix selecting the antennas of BS `b` (1-based).
pub fn selection_matrix(b: usize, num_bs: usize, antennas_per_bs: usize) -> Result<DMatrix<f64>> {
    if b == 0 || b > num_bs {
        return Err(Error::OutOfRange { index: b, limit: num_bs });
    }
    let m = num_bs * antennas_per_bs;
    let mut q = DMatrix::zeros(m, m);
    for i in block_range(b - 1, antennas_per_bs) {
        q[(i, i)] = 1.0;
    }
    Ok(q)
}

/// Downlink SINR of user `k`. Interference is summed over active users
/// other than `k`; noise is unit after normalization.
pub fn downlink_sinr(k: usize, p: &[f64], w: &[CVector], h: &[CVector], active: &[bool]) -> f64 {
    let hk = &h[k];
    let interference: f64 = (0..w.len())
        .filter(|&l| l != k && active[l])
        .map(|l| p[l] * gain(hk, &w[l]))
        .sum();
    p[k] * gain(hk, &w[k]) / (interference + 1.0)
}

/// `‖Q w‖² = Σ_b λ_b ‖Q_b w‖²`.
pub fn weighted_noise(w: &CVector, lambda: &[f64], antennas_per_bs: usize) -> f64 {
    lambda
        .iter()
        .enumerate()
        .map(|(b, &l)| l * block_energy(w, b, antennas_per_bs))
        .sum()
}

/// Virtual-uplink SINR of user `k` with receive filter `w[k]` and BS
/// weights `lambda`.
pub fn uplink_sinr(k: usize, q: &[f64], w: &[CVector], h: &[CVector], lambda: &[f64], antennas_per_bs: usize) -> Result<f64> {
    if lambda.iter().any(|&l| l < 0.0) || !(lambda.iter().sum::<f64>() > 0.0) {
        return Err(Error::Domain("BS weights must be nonnegative with a positive sum".into()));
    }
    let wk = &w[k];
    let interference: f64 = (0..q.len()).filter(|&l| l != k).map(|l| q[l] * gain(&h[l], wk)).sum();
    Ok(q[k] * gain(&h[k], wk) / (interference + weighted_noise(wk, lambda, antennas_per_bs)))
}

/// Shannon rate in bits/s/Hz.
#[inline]
pub fn rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Power drawn from BS `b` (0-based): `Σ_k p_k ‖Q_b w_k‖²`.
pub fn per_bs_power(p: &[f64], w: &[CVector], b: usize, antennas_per_bs: usize) -> f64 {
    p.iter()
        .zip(w)
        .map(|(&pk, wk)| if pk == 0.0 { 0.0 } else { pk * block_energy(wk, b, antennas_per_bs) })
        .sum()
}

/// Power drawn from every BS.
pub fn bs_powers(p: &[f64], w: &[CVector], num_bs: usize, antennas_per_bs: usize) -> Vec<f64> {
    (0..num_bs).map(|b| per_bs_power(p, w, b, antennas_per_bs)).collect()
}

/// Per-user QoS requirements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTargets {
    /// Single-user full-power MRT rate `r̃_k`.
    pub single_user_rate: Vec<f64>,
    /// Minimum rate `r_k`.
    pub min_rate: Vec<f64>,
    /// SINR target `2^{r_k} − 1`.
    pub sinr_target: Vec<f64>,
    /// False for users that cannot be served at all (zero channel).
    pub feasible: Vec<bool>,
}

impl RateTargets {
    /// Targets from explicit minimum rates; every user is marked feasible.
    pub fn from_min_rates(min_rate: Vec<f64>) -> Self {
        let sinr_target = min_rate.iter().map(|&r| 2f64.powf(r) - 1.0).collect();
        RateTargets {
            single_user_rate: min_rate.clone(),
            feasible: vec![true; min_rate.len()],
            min_rate,
            sinr_target,
        }
    }

    /// Indices of users eligible for scheduling.
    pub fn candidates(&self) -> Vec<usize> {
        (0..self.feasible.len()).filter(|&k| self.feasible[k]).collect()
    }

    pub fn len(&self) -> usize {
        self.min_rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min_rate.is_empty()
    }
}

/// Largest MRT power that respects every per-BS budget.
pub fn single_user_power(w: &CVector, budgets: &[f64], antennas_per_bs: usize) -> f64 {
    budgets
        .iter()
        .enumerate()
        .filter_map(|(b, &pb)| {
            let e = block_energy(w, b, antennas_per_bs);
            (e > 0.0).then(|| pb / e)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Rate targets as a fraction of each user's single-user MRT rate.
pub fn rate_targets(channels: &ChannelSet, config: &NetworkConfig) -> RateTargets {
    let k = channels.num_users();
    let mut out = RateTargets {
        single_user_rate: vec![0.0; k],
        min_rate: vec![0.0; k],
        sinr_target: vec![0.0; k],
        feasible: vec![false; k],
    };
    for (i, h) in channels.normalized.iter().enumerate() {
        let Some(w) = unit(h) else { continue };
        let p = single_user_power(&w, &config.power_budgets, channels.antennas_per_bs);
        let r_tilde = rate(p * gain(h, &w));
        if !r_tilde.is_finite() || r_tilde <= 0.0 {
            continue;
        }
        let r = config.rate_fraction * r_tilde;
        out.single_user_rate[i] = r_tilde;
        out.min_rate[i] = r;
        out.sinr_target[i] = 2f64.powf(r) - 1.0;
        out.feasible[i] = true;
    }
    out
}

/// Tolerances for [`validate_solution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative slack on the per-user minimum rate.
    pub qos: f64,
    /// Relative slack on per-BS budgets.
    pub power: f64,
    /// Absolute slack on `‖w_k‖ = 1`.
    pub unit_norm: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { qos: 1e-5, power: 1e-5, unit_norm: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Qos { user: usize, rate: f64, required: f64 },
    Power { bs: usize, used: f64, budget: f64 },
    Cardinality { scheduled: usize, limit: usize },
    BeamformerNorm { user: usize, norm: f64 },
    UnscheduledPower { user: usize, power: f64 },
    NegativePower { user: usize, power: f64 },
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Sum rate recomputed from powers and beamformers.
    pub sum_rate: f64,
    pub rates: Vec<f64>,
    pub bs_power: Vec<f64>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-evaluates a solution from its powers and beamformers and lists every
/// constraint it breaks.
pub fn validate_solution(
    sol: &ScheduleSolution,
    channels: &ChannelSet,
    targets: &RateTargets,
    config: &NetworkConfig,
    tol: Tolerances,
) -> ValidationReport {
    let k = channels.num_users();
    let mut violations = Vec::new();
    let mut report = |v| violations.push(v);
    if sol.scheduled.len() != k || sol.downlink_power.len() != k || sol.beamformers.len() != k || targets.len() != k {
        report(Violation::Shape("solution, targets and channels disagree on K".into()));
        return ValidationReport { violations, sum_rate: 0.0, rates: vec![], bs_power: vec![] };
    }
    let limit = config.total_antennas();
    let count = sol.scheduled.iter().filter(|&&s| s).count();
    if count > limit {
        report(Violation::Cardinality { scheduled: count, limit });
    }
    // Unscheduled users are given zero power; their beamformers play no role.
    let p: Vec<f64> = (0..k).map(|i| if sol.scheduled[i] { sol.downlink_power[i] } else { 0.0 }).collect();
    let mut rates = vec![0.0; k];
    for i in 0..k {
        let pk = sol.downlink_power[i];
        if pk < 0.0 || !pk.is_finite() {
            report(Violation::NegativePower { user: i, power: pk });
        }
        if !sol.scheduled[i] {
            if pk != 0.0 {
                report(Violation::UnscheduledPower { user: i, power: pk });
            }
            continue;
        }
        if !is_unit_norm(&sol.beamformers[i], tol.unit_norm) {
            report(Violation::BeamformerNorm { user: i, norm: sol.beamformers[i].norm() });
        }
        let r = rate(downlink_sinr(i, &p, &sol.beamformers, &channels.normalized, &sol.scheduled));
        rates[i] = r;
        let req = targets.min_rate[i];
        if !targets.feasible[i] || r < req * (1.0 - tol.qos) {
            report(Violation::Qos { user: i, rate: r, required: req });
        }
    }
    let bs_power = bs_powers(&p, &sol.beamformers, config.num_bs, config.antennas_per_bs);
    for (b, (&used, &budget)) in bs_power.iter().zip(&config.power_budgets).enumerate() {
        if used > budget * (1.0 + tol.power) {
            report(Violation::Power { bs: b, used, budget });
        }
    }
    ValidationReport { violations, sum_rate: rates.iter().sum(), rates, bs_power }
}
