//! Exhaustive search over scheduled sets: an SOCP feasibility gate per set,
//! then sum-rate maximization with the set held fixed.

use std::io::{self, Write};

use log::warn;

use crate::conic::{Affine, ClarabelSolver, ComplexVars, ConicProblem, ConicSolver, ConicStatus};
use crate::duality::{
    diminishing_step, downlink_power_from_uplink, mmse_beamformers, subgradient, update_lambda, uplink_power_from_downlink,
    uplink_sinrs, BsWeights,
};
use crate::linalg::{block_range, CVector};
use crate::phy::{validate_solution, RateTargets, Tolerances};
use crate::sca::{add_log_tangents, add_sinr_cone, Gains, ScaSettings};
use crate::scenario::{ChannelSet, NetworkConfig};
use crate::schedule::{fit_to_budgets, ScheduleSolution};
use crate::zfbf::{assemble_zf, fits_budgets, min_qos_power, zf_beamformers, zf_power_allocation};
use crate::{Error, Result};

/// Largest user count accepted by [`run_algorithm2`] unless overridden.
pub const DEFAULT_ENUMERATION_CAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExhaustiveSettings {
    pub sca: ScaSettings,
    pub max_users: usize,
}

impl Default for ExhaustiveSettings {
    fn default() -> Self {
        ExhaustiveSettings { sca: ScaSettings::default(), max_users: DEFAULT_ENUMERATION_CAP }
    }
}

/// Outcome of one enumerated set.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetRecord {
    pub users: Vec<usize>,
    pub feasible: bool,
    pub sum_rate: f64,
}

impl SubsetRecord {
    /// Bit `k` set for every user `k` in the set.
    pub fn mask(&self) -> u64 {
        self.users.iter().fold(0, |m, &k| m | (1 << k))
    }
}

pub fn write_subset_csv<W: io::Write>(records: &[SubsetRecord], out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "bitmask,feasible,sum_rate")?;
    for r in records {
        writeln!(out, "{},{},{}", r.mask(), r.feasible, r.sum_rate)?;
    }
    Ok(())
}

/// Every nonempty subset of `0..k` with at most `limit` members, by
/// increasing size and lexicographically within a size.
pub fn enumerate_subsets(k: usize, limit: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 1..=limit.min(k) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.clone());
            // advance to the next combination
            let Some(i) = (0..size).rev().find(|&i| idx[i] < k - size + i) else { break };
            idx[i] += 1;
            for j in i + 1..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

/// Minimum total power beamformers meeting every SINR target in `set`
/// within the per-BS budgets. Returns `None` when no such beamformers
/// exist, or when the solver cannot decide.
pub fn feasibility_socp(
    set: &[usize],
    channels: &ChannelSet,
    targets: &RateTargets,
    config: &NetworkConfig,
    solver: &dyn ConicSolver,
) -> Result<Option<Vec<CVector>>> {
    if set.is_empty() || set.len() > config.total_antennas() {
        return Ok(None);
    }
    let h = &channels.normalized;
    let m = config.total_antennas();
    let mut p = ConicProblem::new();
    let vars: Vec<ComplexVars> = set.iter().map(|_| ComplexVars::new(&mut p, m)).collect();
    let t = p.add_var(0.0, f64::INFINITY);
    p.set_objective(Affine::var(t));
    p.add_soc(Affine::var(t), vars.iter().flat_map(|v| v.coordinates()).collect());
    for (i, &k) in set.iter().enumerate() {
        let g = targets.sinr_target[k];
        if !(g > 0.0) {
            return Err(Error::Domain(format!("user {k} has a nonpositive SINR target")));
        }
        let (own_re, own_im) = vars[i].inner(&h[k]);
        p.add_eq(own_im);
        let mut tail = Vec::with_capacity(2 * set.len() + 1);
        for (l, v) in vars.iter().enumerate() {
            if l != i {
                let (re, im) = v.inner(&h[k]);
                tail.push(re);
                tail.push(im);
            }
        }
        tail.push(own_re.clone());
        tail.push(Affine::constant(1.0));
        p.add_soc(own_re.scaled((1.0 + 1.0 / g).sqrt()), tail);
    }
    for b in 0..config.num_bs {
        let tail = vars
            .iter()
            .flat_map(|v| block_range(b, config.antennas_per_bs).flat_map(move |r| [Affine::var(v.re[r]), Affine::var(v.im[r])]))
            .collect();
        p.add_soc(Affine::constant(config.power_budgets[b].sqrt()), tail);
    }
    let sol = solver.solve(&p)?;
    match sol.status {
        ConicStatus::Optimal => Ok(Some(vars.iter().map(|v| v.value(&sol.x)).collect())),
        ConicStatus::Infeasible => Ok(None),
        status => {
            warn!("feasibility of {set:?} undecided ({status:?}); skipping");
            Ok(None)
        }
    }
}

/// Fixed-set subproblem over `(q, θ, ϑ)`: maximize `Σϑ` with the SINR
/// surrogate cones, exact QoS rows and the uplink budget.
fn build_fixed_subproblem(gains: &Gains, q0: &[f64], theta0: &[f64], targets: &[f64], budget: f64, tangents: usize) -> (ConicProblem, Vec<usize>) {
    let n = gains.len();
    let mut p = ConicProblem::new();
    let q = p.add_vars(n, 0.0, f64::INFINITY);
    let theta: Vec<usize> = (0..n).map(|i| p.add_var(0.0, budget * gains.own[i] / gains.noise[i])).collect();
    let vartheta = p.add_vars(n, 0.0, f64::INFINITY);
    for i in 0..n {
        add_sinr_cone(&mut p, gains, i, &q, q0, (theta[i], 1.0, theta0[i]));
        add_log_tangents(&mut p, theta[i], vartheta[i], budget * gains.own[i] / gains.noise[i], tangents);
        // γ̃ (I + n) ≤ c q, scaled by the noise
        let s = 1.0 / gains.noise[i];
        let row = (0..n)
            .filter(|&l| l != i)
            .fold(Affine::constant(targets[i] * gains.noise[i] * s), |a, l| a.term(q[l], targets[i] * gains.cross[(l, i)] * s))
            .term(q[i], -gains.own[i] * s);
        p.add_le(row);
    }
    p.add_le(q.iter().fold(Affine::constant(-budget), |a, &j| a.term(j, 1.0)));
    p.set_objective(vartheta.iter().fold(Affine::default(), |a, &j| a.term(j, -1.0)));
    (p, q)
}

fn rel_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(1e-12)
}

fn keep_best(best: &mut Option<ScheduleSolution>, cand: ScheduleSolution) {
    if best.as_ref().is_none_or(|b| cand.sum_rate > b.sum_rate) {
        *best = Some(cand);
    }
}

/// Maximizes the sum rate with the scheduled set fixed to `set`, starting
/// from the feasibility beamformers `w_tilde` (one per member, in order).
/// The zero-forcing point for the same set is evaluated as an extra start.
pub fn fixed_set_optimize(
    set: &[usize],
    w_tilde: &[CVector],
    channels: &ChannelSet,
    targets: &RateTargets,
    config: &NetworkConfig,
    settings: &ScaSettings,
    solver: &dyn ConicSolver,
) -> Result<Option<ScheduleSolution>> {
    if set.len() != w_tilde.len() {
        return Err(Error::Malformed("one feasibility beamformer per member expected".into()));
    }
    let kk = channels.num_users();
    let (nb, nt) = (config.num_bs, config.antennas_per_bs);
    let h = &channels.normalized;
    let gt: Vec<f64> = set.iter().map(|&k| targets.sinr_target[k]).collect();
    let max_budget = config.power_budgets.iter().cloned().fold(0.0, f64::max);
    let mut scheduled = vec![false; kk];
    for &k in set {
        scheduled[k] = true;
    }
    let mut w0 = vec![CVector::zeros(nb * nt); kk];
    let mut p0 = vec![0.0; kk];
    for (&k, wt) in set.iter().zip(w_tilde) {
        p0[k] = wt.norm_squared();
        w0[k] = wt.unscale(p0[k].sqrt());
    }

    let mut best = None;
    if let Ok(zf) = zf_beamformers(set, h) {
        let floor = min_qos_power(&zf, targets);
        if fits_budgets(&zf, &floor, config) {
            let p = zf_power_allocation(&zf, &floor, config)?;
            keep_best(&mut best, assemble_zf(channels, config, &zf, &p));
        }
    }

    let mut weights = BsWeights::uniform(nb, nt);
    let mut rho0 = f64::NAN;
    for outer in 0..settings.outer_cap {
        let budget = weights.uplink_budget(&config.power_budgets);
        let mut w = w0.clone();
        let mut q = uplink_power_from_downlink(set, &p0, &w, h, &weights)?;
        let total: f64 = set.iter().map(|&k| q[k]).sum();
        if total > budget {
            q.iter_mut().for_each(|v| *v *= budget / total);
        }
        let local = |q: &[f64]| set.iter().map(|&k| q[k]).collect::<Vec<f64>>();
        let mut gains = Gains::new(set, &w, h, &weights);
        let mut ups: f64 = (0..set.len()).map(|i| (1.0 + gains.sinr(i, &local(&q))).log2()).sum();
        for _ in 0..settings.middle_cap {
            let ql = local(&q);
            let theta: Vec<f64> = (0..set.len()).map(|i| gains.sinr(i, &ql)).collect();
            let (prob, qv) = build_fixed_subproblem(&gains, &ql, &theta, &gt, budget, settings.tangents);
            let sol = solver.solve(&prob)?;
            if !sol.is_optimal() {
                warn!("fixed-set subproblem for {set:?} returned {:?}", sol.status);
                break;
            }
            for (i, &k) in set.iter().enumerate() {
                q[k] = sol.x[qv[i]].max(0.0);
            }
            for (wk, &k) in mmse_beamformers(set, &q, h, &weights)?.into_iter().zip(set) {
                w[k] = wk;
            }
            gains = Gains::new(set, &w, h, &weights);
            let new: f64 = (0..set.len()).map(|i| (1.0 + gains.sinr(i, &local(&q))).log2()).sum();
            let settled = rel_change(new, ups) <= settings.delta;
            ups = new;
            if settled {
                break;
            }
        }

        let ceiling = uplink_sinrs(set, &q, &w, h, &weights)?;
        if let Some(p) = fit_to_budgets(set, &w, channels, config, &targets.sinr_target, &ceiling) {
            let sol = ScheduleSolution::assemble(channels, config, scheduled.clone(), p, w.clone(), q.clone(), weights.lambda().to_vec());
            keep_best(&mut best, sol);
        }
        if rel_change(ups, rho0) <= settings.delta {
            break;
        }
        rho0 = ups;
        let p_full = match downlink_power_from_uplink(set, &q, &w, h, &weights) {
            Ok(p) => p,
            Err(e) => {
                warn!("stopping multiplier updates for {set:?}: {e}");
                break;
            }
        };
        let g = subgradient(&p_full, &w, &config.power_budgets, nt);
        weights = BsWeights::new(update_lambda(weights.lambda(), &g, diminishing_step(settings.lambda_step, outer) / max_budget), nt)?;
    }

    if best.is_none() {
        if let Some(p) = fit_to_budgets(set, &w0, channels, config, &targets.sinr_target, &targets.sinr_target) {
            let lambda = BsWeights::uniform(nb, nt).lambda().to_vec();
            best = Some(ScheduleSolution::assemble(channels, config, scheduled, p, w0, vec![0.0; kk], lambda));
        }
    }
    Ok(best)
}

/// Runs the exhaustive search with the default Clarabel backend.
pub fn run_algorithm2(
    channels: &ChannelSet,
    targets: &RateTargets,
    config: &NetworkConfig,
    settings: &ExhaustiveSettings,
) -> Result<(ScheduleSolution, Vec<SubsetRecord>)> {
    run_algorithm2_with(channels, targets, config, settings, &ClarabelSolver::new(settings.sca.solver))
}

/// Evaluates every set; returns the best solution and one record per set
/// in enumeration order. Ties go to the lexicographically smallest set.
pub fn run_algorithm2_with(
    channels: &ChannelSet,
    targets: &RateTargets,
    config: &NetworkConfig,
    settings: &ExhaustiveSettings,
    solver: &dyn ConicSolver,
) -> Result<(ScheduleSolution, Vec<SubsetRecord>)> {
    config.validate()?;
    let kk = channels.num_users();
    if kk > settings.max_users {
        return Err(Error::EnumerationCap { users: kk, cap: settings.max_users });
    }
    let mut best: Option<(Vec<usize>, ScheduleSolution)> = None;
    let mut records = Vec::new();
    for set in enumerate_subsets(kk, config.total_antennas()) {
        let mut record = SubsetRecord { users: set.clone(), feasible: false, sum_rate: 0.0 };
        if set.iter().all(|&k| targets.feasible[k]) {
            if let Some(w_tilde) = feasibility_socp(&set, channels, targets, config, solver)? {
                record.feasible = true;
                if let Some(sol) = fixed_set_optimize(&set, &w_tilde, channels, targets, config, &settings.sca, solver)? {
                    let report = validate_solution(&sol, channels, targets, config, Tolerances::default());
                    if report.is_valid() {
                        record.sum_rate = sol.sum_rate;
                        let better = match &best {
                            None => true,
                            Some((s, b)) => sol.sum_rate > b.sum_rate || (sol.sum_rate == b.sum_rate && set < *s),
                        };
                        if better {
                            best = Some((set.clone(), sol));
                        }
                    } else {
                        warn!("fixed-set solution for {set:?} failed validation: {:?}", report.violations);
                    }
                }
            }
        }
        records.push(record);
    }
    let sol = best.map(|(_, s)| s).unwrap_or_else(|| ScheduleSolution::empty(kk, config.num_bs, config.total_antennas()));
    Ok((sol, records))
}
