//! Joint scheduling and beamforming by penalized successive convex
//! approximation on the virtual uplink.
//!
//! Three nested loops: the inner loop solves convexified subproblems over
//! `(μ, q, θ, ϑ, κ)` with the penalty weight `τ` growing until the relaxed
//! objective settles; the middle loop refreshes the MMSE receivers; the
//! outer loop takes sub-gradient steps on the per-BS weights `λ`.

pub mod surrogate;

use log::{debug, warn};
use std::f64::consts::LN_2;

use crate::conic::{Affine, ClarabelSolver, ConicProblem, ConicSolver, SolverTolerances};
use crate::duality::{
    diminishing_step, downlink_power_from_uplink, mmse_beamformers, subgradient, update_lambda, uplink_sinrs, BsWeights,
};
use crate::linalg::{block_energy, unit, CVector};
use crate::phy::RateTargets;
use crate::scenario::{ChannelSet, NetworkConfig};
use crate::schedule::{fit_to_budgets, ScheduleSolution, TraceRow};
use crate::{Error, Result};

pub use surrogate::{binary_penalty, relaxed_objective, Gains};

/// Tuning knobs of the penalized SCA scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaSettings {
    pub tau0: f64,
    /// Step `ς` of the penalty-weight update.
    pub tau_step: f64,
    /// Relative stopping threshold shared by all three loops.
    pub delta: f64,
    pub inner_cap: usize,
    pub middle_cap: usize,
    pub outer_cap: usize,
    /// Base of the diminishing `λ` step, in units of the largest budget.
    pub lambda_step: f64,
    /// Tangent lines used for `ϑ ≤ log₂(1 + θ)`.
    pub tangents: usize,
    /// `μ_k` at or above this value is rounded to one.
    pub round_threshold: f64,
    pub solver: SolverTolerances,
}

impl Default for ScaSettings {
    fn default() -> Self {
        ScaSettings {
            tau0: 0.1,
            tau_step: 0.1,
            delta: 1e-3,
            inner_cap: 50,
            middle_cap: 30,
            outer_cap: 20,
            lambda_step: 0.5,
            tangents: 64,
            round_threshold: 0.5,
            solver: SolverTolerances::default(),
        }
    }
}

/// Decision variables of one convexified subproblem, over the local
/// candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaIterate {
    pub mu: Vec<f64>,
    pub q: Vec<f64>,
    pub theta: Vec<f64>,
    pub vartheta: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl ScaIterate {
    /// Point with `θ` equal to the uplink SINRs of `q`, `μ` the largest
    /// value `≤ mu_cap` meeting the QoS coupling, and `ϑ, κ` tight.
    pub fn anchored(gains: &Gains, q: Vec<f64>, targets: &[f64], mu_cap: &[f64]) -> Self {
        let n = gains.len();
        let theta: Vec<f64> = (0..n).map(|i| gains.sinr(i, &q)).collect();
        let mu: Vec<f64> = (0..n)
            .map(|i| if targets[i] > 0.0 { mu_cap[i].min(theta[i] / targets[i]) } else { mu_cap[i] }.clamp(0.0, 1.0))
            .collect();
        let vartheta: Vec<f64> = theta.iter().map(|t| (1.0 + t).log2()).collect();
        let kappa = mu.iter().zip(&vartheta).map(|(m, v)| (m * v).sqrt()).collect();
        ScaIterate { mu, q, theta, vartheta, kappa }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.mu.len();
        let vecs = [&self.q, &self.theta, &self.vartheta, &self.kappa];
        if vecs.iter().any(|v| v.len() != n) {
            return Err(Error::Malformed("iterate vectors differ in length".into()));
        }
        if vecs.iter().chain([&&self.mu]).any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Malformed("iterate has non-finite entries".into()));
        }
        if self.q.iter().chain(&self.theta).any(|&x| x < 0.0) || self.mu.iter().any(|&m| !(0.0..=1.0).contains(&m)) {
            return Err(Error::Malformed("iterate outside its box".into()));
        }
        Ok(())
    }

    /// Pulls a solver output back onto the exact feasible set of the
    /// nonconvex constraints (removes interior-point round-off).
    fn repair(&mut self, gains: &Gains, targets: &[f64]) {
        for v in self.q.iter_mut().chain(&mut self.theta).chain(&mut self.vartheta).chain(&mut self.kappa) {
            *v = v.max(0.0);
        }
        for i in 0..self.len() {
            self.mu[i] = self.mu[i].clamp(0.0, 1.0);
            let sinr = gains.sinr(i, &self.q);
            self.theta[i] = self.theta[i].min(sinr);
            if targets[i] > 0.0 {
                self.mu[i] = self.mu[i].min(sinr / targets[i]);
            }
            self.vartheta[i] = self.vartheta[i].min((1.0 + self.theta[i]).log2());
            self.kappa[i] = self.kappa[i].min((self.mu[i] * self.vartheta[i]).sqrt());
        }
    }
}

/// Variable indices of a built subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub mu: Vec<usize>,
    pub q: Vec<usize>,
    pub theta: Vec<usize>,
    pub vartheta: Vec<usize>,
    pub kappa: Vec<usize>,
    /// Epigraph variable for `(Σμ)²`.
    pub z: usize,
}

impl Layout {
    pub fn extract(&self, x: &[f64]) -> ScaIterate {
        let pick = |idx: &[usize]| idx.iter().map(|&i| x[i]).collect();
        ScaIterate {
            mu: pick(&self.mu),
            q: pick(&self.q),
            theta: pick(&self.theta),
            vartheta: pick(&self.vartheta),
            kappa: pick(&self.kappa),
        }
    }
}

/// Grid `θ_j = (1 + θ_max)^{j/(T−1)} − 1`, geometric in `1 + θ`.
pub fn tangent_grid(theta_max: f64, count: usize) -> Vec<f64> {
    if count <= 1 || theta_max <= 0.0 {
        return vec![0.0];
    }
    let top = (1.0 + theta_max).ln();
    (0..count).map(|j| (top * j as f64 / (count - 1) as f64).exp_m1()).collect()
}

/// `ϑ ≤ log₂(1 + θ)` replaced by its tangents on [`tangent_grid`]. Between
/// neighbouring grid points the outer approximation overshoots by at most
/// `(ln r)² / (8 ln 2)` bits, `r` the grid ratio.
pub fn add_log_tangents(problem: &mut ConicProblem, theta: usize, vartheta: usize, theta_max: f64, count: usize) {
    for t in tangent_grid(theta_max, count) {
        let slope = 1.0 / ((1.0 + t) * LN_2);
        // ϑ − slope·θ − (log₂(1+t) − slope·t) ≤ 0
        problem.add_le(Affine::var(vartheta).term(theta, -slope).plus_const(slope * t - (1.0 + t).log2()));
    }
}

/// Convex inner approximation of `a·x ≤ SINR_i(q)` around `(x₀, q₀)`:
/// `½(a x + I)² ≤ ϱ − a n x + c q_i`, with `ϱ` the tangent of
/// `½(a x)² + ½I²`. Exact at the anchor; scaled so the cone rows stay O(1).
pub fn add_sinr_cone(p: &mut ConicProblem, gains: &Gains, i: usize, q: &[usize], q0: &[f64], x: (usize, f64, f64)) {
    let (x, a, x0) = x;
    let int = (0..q.len()).filter(|&l| l != i).fold(Affine::default(), |acc, l| acc.term(q[l], gains.cross[(l, i)]));
    let i0 = gains.interference(i, q0);
    let s = Affine::default().term(x, a).plus(&int);
    let l = int
        .scaled(i0)
        .term(x, a * a * x0 - a * gains.noise[i])
        .term(q[i], gains.own[i])
        .plus_const(-0.5 * ((a * x0).powi(2) + i0 * i0));
    let sc = (a * x0 + i0).max(1.0);
    p.add_half_square_le(s.scaled(1.0 / sc), l.scaled(1.0 / (sc * sc)));
}

/// Builds the convexified subproblem at `point`.
///
/// Constraint families, per user: the SINR-surrogate cone, the QoS-coupling
/// cone, the `ϑ` tangents and the `κ² ≤ μϑ` cone; globally the uplink
/// budget, the cardinality limit and the `(Σμ)²` epigraph.
pub fn build_subproblem(
    point: &ScaIterate,
    tau: f64,
    gains: &Gains,
    targets: &[f64],
    budget: f64,
    limit: usize,
    tangents: usize,
) -> Result<(ConicProblem, Layout)> {
    point.check()?;
    let n = gains.len();
    if point.len() != n || targets.len() != n {
        return Err(Error::Malformed("iterate, gains and targets disagree on size".into()));
    }
    if !(tau > 0.0) || budget < 0.0 {
        return Err(Error::Domain("penalty weight must be positive and budget nonnegative".into()));
    }
    let mut p = ConicProblem::new();
    let mu = p.add_vars(n, 0.0, 1.0);
    let q = p.add_vars(n, 0.0, f64::INFINITY);
    let theta: Vec<usize> = (0..n).map(|i| p.add_var(0.0, budget * gains.own[i] / gains.noise[i])).collect();
    let vartheta = p.add_vars(n, 0.0, f64::INFINITY);
    let kappa = p.add_vars(n, 0.0, f64::INFINITY);
    let z = p.add_var(0.0, f64::INFINITY);

    for i in 0..n {
        add_sinr_cone(&mut p, gains, i, &q, &point.q, (theta[i], 1.0, point.theta[i]));
        add_sinr_cone(&mut p, gains, i, &q, &point.q, (mu[i], targets[i], point.mu[i]));
        add_log_tangents(&mut p, theta[i], vartheta[i], budget * gains.own[i] / gains.noise[i], tangents);
        p.add_hyperbolic(Affine::var(kappa[i]), Affine::var(mu[i]), Affine::var(vartheta[i]));
    }
    let sum_q = q.iter().fold(Affine::constant(-budget), |a, &j| a.term(j, 1.0));
    p.add_le(sum_q);
    let sum_mu = mu.iter().fold(Affine::default(), |a, &j| a.term(j, 1.0));
    p.add_le(sum_mu.clone().plus_const(-(limit as f64)));
    p.add_hyperbolic(sum_mu, Affine::var(z), Affine::constant(1.0));

    // τΣμ + τz − ρ(κ, μ), constant included so the value is the relaxed objective
    let m0_sum: f64 = point.mu.iter().sum();
    let mut obj = Affine::var(z).scaled(tau);
    let mut constant = -surrogate::penalty_convex(&point.kappa, &point.mu, tau);
    for i in 0..n {
        let gm = 2.0 * tau * (point.mu[i] + m0_sum);
        obj = obj.term(mu[i], tau - gm).term(kappa[i], -2.0 * point.kappa[i]);
        constant += 2.0 * point.kappa[i] * point.kappa[i] + gm * point.mu[i];
    }
    p.set_objective(obj.plus_const(constant));
    Ok((p, Layout { mu, q, theta, vartheta, kappa, z }))
}

/// `τ + ς Σ(μ − μ²)` when that is positive, otherwise `τ`.
pub fn update_tau(tau: f64, step: f64, mu: &[f64]) -> f64 {
    let cand = tau + step * binary_penalty(mu);
    if cand > 0.0 {
        cand
    } else {
        tau
    }
}

fn rel_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(1e-12)
}

fn to_global(users: &[usize], local: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k];
    for (i, &u) in users.iter().enumerate() {
        out[u] = local[i];
    }
    out
}

fn weighted_rate(gains: &Gains, it: &ScaIterate) -> f64 {
    (0..gains.len()).map(|i| it.mu[i] * (1.0 + gains.sinr(i, &it.q)).log2()).sum()
}

/// MRT beamformers with an equal downlink power split scaled into every
/// per-BS budget, mapped to the uplink under `weights`, everyone scheduled.
fn mrt_start(
    cand: &[usize],
    channels: &ChannelSet,
    config: &NetworkConfig,
    weights: &BsWeights,
    gt: &[f64],
) -> Result<(Vec<CVector>, Gains, ScaIterate)> {
    let kk = channels.num_users();
    let nt = config.antennas_per_bs;
    let h = &channels.normalized;
    let mut w = vec![CVector::zeros(config.total_antennas()); kk];
    for &k in cand {
        w[k] = unit(&h[k]).ok_or(Error::Singular("zero channel among candidates"))?;
    }
    let alpha = (0..config.num_bs)
        .map(|b| config.power_budgets[b] / cand.iter().map(|&k| block_energy(&w[k], b, nt)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let p0 = to_global(cand, &vec![alpha; cand.len()], kk);
    let q0 = crate::duality::uplink_power_from_downlink(cand, &p0, &w, h, weights)?;
    let gains = Gains::new(cand, &w, h, weights);
    let mut it = ScaIterate::anchored(&gains, cand.iter().map(|&k| q0[k]).collect(), gt, &vec![1.0; cand.len()]);
    // The first subproblem restores the QoS coupling.
    it.mu = vec![1.0; cand.len()];
    it.kappa = it.vartheta.iter().map(|v| v.sqrt()).collect();
    Ok((w, gains, it))
}

/// Runs the scheduler with the default Clarabel backend.
pub fn run_algorithm1(channels: &ChannelSet, targets: &RateTargets, config: &NetworkConfig, settings: &ScaSettings) -> Result<ScheduleSolution> {
    run_algorithm1_with(channels, targets, config, settings, &ClarabelSolver::new(settings.solver))
}

/// Runs the scheduler on an explicit conic backend.
pub fn run_algorithm1_with(
    channels: &ChannelSet,
    targets: &RateTargets,
    config: &NetworkConfig,
    settings: &ScaSettings,
    solver: &dyn ConicSolver,
) -> Result<ScheduleSolution> {
    config.validate()?;
    let kk = channels.num_users();
    let (nb, nt) = (config.num_bs, config.antennas_per_bs);
    let h = &channels.normalized;
    let cand = targets.candidates();
    if cand.is_empty() {
        return Ok(ScheduleSolution::empty(kk, nb, nb * nt));
    }
    let gt: Vec<f64> = cand.iter().map(|&k| targets.sinr_target[k]).collect();
    let limit = config.total_antennas();
    let max_budget = config.power_budgets.iter().cloned().fold(0.0, f64::max);

    let mut weights = BsWeights::uniform(nb, nt);
    let (mut w, mut gains, mut it) = mrt_start(&cand, channels, config, &weights, &gt)?;

    let mut trace = Vec::new();
    let mut best: Option<ScheduleSolution> = None;
    let mut rho0 = 1.0;
    let mut lambda_moved = f64::INFINITY;
    let mut converged = false;
    for outer in 0..settings.outer_cap {
        let budget = weights.uplink_budget(&config.power_budgets);
        let mut upsilon = weighted_rate(&gains, &it);
        let mut middle_done = false;
        for middle in 0..settings.middle_cap {
            let mut tau = settings.tau0;
            let mut zeta_prev = relaxed_objective(&it.kappa, &it.mu, tau);
            for inner in 0..settings.inner_cap {
                let (prob, layout) = build_subproblem(&it, tau, &gains, &gt, budget, limit, settings.tangents)?;
                let sol = solver.solve(&prob)?;
                if !sol.is_optimal() {
                    warn!("subproblem status {:?} at ({outer},{middle},{inner}); keeping previous iterate", sol.status);
                    break;
                }
                it = layout.extract(&sol.x);
                it.repair(&gains, &gt);
                trace.push(TraceRow {
                    outer,
                    middle,
                    inner,
                    zeta: sol.objective,
                    upsilon,
                    tau,
                    penalty: binary_penalty(&it.mu),
                    lambda: weights.lambda().to_vec(),
                });
                let settled = rel_change(sol.objective, zeta_prev) <= settings.delta;
                zeta_prev = sol.objective;
                if settled {
                    break;
                }
                tau = update_tau(tau, settings.tau_step, &it.mu);
            }

            let qg = to_global(&cand, &it.q, kk);
            for (wk, &k) in mmse_beamformers(&cand, &qg, h, &weights)?.into_iter().zip(&cand) {
                w[k] = wk;
            }
            gains = Gains::new(&cand, &w, h, &weights);
            it = ScaIterate::anchored(&gains, it.q.clone(), &gt, &it.mu);
            let ups = weighted_rate(&gains, &it);
            let settled = rel_change(ups, upsilon) <= settings.delta;
            upsilon = ups;
            if settled {
                middle_done = true;
                break;
            }
        }

        match finalize(&cand, &it, &w, &weights, channels, targets, config, settings)? {
            Some(sol) if best.as_ref().is_none_or(|b| sol.sum_rate > b.sum_rate) => best = Some(sol),
            _ => {}
        }
        debug!("outer {outer}: upsilon {upsilon:.6}, lambda {:?}", weights.lambda());

        if rel_change(upsilon, rho0) <= settings.delta && lambda_moved <= settings.delta {
            converged = middle_done;
            break;
        }
        rho0 = upsilon;

        let qg = to_global(&cand, &it.q, kk);
        let p_full = match downlink_power_from_uplink(&cand, &qg, &w, h, &weights) {
            Ok(p) => p,
            Err(e) => {
                warn!("stopping multiplier updates: {e}");
                break;
            }
        };
        let g = subgradient(&p_full, &w, &config.power_budgets, nt);
        let step = diminishing_step(settings.lambda_step, outer) / max_budget;
        let next = update_lambda(weights.lambda(), &g, step);
        let scale = weights.lambda().iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        lambda_moved = next.iter().zip(weights.lambda()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        weights = BsWeights::new(next, nt)?;

        // Keep the iterate feasible under the new weights.
        let new_budget = weights.uplink_budget(&config.power_budgets);
        let total: f64 = it.q.iter().sum();
        if total > new_budget {
            let s = new_budget / total;
            it.q.iter_mut().for_each(|v| *v *= s);
        }
        let qg = to_global(&cand, &it.q, kk);
        for (wk, &k) in mmse_beamformers(&cand, &qg, h, &weights)?.into_iter().zip(&cand) {
            w[k] = wk;
        }
        gains = Gains::new(&cand, &w, h, &weights);
        it = ScaIterate::anchored(&gains, it.q.clone(), &gt, &it.mu);
    }

    let mut sol = best.unwrap_or_else(|| ScheduleSolution::empty(kk, nb, nb * nt));
    sol.converged = converged;
    sol.trace = trace;
    Ok(sol)
}

/// Rounds `μ`, rebuilds receivers on the rounded set and maps to downlink
/// powers, pulling the SINRs back towards the targets where a per-BS budget
/// would otherwise be exceeded. Users are dropped (smallest `μ` first) until
/// the targets fit.
#[allow(clippy::too_many_arguments)]
fn finalize(
    cand: &[usize],
    it: &ScaIterate,
    w: &[CVector],
    weights: &BsWeights,
    channels: &ChannelSet,
    targets: &RateTargets,
    config: &NetworkConfig,
    settings: &ScaSettings,
) -> Result<Option<ScheduleSolution>> {
    let kk = channels.num_users();
    let h = &channels.normalized;
    let mut order: Vec<usize> = (0..cand.len()).filter(|&i| it.mu[i] >= settings.round_threshold).collect();
    order.sort_by(|&a, &b| it.mu[b].total_cmp(&it.mu[a]).then(a.cmp(&b)));
    order.truncate(config.total_antennas());

    let qg = to_global(cand, &it.q, kk);
    let full_map = downlink_power_from_uplink(cand, &qg, w, h, weights);

    while !order.is_empty() {
        let mut set: Vec<usize> = order.iter().map(|&i| cand[i]).collect();
        set.sort_unstable();
        let q_set = to_global(&set, &set.iter().map(|&k| qg[k]).collect::<Vec<_>>(), kk);
        let mut w_set = vec![CVector::zeros(config.total_antennas()); kk];
        for (wk, &k) in mmse_beamformers(&set, &q_set, h, weights)?.into_iter().zip(&set) {
            w_set[k] = wk;
        }
        let ceiling = uplink_sinrs(&set, &q_set, &w_set, h, weights)?;
        if let Some(p) = fit_to_budgets(&set, &w_set, channels, config, &targets.sinr_target, &ceiling) {
            let mut scheduled = vec![false; kk];
            for &k in &set {
                scheduled[k] = true;
            }
            let mut sol = ScheduleSolution::assemble(channels, config, scheduled, p, w_set, q_set, weights.lambda().to_vec());
            sol.relaxed_mask = to_global(cand, &it.mu, kk);
            sol.unscheduled_power = match &full_map {
                Ok(pf) => (0..kk).filter(|&k| !sol.scheduled[k]).map(|k| pf[k]).sum(),
                Err(_) => f64::INFINITY,
            };
            return Ok(Some(sol));
        }
        order.pop();
    }
    let mut sol = ScheduleSolution::empty(kk, config.num_bs, config.total_antennas());
    sol.relaxed_mask = to_global(cand, &it.mu, kk);
    sol.lambda = weights.lambda().to_vec();
    sol.unscheduled_power = match &full_map {
        Ok(pf) => pf.iter().sum(),
        Err(_) => f64::INFINITY,
    };
    Ok(Some(sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{rate_targets, validate_solution, Tolerances};
    use crate::scenario::draw;
    use crate::C64;
    use approx::assert_relative_eq;

    #[test]
    fn tau_update_cases() {
        assert_eq!(update_tau(1.0, 1.0, &[0.0, 1.0, 1.0]), 1.0);
        assert_relative_eq!(update_tau(1.0, 1.0, &[0.5]), 1.25);
        // outside the box the penalty is negative and can push τ below zero
        assert_eq!(update_tau(1.0, 1.0, &[2.0]), 1.0);
    }

    #[test]
    fn tangent_grid_spans_range() {
        let g = tangent_grid(100.0, 64);
        assert_eq!(g.len(), 64);
        assert_eq!(g[0], 0.0);
        assert_relative_eq!(g[63], 100.0, max_relative = 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    fn one_user() -> (Gains, Vec<f64>) {
        let h = vec![CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.5, -0.5)])];
        let w = vec![unit(&h[0]).unwrap()];
        let weights = BsWeights::new(vec![1.0], 2).unwrap();
        (Gains::new(&[0], &w, &h, &weights), vec![0.5])
    }

    #[test]
    fn constraint_count_audit() {
        let (g, t) = one_user();
        let it = ScaIterate::anchored(&g, vec![1.0], &t, &[1.0]);
        let (p, lay) = build_subproblem(&it, 1.0, &g, &t, 4.0, 2, 64).unwrap();
        // per user: 2 difference cones + 1 hyperbolic cone; plus the (Σμ)² cone
        assert_eq!(p.socs().len(), 3 + 1);
        // 64 tangents + budget + cardinality
        assert_eq!(p.inequalities().len(), 64 + 2);
        assert_eq!(p.num_vars(), 5 + 1);
        assert_eq!(lay.z, 5);
        assert!(build_subproblem(&ScaIterate { mu: vec![2.0], ..it.clone() }, 1.0, &g, &t, 4.0, 2, 64).is_err());
    }

    #[test]
    fn single_user_subproblem_matches_grid() {
        let (g, t) = one_user();
        let budget = 4.0;
        let mut it = ScaIterate::anchored(&g, vec![1.0], &t, &[1.0]);
        let solver = ClarabelSolver::default();
        for _ in 0..20 {
            let (p, lay) = build_subproblem(&it, 1.0, &g, &t, budget, 1, 64).unwrap();
            let sol = solver.solve(&p).unwrap();
            assert!(sol.is_optimal());
            it = lay.extract(&sol.x);
            it.repair(&g, &t);
        }
        assert!(it.mu[0] > 1.0 - 1e-6);
        assert_relative_eq!(it.kappa[0].powi(2), it.vartheta[0], max_relative = 1e-5);
        // grid over (μ, q): best μ·log₂(1 + q c / n) − τ(μ − μ²) with μγ̃ ≤ SINR
        let mut best = f64::NEG_INFINITY;
        for i in 0..=200 {
            for j in 0..=200 {
                let mu = i as f64 / 200.0;
                let q = budget * j as f64 / 200.0;
                let s = q * g.own[0] / g.noise[0];
                if mu * t[0] <= s {
                    best = best.max(mu * (1.0 + s).log2() - (mu - mu * mu));
                }
            }
        }
        // tangents overshoot log₂ slightly, so allow a little slack above the grid
        assert!((it.kappa[0].powi(2) - best).abs() < 1e-3, "{} vs {}", it.kappa[0].powi(2), best);
    }

    #[test]
    fn zero_budget_schedules_nobody() {
        let (g, t) = one_user();
        let it = ScaIterate::anchored(&g, vec![0.0], &t, &[1.0]);
        assert_eq!(it.mu[0], 0.0);
        let (p, lay) = build_subproblem(&it, 1.0, &g, &t, 0.0, 1, 64).unwrap();
        let sol = ClarabelSolver::default().solve(&p).unwrap();
        assert!(sol.is_optimal());
        let x = lay.extract(&sol.x);
        assert!(x.q[0].abs() < 1e-7 && x.mu[0] < 1e-6);
    }

    #[test]
    fn anchor_value_matches_relaxed_objective() {
        let (g, t) = one_user();
        let it = ScaIterate { mu: vec![0.4], q: vec![1.0], theta: vec![0.8], vartheta: vec![0.7], kappa: vec![0.5] };
        let (p, lay) = build_subproblem(&it, 1.3, &g, &t, 4.0, 1, 64).unwrap();
        let mut x = vec![0.0; p.num_vars()];
        for (idx, v) in [(&lay.mu, &it.mu), (&lay.q, &it.q), (&lay.theta, &it.theta), (&lay.vartheta, &it.vartheta), (&lay.kappa, &it.kappa)] {
            x[idx[0]] = v[0];
        }
        x[lay.z] = 0.16;
        assert_relative_eq!(p.objective().eval(&x), relaxed_objective(&it.kappa, &it.mu, 1.3), epsilon = 1e-12);
    }

    #[test]
    fn single_user_end_to_end() {
        let cfg = NetworkConfig::new(2, 2, 1, 5.0).unwrap().with_seed(3);
        let ch = draw(&cfg).unwrap();
        let t = rate_targets(&ch, &cfg);
        let sol = run_algorithm1(&ch, &t, &cfg, &ScaSettings::default()).unwrap();
        assert!(sol.scheduled[0]);
        assert!(sol.rates[0] >= t.min_rate[0] * (1.0 - 1e-5));
        let rep = validate_solution(&sol, &ch, &t, &cfg, Tolerances::default());
        assert!(rep.is_valid(), "{:?}", rep.violations);
    }

    #[test]
    fn small_network_is_valid_and_near_binary() {
        let cfg = NetworkConfig::new(3, 2, 6, 0.0).unwrap().with_seed(8);
        let ch = draw(&cfg).unwrap();
        let t = rate_targets(&ch, &cfg);
        let sol = run_algorithm1(&ch, &t, &cfg, &ScaSettings::default()).unwrap();
        let rep = validate_solution(&sol, &ch, &t, &cfg, Tolerances::default());
        assert!(rep.is_valid(), "{:?}", rep.violations);
        assert!(sol.num_scheduled() >= 1);
        assert!(sol.unscheduled_power <= 1e-4 * cfg.total_budget(), "{}", sol.unscheduled_power);
        assert!(!sol.trace.is_empty());
    }
}
