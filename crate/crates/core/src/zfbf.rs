//! Semiorthogonal user selection with zero-forcing beamforming.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::duality::BsWeights;
use crate::linalg::{block_energy, CMatrix, CVector};
use crate::phy::RateTargets;
use crate::scenario::{ChannelSet, NetworkConfig};
use crate::schedule::ScheduleSolution;
use crate::{Error, Result};

/// Default semiorthogonality threshold.
pub const DEFAULT_SUS_THRESHOLD: f64 = 0.4;

/// Component of `h` orthogonal to every vector in `basis` (Gram–Schmidt,
/// two passes).
pub fn sus_orthogonalize(h: &CVector, basis: &[CVector]) -> CVector {
    let mut g = h.clone();
    for _ in 0..2 {
        for b in basis {
            let nb = b.norm_squared();
            if nb > 0.0 {
                let c = b.dotc(&g) / nb;
                g -= b * c;
            }
        }
    }
    g
}

/// Unit-norm zero-forcing beamformers for a user set.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfBeamformers {
    pub users: Vec<usize>,
    pub w: Vec<CVector>,
    /// `‖W[:,k]‖²` of the unnormalized pseudo-inverse column; the SINR of
    /// user `k` at power `p` is `p / col_norm_sq[k]`.
    pub col_norm_sq: Vec<f64>,
}

/// Columns of `H (HᴴH)⁻¹`, normalized.
pub fn zf_beamformers(set: &[usize], h: &[CVector]) -> Result<ZfBeamformers> {
    if set.is_empty() {
        return Ok(ZfBeamformers { users: vec![], w: vec![], col_norm_sq: vec![] });
    }
    let m = h[0].len();
    let hs = CMatrix::from_fn(m, set.len(), |r, c| h[set[c]][r]);
    let gram = hs.adjoint() * &hs;
    let scale = (0..set.len()).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    let chol = Cholesky::new(gram).ok_or(Error::RankDeficient)?;
    if (0..set.len()).any(|i| chol.l_dirty()[(i, i)].re.powi(2) <= 1e-12 * scale) {
        return Err(Error::RankDeficient);
    }
    let w = hs * chol.inverse();
    let mut out = ZfBeamformers { users: set.to_vec(), w: Vec::with_capacity(set.len()), col_norm_sq: Vec::with_capacity(set.len()) };
    for c in 0..set.len() {
        let col: CVector = w.column(c).into_owned();
        let n2 = col.norm_squared();
        out.w.push(col.unscale(n2.sqrt()));
        out.col_norm_sq.push(n2);
    }
    Ok(out)
}

/// Smallest powers meeting the SINR targets under zero-forcing.
pub fn min_qos_power(zf: &ZfBeamformers, targets: &RateTargets) -> Vec<f64> {
    zf.users.iter().zip(&zf.col_norm_sq).map(|(&k, n2)| targets.sinr_target[k] * n2).collect()
}

/// Per-BS power loading `a[b][i] = ‖Q_b w_i‖²`.
fn loading(zf: &ZfBeamformers, nb: usize, nt: usize) -> Vec<Vec<f64>> {
    (0..nb).map(|b| zf.w.iter().map(|w| block_energy(w, b, nt)).collect()).collect()
}

/// Whether powers `p` (set order) fit every per-BS budget.
pub fn fits_budgets(zf: &ZfBeamformers, p: &[f64], config: &NetworkConfig) -> bool {
    let a = loading(zf, config.num_bs, config.antennas_per_bs);
    a.iter().zip(&config.power_budgets).all(|(row, &budget)| {
        let used: f64 = row.iter().zip(p).map(|(x, y)| x * y).sum();
        used <= budget * (1.0 + 1e-12)
    })
}

/// Greedy semiorthogonal selection among the users with feasible targets.
pub fn sus_select(channels: &ChannelSet, targets: &RateTargets, config: &NetworkConfig, zeta: f64) -> Result<Vec<usize>> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::Domain(format!("semiorthogonality threshold {zeta} outside (0, 1)")));
    }
    let h = &channels.normalized;
    let limit = config.total_antennas();
    let mut pool = targets.candidates();
    let mut selected = Vec::new();
    let mut basis: Vec<CVector> = Vec::new();
    while !pool.is_empty() && selected.len() < limit {
        let mut best: Option<(usize, CVector, f64)> = None;
        for &k in &pool {
            let g = sus_orthogonalize(&h[k], &basis);
            let n = g.norm();
            if best.as_ref().is_none_or(|b| n > b.2) {
                best = Some((k, g, n));
            }
        }
        let (pick, g, gn) = best.expect("pool is nonempty");
        if gn <= 1e-9 * h[pick].norm() {
            break;
        }
        let mut trial = selected.clone();
        trial.push(pick);
        let accepted = match zf_beamformers(&trial, h) {
            Ok(zf) => fits_budgets(&zf, &min_qos_power(&zf, targets), config),
            Err(Error::RankDeficient) => false,
            Err(e) => return Err(e),
        };
        if !accepted {
            break;
        }
        selected = trial;
        pool.retain(|&k| k != pick && h[k].dotc(&g).norm() / (h[k].norm() * gn) < zeta);
        basis.push(g);
    }
    Ok(selected)
}

/// Rate-maximizing powers for fixed ZF beamformers: maximize
/// `Σ log(1 + p_i/ω_i)` subject to `p ≥ p♭` and the per-BS budgets, by a
/// log-barrier Newton method.
pub fn zf_power_allocation(zf: &ZfBeamformers, floor: &[f64], config: &NetworkConfig) -> Result<Vec<f64>> {
    let n = zf.users.len();
    if n == 0 {
        return Ok(vec![]);
    }
    if !fits_budgets(zf, floor, config) {
        return Err(Error::Domain("QoS powers exceed a budget".into()));
    }
    let omega = &zf.col_norm_sq;
    let rows: Vec<(Vec<f64>, f64)> = loading(zf, config.num_bs, config.antennas_per_bs)
        .into_iter()
        .zip(&config.power_budgets)
        .filter(|(a, _)| a.iter().any(|&x| x > 1e-14))
        .map(|(a, &budget)| (a, budget))
        .collect();
    let slack = |p: &[f64]| -> Vec<f64> { rows.iter().map(|(a, b)| b - a.iter().zip(p).map(|(x, y)| x * y).sum::<f64>()).collect() };

    // Uniform step into the interior: p♭ + s/2 with s the largest feasible shift.
    let shift = rows
        .iter()
        .zip(slack(floor))
        .map(|((a, _), s)| s / a.iter().sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    if !(shift > 0.0) {
        return Ok(floor.to_vec());
    }
    let mut p: Vec<f64> = floor.iter().map(|f| f + 0.5 * shift).collect();
    let barrier = |p: &[f64], t: f64| -> f64 {
        let s = slack(p);
        if p.iter().zip(floor).any(|(x, f)| x <= f) || s.iter().any(|&v| v <= 0.0) {
            return f64::INFINITY;
        }
        let obj: f64 = p.iter().zip(omega).map(|(x, w)| (1.0 + x / w).ln()).sum();
        let bar: f64 = p.iter().zip(floor).map(|(x, f)| (x - f).ln()).sum::<f64>() + s.iter().map(|v| v.ln()).sum::<f64>();
        -t * obj - bar
    };
    let m = (n + rows.len()) as f64;
    let mut t = 1.0;
    while m / t > 1e-11 {
        for _ in 0..100 {
            let s = slack(&p);
            let mut grad = DVector::zeros(n);
            let mut hess = DMatrix::zeros(n, n);
            for i in 0..n {
                let d = omega[i] + p[i];
                let e = p[i] - floor[i];
                grad[i] = -t / d - 1.0 / e;
                hess[(i, i)] = t / (d * d) + 1.0 / (e * e);
            }
            for ((a, _), sv) in rows.iter().zip(&s) {
                for i in 0..n {
                    grad[i] += a[i] / sv;
                    for j in 0..n {
                        hess[(i, j)] += a[i] * a[j] / (sv * sv);
                    }
                }
            }
            let step = match Cholesky::new(hess) {
                Some(c) => -c.solve(&grad),
                None => return Err(Error::Singular("barrier Hessian")),
            };
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= 1e-12 {
                break;
            }
            let f0 = barrier(&p, t);
            let mut alpha = 1.0;
            loop {
                let cand: Vec<f64> = (0..n).map(|i| p[i] + alpha * step[i]).collect();
                if barrier(&cand, t) <= f0 - 0.25 * alpha * decrement {
                    p = cand;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-16 {
                    break;
                }
            }
            if alpha < 1e-16 {
                break;
            }
        }
        t *= 10.0;
    }
    Ok(p)
}

/// Objective of the ZF power allocation in bits.
pub fn zf_sum_rate(zf: &ZfBeamformers, p: &[f64]) -> f64 {
    p.iter().zip(&zf.col_norm_sq).map(|(x, w)| (1.0 + x / w).log2()).sum()
}

/// Full pipeline: selection, ZF beamformers, power allocation.
pub fn run_algorithm3(channels: &ChannelSet, targets: &RateTargets, config: &NetworkConfig, zeta: f64) -> Result<ScheduleSolution> {
    config.validate()?;
    let kk = channels.num_users();
    let (nb, nt) = (config.num_bs, config.antennas_per_bs);
    let set = sus_select(channels, targets, config, zeta)?;
    if set.is_empty() {
        return Ok(ScheduleSolution::empty(kk, nb, nb * nt));
    }
    let zf = zf_beamformers(&set, &channels.normalized)?;
    let floor = min_qos_power(&zf, targets);
    let p_set = zf_power_allocation(&zf, &floor, config)?;
    Ok(assemble_zf(channels, config, &zf, &p_set))
}

/// Packs set-ordered ZF powers and beamformers into a full-length solution.
pub fn assemble_zf(channels: &ChannelSet, config: &NetworkConfig, zf: &ZfBeamformers, p_set: &[f64]) -> ScheduleSolution {
    let kk = channels.num_users();
    let m = config.total_antennas();
    let mut scheduled = vec![false; kk];
    let mut p = vec![0.0; kk];
    let mut w = vec![CVector::zeros(m); kk];
    for (i, &k) in zf.users.iter().enumerate() {
        scheduled[k] = true;
        p[k] = p_set[i];
        w[k] = zf.w[i].clone();
    }
    let weights = BsWeights::uniform(config.num_bs, config.antennas_per_bs);
    let lambda = weights.lambda().to_vec();
    ScheduleSolution::assemble(channels, config, scheduled, p, w, vec![0.0; kk], lambda)
}
