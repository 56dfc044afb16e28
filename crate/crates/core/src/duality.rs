//! Virtual-uplink machinery: BS weights, MMSE receivers, the two power
//! mappings between downlink and uplink, and the sub-gradient step on the
//! BS weights.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{block_energy, gain, unit, CMatrix, CVector};
use crate::phy::{downlink_sinr, uplink_sinr, weighted_noise};
use crate::{Error, Result, C64};

const SPECTRAL_TOL: f64 = 1e-10;
const SPECTRAL_MAX_ITER: usize = 500;

/// Per-BS dual weights `λ_b`, which define `Q = Σ_b √λ_b Q_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BsWeights {
    lambda: Vec<f64>,
    antennas_per_bs: usize,
}

impl BsWeights {
    pub fn new(lambda: Vec<f64>, antennas_per_bs: usize) -> Result<Self> {
        if lambda.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::Domain(format!("BS weights must be nonnegative, got {lambda:?}")));
        }
        if !(lambda.iter().sum::<f64>() > 0.0) {
            return Err(Error::Domain("BS weights must not all be zero".into()));
        }
        Ok(BsWeights { lambda, antennas_per_bs })
    }

    /// `λ_b = 1/B` for every BS.
    pub fn uniform(num_bs: usize, antennas_per_bs: usize) -> Self {
        BsWeights { lambda: vec![1.0 / num_bs as f64; num_bs], antennas_per_bs }
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn antennas_per_bs(&self) -> usize {
        self.antennas_per_bs
    }

    /// `‖Q w‖²`.
    pub fn noise(&self, w: &CVector) -> f64 {
        weighted_noise(w, &self.lambda, self.antennas_per_bs)
    }

    /// Diagonal of `Q²`, one entry per antenna.
    pub fn antenna_weights(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .flat_map(|&l| std::iter::repeat_n(l, self.antennas_per_bs))
            .collect()
    }

    /// Uplink power budget `Σ_b λ_b P_b`.
    pub fn uplink_budget(&self, budgets: &[f64]) -> f64 {
        self.lambda.iter().zip(budgets).map(|(l, p)| l * p).sum()
    }
}

/// Dense `Q = Σ_b √λ_b Q_b`.
pub fn aggregate_q(lambda: &[f64], antennas_per_bs: usize) -> Result<DMatrix<f64>> {
    let w = BsWeights::new(lambda.to_vec(), antennas_per_bs)?;
    let d: Vec<f64> = w.antenna_weights().into_iter().map(f64::sqrt).collect();
    Ok(DMatrix::from_diagonal(&DVector::from_vec(d)))
}

/// MMSE receivers `w_k ∝ (Q² + Σ_l q_l h̄_l h̄_l^H)^{-1} h̄_k` for each user
/// in `users`, normalized. `q` is indexed like `h`.
pub fn mmse_beamformers(users: &[usize], q: &[f64], h: &[CVector], weights: &BsWeights) -> Result<Vec<CVector>> {
    let m = weights.antenna_weights();
    let mut a = CMatrix::from_diagonal(&CVector::from_iterator(m.len(), m.iter().map(|&x| C64::new(x, 0.0))));
    for (l, hl) in h.iter().enumerate() {
        if q[l] > 0.0 {
            a.ger(C64::new(q[l], 0.0), hl, &hl.conjugate(), C64::new(1.0, 0.0));
        }
    }
    // enforce exact Hermitian symmetry before factoring
    let a = (&a + a.adjoint()).scale(0.5);
    let chol = a.cholesky().ok_or(Error::Singular("MMSE covariance"))?;
    users
        .iter()
        .map(|&k| unit(&chol.solve(&h[k])).ok_or(Error::Singular("MMSE receiver is zero")))
        .collect()
}

/// Single-user form of [`mmse_beamformers`].
pub fn mmse_beamformer(k: usize, q: &[f64], h: &[CVector], weights: &BsWeights) -> Result<CVector> {
    Ok(mmse_beamformers(&[k], q, h, weights)?.pop().expect("one user"))
}

/// Spectral radius of an entrywise-nonnegative square matrix.
///
/// Power iteration on `M + I` (primitive whenever `M` is nonnegative) with
/// Collatz–Wielandt bounds as the stopping test.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let shifted = m + DMatrix::identity(n, n);
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..SPECTRAL_MAX_ITER {
        let y = &shifted * &x;
        let ratios = y.iter().zip(x.iter()).map(|(a, b)| a / b);
        let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
        est = 0.5 * (lo + hi);
        let norm = y.norm();
        if !(norm > 0.0) {
            return 0.0;
        }
        x = y / norm;
        if hi - lo <= SPECTRAL_TOL * hi.max(1.0) {
            break;
        }
    }
    (est - 1.0).max(0.0)
}

/// Solves `(I − diag(d)·A) x = diag(d)·v` after confirming the spectral
/// radius of `diag(d)·A` is below one.
fn fixed_point(d: &[f64], a: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let n = d.len();
    let da = DMatrix::from_fn(n, n, |i, j| d[i] * a[(i, j)]);
    let rho = spectral_radius(&da);
    if rho >= 1.0 {
        return Err(Error::MappingInfeasible(rho));
    }
    let lhs = DMatrix::identity(n, n) - da;
    let rhs = DVector::from_fn(n, |i, _| d[i] * v[i]);
    let x = lhs.lu().solve(&rhs).ok_or(Error::Singular("power mapping system"))?;
    if x.iter().any(|&v| !(v >= -1e-12 * x.amax()) || !v.is_finite()) {
        return Err(Error::MappingInfeasible(rho));
    }
    Ok(x.map(|v| v.max(0.0)))
}

fn own_gains(set: &[usize], w: &[CVector], h: &[CVector]) -> Result<Vec<f64>> {
    set.iter()
        .map(|&k| {
            let c = gain(&h[k], &w[k]);
            if c > 0.0 {
                Ok(c)
            } else {
                Err(Error::Domain(format!("user {k} has zero effective gain")))
            }
        })
        .collect()
}

/// Downlink powers that give each user in `set` the SINR `targets[k]` with
/// beamformers `w`. Powers outside `set` are zero; `targets` and the
/// returned vector are indexed like `h`.
pub fn downlink_power_for_targets(set: &[usize], w: &[CVector], h: &[CVector], targets: &[f64]) -> Result<Vec<f64>> {
    let c = own_gains(set, w, h)?;
    let d: Vec<f64> = set.iter().zip(&c).map(|(&k, &ck)| targets[k] / ck).collect();
    let n = set.len();
    let psi = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { gain(&h[set[i]], &w[set[j]]) });
    let p = fixed_point(&d, &psi, &DVector::from_element(n, 1.0))?;
    let mut out = vec![0.0; h.len()];
    for (i, &k) in set.iter().enumerate() {
        out[k] = p[i];
    }
    Ok(out)
}

/// Uplink SINRs of the users in `set`, indexed like `h` (zero elsewhere).
pub fn uplink_sinrs(set: &[usize], q: &[f64], w: &[CVector], h: &[CVector], weights: &BsWeights) -> Result<Vec<f64>> {
    let mut out = vec![0.0; h.len()];
    for &k in set {
        out[k] = uplink_sinr(k, q, w, h, weights.lambda(), weights.antennas_per_bs())?;
    }
    Ok(out)
}

/// Downlink SINRs of the users in `set` with only `set` active.
pub fn downlink_sinrs(set: &[usize], p: &[f64], w: &[CVector], h: &[CVector]) -> Vec<f64> {
    let mut active = vec![false; h.len()];
    for &k in set {
        active[k] = true;
    }
    let mut out = vec![0.0; h.len()];
    for &k in set {
        out[k] = downlink_sinr(k, p, w, h, &active);
    }
    out
}

/// Downlink powers reproducing the uplink SINRs of `(q, w)` on `set`.
/// Only users in `set` transmit in the uplink; `q` elsewhere is ignored.
pub fn downlink_power_from_uplink(set: &[usize], q: &[f64], w: &[CVector], h: &[CVector], weights: &BsWeights) -> Result<Vec<f64>> {
    let q = restrict(set, q);
    let targets = uplink_sinrs(set, &q, w, h, weights)?;
    downlink_power_for_targets(set, w, h, &targets)
}

/// Same mapping as [`downlink_power_from_uplink`], computed as the
/// eigenvector of the extended matrix for eigenvalue one, scaled so its
/// last entry is one.
pub fn downlink_power_from_uplink_eigen(set: &[usize], q: &[f64], w: &[CVector], h: &[CVector], weights: &BsWeights) -> Result<Vec<f64>> {
    let q = restrict(set, q);
    let sinr = uplink_sinrs(set, &q, w, h, weights)?;
    let c = own_gains(set, w, h)?;
    let n = set.len();
    let d: Vec<f64> = set.iter().zip(&c).map(|(&k, &ck)| sinr[k] / ck).collect();
    let dpsi = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { d[i] * gain(&h[set[i]], &w[set[j]]) });
    let nu: Vec<f64> = set.iter().map(|&k| weights.noise(&w[k])).collect();
    let qsum: f64 = set.iter().map(|&k| q[k]).sum();
    let mut ext = DMatrix::zeros(n + 1, n + 1);
    for j in 0..n {
        for i in 0..n {
            ext[(i, j)] = dpsi[(i, j)];
        }
        ext[(n, j)] = (0..n).map(|i| nu[i] * dpsi[(i, j)]).sum::<f64>() / qsum;
    }
    for i in 0..n {
        ext[(i, n)] = d[i];
    }
    ext[(n, n)] = (0..n).map(|i| nu[i] * d[i]).sum::<f64>() / qsum;

    let shifted = ext - DMatrix::identity(n + 1, n + 1);
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::Singular("extended power matrix"))?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &s)| if s < bv { (i, s) } else { (bi, bv) });
    let v = v_t.row(imin).transpose();
    if v[n].abs() < f64::EPSILON {
        return Err(Error::MappingInfeasible(f64::INFINITY));
    }
    let mut out = vec![0.0; h.len()];
    for (i, &k) in set.iter().enumerate() {
        out[k] = v[i] / v[n];
    }
    Ok(out)
}

/// Uplink powers reproducing the downlink SINRs of `(p, w)` on `set`.
pub fn uplink_power_from_downlink(set: &[usize], p: &[f64], w: &[CVector], h: &[CVector], weights: &BsWeights) -> Result<Vec<f64>> {
    let p = restrict(set, p);
    let sinr = downlink_sinrs(set, &p, w, h);
    let c = own_gains(set, w, h)?;
    let n = set.len();
    let o: Vec<f64> = set.iter().zip(&c).map(|(&k, &ck)| sinr[k] / ck).collect();
    let phi = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { gain(&h[set[j]], &w[set[i]]) });
    let noise = DVector::from_iterator(n, set.iter().map(|&k| weights.noise(&w[k])));
    let q = fixed_point(&o, &phi, &noise)?;
    let mut out = vec![0.0; h.len()];
    for (i, &k) in set.iter().enumerate() {
        out[k] = q[i];
    }
    Ok(out)
}

fn restrict(set: &[usize], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for &k in set {
        out[k] = v[k];
    }
    out
}

/// `g_b = P_b − Σ_k p_k ‖Q_b w_k‖²`.
pub fn subgradient(p: &[f64], w: &[CVector], budgets: &[f64], antennas_per_bs: usize) -> Vec<f64> {
    budgets
        .iter()
        .enumerate()
        .map(|(b, &pb)| {
            pb - p
                .iter()
                .zip(w)
                .filter(|(&pk, _)| pk != 0.0)
                .map(|(&pk, wk)| pk * block_energy(wk, b, antennas_per_bs))
                .sum::<f64>()
        })
        .collect()
}

/// Projected step `λ_b − ς g_b`; a coordinate that would turn negative keeps
/// its old value.
pub fn update_lambda(lambda: &[f64], g: &[f64], step: f64) -> Vec<f64> {
    lambda
        .iter()
        .zip(g)
        .map(|(&l, &gb)| {
            let cand = l - step * gb;
            if cand >= 0.0 {
                cand
            } else {
                l
            }
        })
        .collect()
}

/// Diminishing step `base / (1 + i)`.
pub fn diminishing_step(base: f64, iteration: usize) -> f64 {
    base / (1 + iteration) as f64
}

/// Bookkeeping for the outer loop on `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub weights: BsWeights,
    pub subgradient: Vec<f64>,
    /// Dual objective at the current weights (sum rate of the inner problem).
    pub value: f64,
}
