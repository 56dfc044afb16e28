//! Difference-of-convex pieces of the relaxed scheduling problem and their
//! first-order expansions.
//!
//! Everything here works on a local user list: index `i` refers to
//! `users[i]` of the [`Gains`] it was built from.

use nalgebra::DMatrix;

use crate::duality::BsWeights;
use crate::linalg::{gain, CVector};

/// Effective uplink gains for fixed receive beamformers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    /// `c_i = |h̄_i^H w_i|²`.
    pub own: Vec<f64>,
    /// `cross[(l, i)] = |h̄_l^H w_i|²`: leakage of user `l` into receiver `i`.
    pub cross: DMatrix<f64>,
    /// `n_i = ‖Q w_i‖²`.
    pub noise: Vec<f64>,
}

impl Gains {
    /// `users` indexes `h` and `w`.
    pub fn new(users: &[usize], w: &[CVector], h: &[CVector], weights: &BsWeights) -> Self {
        let n = users.len();
        Gains {
            own: users.iter().map(|&k| gain(&h[k], &w[k])).collect(),
            cross: DMatrix::from_fn(n, n, |l, i| if l == i { 0.0 } else { gain(&h[users[l]], &w[users[i]]) }),
            noise: users.iter().map(|&k| weights.noise(&w[k])).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.own.len()
    }

    pub fn is_empty(&self) -> bool {
        self.own.is_empty()
    }

    /// `I_i(q) = Σ_{l≠i} q_l |h̄_l^H w_i|²`.
    pub fn interference(&self, i: usize, q: &[f64]) -> f64 {
        (0..self.len()).filter(|&l| l != i).map(|l| q[l] * self.cross[(l, i)]).sum()
    }

    /// Uplink SINR of local user `i`.
    pub fn sinr(&self, i: usize, q: &[f64]) -> f64 {
        q[i] * self.own[i] / (self.interference(i, q) + self.noise[i])
    }

    /// `ψ_i(θ, q) = n_i θ − q_i c_i + ½(θ + I_i)²`.
    pub fn psi(&self, i: usize, theta: f64, q: &[f64]) -> f64 {
        let s = theta + self.interference(i, q);
        self.noise[i] * theta - q[i] * self.own[i] + 0.5 * s * s
    }

    /// `φ_i(θ, q) = ½θ² + ½I_i²`.
    pub fn phi(&self, i: usize, theta: f64, q: &[f64]) -> f64 {
        let int = self.interference(i, q);
        0.5 * theta * theta + 0.5 * int * int
    }

    /// `ψ̃_i(μ, q) = γ̃ n_i μ − q_i c_i + ½(γ̃μ + I_i)²`.
    pub fn psi_tilde(&self, i: usize, target: f64, mu: f64, q: &[f64]) -> f64 {
        let s = target * mu + self.interference(i, q);
        target * self.noise[i] * mu - q[i] * self.own[i] + 0.5 * s * s
    }

    /// `φ̃_i(μ, q) = ½γ̃²μ² + ½I_i²`.
    pub fn phi_tilde(&self, i: usize, target: f64, mu: f64, q: &[f64]) -> f64 {
        let int = self.interference(i, q);
        0.5 * (target * mu).powi(2) + 0.5 * int * int
    }

    /// Tangent of `φ_i` at `(θ₀, q₀)` evaluated at `(θ, q)`.
    ///
    /// The gradient in `q_l` is `σ_{i,l} = |h̄_l^H w_i|²·I_i(q₀)`.
    pub fn phi_lin(&self, i: usize, anchor: (f64, &[f64]), theta: f64, q: &[f64]) -> f64 {
        let (t0, q0) = anchor;
        let i0 = self.interference(i, q0);
        let dq: f64 = (0..self.len())
            .filter(|&l| l != i)
            .map(|l| self.cross[(l, i)] * i0 * (q[l] - q0[l]))
            .sum();
        self.phi(i, t0, q0) + t0 * (theta - t0) + dq
    }

    /// Tangent of `φ̃_i` at `(μ₀, q₀)` evaluated at `(μ, q)`.
    pub fn phi_tilde_lin(&self, i: usize, target: f64, anchor: (f64, &[f64]), mu: f64, q: &[f64]) -> f64 {
        let (m0, q0) = anchor;
        let i0 = self.interference(i, q0);
        let dq: f64 = (0..self.len())
            .filter(|&l| l != i)
            .map(|l| self.cross[(l, i)] * i0 * (q[l] - q0[l]))
            .sum();
        self.phi_tilde(i, target, m0, q0) + target * target * m0 * (mu - m0) + dq
    }
}

/// `ψ(κ, μ) = Σ(κ² + τμ²) + τ(Σμ)²`.
pub fn penalty_convex(kappa: &[f64], mu: &[f64], tau: f64) -> f64 {
    let sum: f64 = mu.iter().sum();
    kappa.iter().zip(mu).map(|(k, m)| k * k + tau * m * m).sum::<f64>() + tau * sum * sum
}

/// Partial derivatives of [`penalty_convex`] as `(∂/∂κ, ∂/∂μ)`.
pub fn penalty_convex_grad(kappa: &[f64], mu: &[f64], tau: f64) -> (Vec<f64>, Vec<f64>) {
    let sum: f64 = mu.iter().sum();
    (
        kappa.iter().map(|k| 2.0 * k).collect(),
        mu.iter().map(|m| 2.0 * tau * (m + sum)).collect(),
    )
}

/// Tangent `ρ` of [`penalty_convex`] at `(κ₀, μ₀)` evaluated at `(κ, μ)`.
pub fn penalty_lin(anchor: (&[f64], &[f64]), tau: f64, kappa: &[f64], mu: &[f64]) -> f64 {
    let (k0, m0) = anchor;
    let (gk, gm) = penalty_convex_grad(k0, m0, tau);
    let lin: f64 = (0..k0.len()).map(|i| gk[i] * (kappa[i] - k0[i]) + gm[i] * (mu[i] - m0[i])).sum();
    penalty_convex(k0, m0, tau) + lin
}

/// Relaxed objective `τΣμ + τ(Σμ)² − ψ(κ, μ) = τΣ(μ − μ²) − Σκ²`.
pub fn relaxed_objective(kappa: &[f64], mu: &[f64], tau: f64) -> f64 {
    let sum: f64 = mu.iter().sum();
    tau * sum + tau * sum * sum - penalty_convex(kappa, mu, tau)
}

/// `Σ(μ − μ²)`.
pub fn binary_penalty(mu: &[f64]) -> f64 {
    mu.iter().map(|m| m - m * m).sum()
}
