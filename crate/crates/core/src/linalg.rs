//! Small complex-vector helpers shared by the schedulers.

use nalgebra::{DMatrix, DVector};
use std::ops::Range;

use crate::C64;

/// Complex column vector of length `B·N_t` (or `N_t` for a single block).
pub type CVector = DVector<C64>;
/// Dense complex matrix.
pub type CMatrix = DMatrix<C64>;

/// Antenna index range of BS `b` (0-based) in a cascaded vector.
#[inline]
pub fn block_range(b: usize, antennas_per_bs: usize) -> Range<usize> {
    b * antennas_per_bs..(b + 1) * antennas_per_bs
}

/// `h^H w`.
#[inline]
pub fn inner(h: &CVector, w: &CVector) -> C64 {
    h.dotc(w)
}

/// `|h^H w|²`.
#[inline]
pub fn gain(h: &CVector, w: &CVector) -> f64 {
    inner(h, w).norm_sqr()
}

/// `‖Q_b w‖²` for the 0-based block `b`.
#[inline]
pub fn block_energy(w: &CVector, b: usize, antennas_per_bs: usize) -> f64 {
    w.as_slice()[block_range(b, antennas_per_bs)]
        .iter()
        .map(|z| z.norm_sqr())
        .sum()
}

/// Returns `v / ‖v‖`, or `None` for the zero vector.
pub fn unit(v: &CVector) -> Option<CVector> {
    let n = v.norm();
    if n > 0.0 && n.is_finite() {
        Some(v.unscale(n))
    } else {
        None
    }
}

/// True when `‖w‖₂` is within `tol` of one.
pub fn is_unit_norm(w: &CVector, tol: f64) -> bool {
    (w.norm() - 1.0).abs() <= tol
}
