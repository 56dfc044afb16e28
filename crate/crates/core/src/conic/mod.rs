//! Linear objective over linear and second-order-cone constraints.
//!
//! Problems are built incrementally from [`Affine`] expressions and handed
//! to a [`ConicSolver`]. Complex-valued models are embedded into real
//! variables with the helpers at the bottom of this module.

mod clarabel;

pub use self::clarabel::ClarabelSolver;

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::linalg::{CMatrix, CVector};
use crate::{Error, Result, C64};

/// `Σ coef·x_i + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn var(i: usize) -> Self {
        Affine { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Affine { terms: Vec::new(), constant: c }
    }

    pub fn term(mut self, i: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((i, coef));
        }
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn plus(mut self, other: &Affine) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    /// `Σ|coef·x_i| + |constant|`, the scale used for residual checks.
    fn magnitude(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| (c * x[i]).abs()).sum::<f64>() + self.constant.abs()
    }
}

/// `‖tail‖₂ ≤ head`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocBlock {
    pub head: Affine,
    pub tail: Vec<Affine>,
}

/// Minimize `objective` subject to `eq = 0`, `le ≤ 0`, cone blocks and
/// variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Affine,
    equalities: Vec<Affine>,
    inequalities: Vec<Affine>,
    socs: Vec<SocBlock>,
}

impl Default for ConicProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl ConicProblem {
    pub fn new() -> Self {
        ConicProblem {
            lower: Vec::new(),
            upper: Vec::new(),
            objective: Affine::default(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            socs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    /// Adds a variable with bounds `lower ≤ x ≤ upper` (either may be infinite).
    pub fn add_var(&mut self, lower: f64, upper: f64) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.lower.len() - 1
    }

    pub fn add_free_var(&mut self) -> usize {
        self.add_var(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_vars(&mut self, n: usize, lower: f64, upper: f64) -> Vec<usize> {
        (0..n).map(|_| self.add_var(lower, upper)).collect()
    }

    pub fn set_objective(&mut self, objective: Affine) {
        self.objective = objective;
    }

    pub fn objective(&self) -> &Affine {
        &self.objective
    }

    /// `expr = 0`.
    pub fn add_eq(&mut self, expr: Affine) {
        self.equalities.push(expr);
    }

    /// `expr ≤ 0`.
    pub fn add_le(&mut self, expr: Affine) {
        self.inequalities.push(expr);
    }

    /// `‖tail‖₂ ≤ head`.
    pub fn add_soc(&mut self, head: Affine, tail: Vec<Affine>) {
        self.socs.push(SocBlock { head, tail });
    }

    /// `½ s² ≤ l` as the cone `‖(s, l − ½)‖ ≤ l + ½`.
    pub fn add_half_square_le(&mut self, s: Affine, l: Affine) {
        let head = l.clone().plus_const(0.5);
        self.add_soc(head, vec![s, l.plus_const(-0.5)]);
    }

    /// `κ² ≤ μ·ϑ` with `μ, ϑ ≥ 0`, as `‖(κ, (μ − ϑ)/2)‖ ≤ (μ + ϑ)/2`.
    pub fn add_hyperbolic(&mut self, kappa: Affine, mu: Affine, theta: Affine) {
        let head = mu.clone().plus(&theta).scaled(0.5);
        let diff = mu.plus(&theta.scaled(-1.0)).scaled(0.5);
        self.add_soc(head, vec![kappa, diff]);
    }

    pub fn equalities(&self) -> &[Affine] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[Affine] {
        &self.inequalities
    }

    pub fn socs(&self) -> &[SocBlock] {
        &self.socs
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    /// Checks index ranges and bound consistency.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let check = |a: &Affine| -> Result<()> {
            if let Some(&(i, _)) = a.terms.iter().find(|t| t.0 >= n) {
                return Err(Error::OutOfRange { index: i, limit: n });
            }
            if a.terms.iter().any(|t| !t.1.is_finite()) || !a.constant.is_finite() {
                return Err(Error::Malformed("non-finite coefficient".into()));
            }
            Ok(())
        };
        check(&self.objective)?;
        for a in self.equalities.iter().chain(&self.inequalities) {
            check(a)?;
        }
        for s in &self.socs {
            check(&s.head)?;
            for t in &s.tail {
                check(t)?;
            }
        }
        for (i, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::Malformed(format!("bad bounds on variable {i}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Largest scaled constraint violation at `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let rel = |v: f64, scale: f64| v.max(0.0) / (1.0 + scale);
        let mut worst = 0.0f64;
        for a in &self.equalities {
            worst = worst.max(rel(a.eval(x).abs(), a.magnitude(x)));
        }
        for a in &self.inequalities {
            worst = worst.max(rel(a.eval(x), a.magnitude(x)));
        }
        for (i, &xi) in x.iter().enumerate() {
            worst = worst.max(rel(self.lower[i] - xi, xi.abs())).max(rel(xi - self.upper[i], xi.abs()));
        }
        for s in &self.socs {
            let norm = s.tail.iter().map(|t| t.eval(x).powi(2)).sum::<f64>().sqrt();
            let scale = s.head.magnitude(x) + s.tail.iter().map(|t| t.magnitude(x)).sum::<f64>();
            worst = worst.max(rel(norm - s.head.eval(x), scale));
        }
        worst
    }

    /// Sparse text dump; see the crate README for the format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let aff = |out: &mut String, a: &Affine| {
            let _ = write!(out, "{}", a.constant);
            for &(i, c) in &a.terms {
                let _ = write!(out, " {i}:{c}");
            }
            out.push('\n');
        };
        out.push_str("# conic problem v1\n");
        let _ = writeln!(out, "vars {}", self.num_vars());
        for (i, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo != f64::NEG_INFINITY || hi != f64::INFINITY {
                let _ = writeln!(out, "bound {i} {lo} {hi}");
            }
        }
        out.push_str("objective ");
        aff(&mut out, &self.objective);
        for a in &self.equalities {
            out.push_str("eq ");
            aff(&mut out, a);
        }
        for a in &self.inequalities {
            out.push_str("le ");
            aff(&mut out, a);
        }
        for s in &self.socs {
            let _ = writeln!(out, "soc {}", s.tail.len() + 1);
            for a in std::iter::once(&s.head).chain(&s.tail) {
                out.push_str("  ");
                aff(&mut out, a);
            }
        }
        out
    }

    /// Parses the output of [`ConicProblem::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Malformed(m);
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        let parse_aff = |toks: &[&str]| -> Result<Affine> {
            let (first, rest) = toks.split_first().ok_or_else(|| bad("empty affine expression".into()))?;
            let mut a = Affine::constant(parse_f(first)?);
            for t in rest {
                let (i, c) = t.split_once(':').ok_or_else(|| bad(format!("bad term {t:?}")))?;
                let i = i.parse::<usize>().map_err(|_| bad(format!("bad index {i:?}")))?;
                a.terms.push((i, parse_f(c)?));
            }
            Ok(a)
        };
        let mut p = ConicProblem::new();
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        while let Some(line) = lines.next() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks[0] {
                "vars" => {
                    let n = toks.get(1).and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| bad(line.into()))?;
                    p.add_vars(n, f64::NEG_INFINITY, f64::INFINITY);
                }
                "bound" => {
                    if toks.len() != 4 {
                        return Err(bad(line.into()));
                    }
                    let i = toks[1].parse::<usize>().map_err(|_| bad(line.into()))?;
                    if i >= p.num_vars() {
                        return Err(Error::OutOfRange { index: i, limit: p.num_vars() });
                    }
                    p.lower[i] = parse_f(toks[2])?;
                    p.upper[i] = parse_f(toks[3])?;
                }
                "objective" => p.objective = parse_aff(&toks[1..])?,
                "eq" => p.equalities.push(parse_aff(&toks[1..])?),
                "le" => p.inequalities.push(parse_aff(&toks[1..])?),
                "soc" => {
                    let d = toks.get(1).and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| bad(line.into()))?;
                    let mut rows = Vec::with_capacity(d);
                    for _ in 0..d {
                        let l = lines.next().ok_or_else(|| bad("truncated cone block".into()))?;
                        rows.push(parse_aff(&l.split_whitespace().collect::<Vec<_>>())?);
                    }
                    let mut rows = rows.into_iter();
                    let head = rows.next().ok_or_else(|| bad("cone of dimension 0".into()))?;
                    p.socs.push(SocBlock { head, tail: rows.collect() });
                }
                other => return Err(bad(format!("unknown record {other:?}"))),
            }
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: ConicStatus,
    pub x: Vec<f64>,
    /// Objective including its constant term.
    pub objective: f64,
    pub iterations: u32,
    /// Largest scaled constraint violation of `x`.
    pub max_residual: f64,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == ConicStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    pub feasibility: f64,
    pub gap: f64,
    pub max_iter: u32,
    /// Residual above which an "optimal" answer is downgraded to a
    /// numerical failure.
    pub acceptance: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        SolverTolerances { feasibility: 1e-8, gap: 1e-8, max_iter: 200, acceptance: 1e-6 }
    }
}

/// Anything that can solve a [`ConicProblem`].
pub trait ConicSolver: Sync {
    fn solve(&self, problem: &ConicProblem) -> Result<ConicSolution>;
}

/// Real and imaginary variable indices of a complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVars {
    pub re: Vec<usize>,
    pub im: Vec<usize>,
}

impl ComplexVars {
    pub fn new(problem: &mut ConicProblem, n: usize) -> Self {
        let re = (0..n).map(|_| problem.add_free_var()).collect();
        let im = (0..n).map(|_| problem.add_free_var()).collect();
        ComplexVars { re, im }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    /// Every real coordinate, as plain affine expressions.
    pub fn coordinates(&self) -> Vec<Affine> {
        self.re.iter().chain(&self.im).map(|&i| Affine::var(i)).collect()
    }

    pub fn value(&self, x: &[f64]) -> CVector {
        CVector::from_fn(self.len(), |i, _| C64::new(x[self.re[i]], x[self.im[i]]))
    }

    /// Real and imaginary parts of `c^H x`.
    pub fn inner(&self, c: &CVector) -> (Affine, Affine) {
        let mut re = Affine::default();
        let mut im = Affine::default();
        for (j, cj) in c.iter().enumerate() {
            re = re.term(self.re[j], cj.re).term(self.im[j], cj.im);
            im = im.term(self.im[j], cj.re).term(self.re[j], -cj.im);
        }
        (re, im)
    }
}

/// `|c^H x| ≤ t` as a three-term cone.
pub fn add_complex_abs_le(problem: &mut ConicProblem, c: &CVector, x: &ComplexVars, t: Affine) {
    let (re, im) = x.inner(c);
    problem.add_soc(t, vec![re, im]);
}

/// Embeds `f(x) = Σ a_j x_j` over interleaved real coordinates
/// `[re x_0, im x_0, re x_1, …]`; returns the rows for `Re f` and `Im f`.
pub fn realify_linear(a: &[C64]) -> (Vec<f64>, Vec<f64>) {
    let mut re = Vec::with_capacity(2 * a.len());
    let mut im = Vec::with_capacity(2 * a.len());
    for z in a {
        re.extend([z.re, -z.im]);
        im.extend([z.im, z.re]);
    }
    (re, im)
}

/// Real symmetric matrix `M` with `x^H A x = zᵀ M z` for `z = [Re x; Im x]`.
pub fn realify_hermitian(a: &CMatrix) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = a[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}
