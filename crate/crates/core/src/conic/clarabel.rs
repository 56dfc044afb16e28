use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus, SupportedConeT, ZeroConeT,
};

use super::{Affine, ConicProblem, ConicSolution, ConicSolver, ConicStatus, SolverTolerances};
use crate::{Error, Result};

/// Interior-point backend built on the `clarabel` crate.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelSolver {
    pub tolerances: SolverTolerances,
}

impl ClarabelSolver {
    pub fn new(tolerances: SolverTolerances) -> Self {
        ClarabelSolver { tolerances }
    }
}

/// Rows of `A x + s = b` in Clarabel's convention.
#[derive(Default)]
struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    /// Adds a row whose slack equals `expr` (so `s = expr`, i.e. `−a·x + s = c`).
    fn slack_is(&mut self, expr: &Affine) {
        let r = self.b.len();
        for &(j, c) in &expr.terms {
            self.i.push(r);
            self.j.push(j);
            self.v.push(-c);
        }
        self.b.push(expr.constant);
    }
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, problem: &ConicProblem) -> Result<ConicSolution> {
        problem.validate()?;
        let n = problem.num_vars();
        let mut rows = Rows::default();
        let mut cones = Vec::new();

        // equality: slack = −expr must be zero
        for a in problem.equalities() {
            rows.slack_is(&a.clone().scaled(-1.0));
        }
        if !problem.equalities().is_empty() {
            cones.push(ZeroConeT(problem.equalities().len()));
        }
        let mut nonneg = 0;
        for a in problem.inequalities() {
            rows.slack_is(&a.clone().scaled(-1.0));
            nonneg += 1;
        }
        let (lower, upper) = problem.bounds();
        for j in 0..n {
            if lower[j].is_finite() {
                rows.slack_is(&Affine::var(j).plus_const(-lower[j]));
                nonneg += 1;
            }
            if upper[j].is_finite() {
                rows.slack_is(&Affine::constant(upper[j]).term(j, -1.0));
                nonneg += 1;
            }
        }
        if nonneg > 0 {
            cones.push(NonnegativeConeT(nonneg));
        }
        for s in problem.socs() {
            rows.slack_is(&s.head);
            for t in &s.tail {
                rows.slack_is(t);
            }
            let dim = s.tail.len() + 1;
            // Clarabel wants cones of dimension ≥ 2; a lone head is a sign constraint.
            cones.push(if dim == 1 { NonnegativeConeT(1) } else { SecondOrderConeT(dim) });
        }

        let m = rows.b.len();
        let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(j, c) in &problem.objective().terms {
            q[j] += c;
        }
        let tol = self.tolerances;
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_feas(tol.feasibility)
            .tol_gap_abs(tol.gap)
            .tol_gap_rel(tol.gap)
            .max_iter(tol.max_iter)
            .build()
            .map_err(|e| Error::Solver(e.to_string()))?;
        let cones: Vec<SupportedConeT<f64>> = cones;
        let mut solver = DefaultSolver::new(&p, &q, &a, &rows.b, &cones, settings).map_err(|e| Error::Solver(e.to_string()))?;
        solver.solve();
        let sol = &solver.solution;
        let x = sol.x.clone();
        let objective = problem.objective().eval(&x);
        let max_residual = problem.max_residual(&x);
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved if max_residual <= tol.acceptance && objective.is_finite() => {
                ConicStatus::Optimal
            }
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => ConicStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => ConicStatus::Unbounded,
            _ => ConicStatus::NumericalFailure,
        };
        Ok(ConicSolution { status, x, objective, iterations: sol.iterations, max_residual })
    }
}
