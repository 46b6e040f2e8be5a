//! Small linear programs over the factor space of a constrained zonotope.
//!
//! Every set predicate in this crate reduces to one of two programs over
//! `ξ ∈ [-1, 1]^{n_g}`: a minimum-residual program (how far is the affine
//! system from being satisfiable) and a support program (maximize a linear
//! functional of `c + Gξ` subject to `Aξ = b`).

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use super::TOL_FEAS;

/// Minimizes `t` subject to `|M ξ - rhs|_∞ <= t` and `|ξ|_∞ <= 1`.
///
/// Returns the optimal residual. A zero-row system has residual zero.
pub(crate) fn min_residual(m: &DMatrix<f64>, rhs: &DVector<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let xi: Vec<_> = (0..m.ncols())
        .map(|_| problem.add_var(0.0, (-1.0, 1.0)))
        .collect();
    let t = problem.add_var(1.0, (0.0, f64::INFINITY));
    for r in 0..m.nrows() {
        let mut upper = LinearExpr::empty();
        let mut lower = LinearExpr::empty();
        for (c, var) in xi.iter().enumerate() {
            let a = m[(r, c)];
            if a != 0.0 {
                upper.add(*var, a);
                lower.add(*var, a);
            }
        }
        upper.add(t, -1.0);
        lower.add(t, 1.0);
        problem.add_constraint(upper, ComparisonOp::Le, rhs[r]);
        problem.add_constraint(lower, ComparisonOp::Ge, rhs[r]);
    }
    match problem.solve().ok().and_then(|o| o.into_solution().ok()) {
        Some(sol) => sol.objective().max(0.0),
        // The program is always feasible (t can grow); a solver failure is
        // reported as an infinite residual so callers treat it as "outside".
        None => f64::INFINITY,
    }
}

/// Maximizes `w · ξ` subject to `|Aξ - b|_∞ <= TOL_FEAS`, `|ξ|_∞ <= 1`.
///
/// Returns the maximizing `ξ`, or `None` when the constraints are infeasible.
pub(crate) fn maximize(w: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = w.len();
    if a.nrows() == 0 {
        return Some(DVector::from_iterator(
            n,
            w.iter().map(|&wi| if wi > 0.0 { 1.0 } else if wi < 0.0 { -1.0 } else { 0.0 }),
        ));
    }
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let xi: Vec<_> = (0..n).map(|k| problem.add_var(w[k], (-1.0, 1.0))).collect();
    for r in 0..a.nrows() {
        let slack = problem.add_var(0.0, (-TOL_FEAS, TOL_FEAS));
        let mut expr = LinearExpr::empty();
        for (c, var) in xi.iter().enumerate() {
            if a[(r, c)] != 0.0 {
                expr.add(*var, a[(r, c)]);
            }
        }
        expr.add(slack, 1.0);
        problem.add_constraint(expr, ComparisonOp::Eq, b[r]);
    }
    let sol = problem.solve().ok()?.into_solution().ok()?;
    Some(DVector::from_iterator(n, xi.iter().map(|v| sol.var_value(*v).clamp(-1.0, 1.0))))
}
