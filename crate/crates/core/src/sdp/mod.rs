//! Self-contained semidefinite programming over symmetric PSD blocks.
//!
//! A problem is stated declaratively: a list of symmetric matrix blocks
//! (each constrained positive semidefinite), sparse linear constraints on
//! their entries, and a linear objective. Entry (i, j) of a block always
//! means the same as entry (j, i); coefficients address the common value.
//!
//! ```text
//! max / min   Σ coeff · X[block][row][col]
//! subject to  Σ coeff · X[block][row][col]  (= | ≤ | ≥)  target  (± tolerance)
//!             X[block] ⪰ 0 for every block
//! ```
//!
//! Equality constraints are eliminated exactly during presolve (entry
//! identifications via a signed union-find, general equalities by
//! substitution); their tolerance is an acceptance margin for verification,
//! not slack the optimizer may spend. Inequalities become scalar slack
//! blocks, relaxed by their own tolerance. The reduced problem
//!
//! ```text
//! max c·z   s.t.   F0_j + Σ_k z_k F_jk ⪰ 0
//! ```
//!
//! is solved by a primal-dual interior-point method with Nesterov-Todd
//! scaling ([`ipm`]). The solver is deterministic: no randomness, no
//! data-dependent iteration order, so identical inputs give bit-identical
//! outputs.
//!
//! Solutions carry the optimizer's own residuals, but [`verify`] recomputes
//! feasibility and the objective from the returned matrices alone; callers
//! that act on a solution are expected to gate on it.
//!
//! # JSON form
//!
//! [`SdpProblem`] serializes with serde into a triplet format suitable for
//! debugging dumps: each term is `{"block": b, "row": i, "col": j,
//! "coeff": v}`, constraints carry `relation` (`"eq" | "le" | "ge"`),
//! `target` and `tolerance`, and the problem lists `block_dims`,
//! `constraints`, `objective`, `maximize`.

mod ipm;
mod presolve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

/// One addend of a sparse linear expression: `coeff · X[block][row][col]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub coeff: f64,
}

impl Term {
    pub fn new(block: usize, row: usize, col: usize, coeff: f64) -> Self {
        Self { block, row, col, coeff }
    }
}

/// Sparse linear functional of the block entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearExpr {
    pub terms: Vec<Term>,
}

impl LinearExpr {
    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    /// Evaluates against explicit block matrices (row-major).
    fn eval(&self, dims: &[usize], blocks: &[Vec<f64>]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * blocks[t.block][t.row * dims[t.block] + t.col])
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

/// `expr (relation) target`, with `tolerance` the accepted numerical
/// violation: equalities are solved exactly and verified up to
/// `|expr - target| ≤ tolerance`, inequalities gain that much slack on
/// their bounding side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub expr: LinearExpr,
    pub relation: Relation,
    pub target: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    /// Side length of each PSD block.
    pub block_dims: Vec<usize>,
    pub constraints: Vec<Constraint>,
    pub objective: LinearExpr,
    pub maximize: bool,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>, maximize: bool) -> Self {
        Self { block_dims, constraints: Vec::new(), objective: LinearExpr::default(), maximize }
    }

    pub fn add_constraint(
        &mut self,
        expr: LinearExpr,
        relation: Relation,
        target: f64,
        tolerance: f64,
    ) {
        self.constraints.push(Constraint { expr, relation, target, tolerance });
    }

    /// Structural validation: indices in range, finite numbers, tolerances
    /// non-negative.
    pub fn validate(&self) -> Result<(), SdpError> {
        let check_expr = |expr: &LinearExpr, what: &str| -> Result<(), SdpError> {
            for t in &expr.terms {
                if t.block >= self.block_dims.len() {
                    return Err(SdpError::BadTerm(format!(
                        "{what}: block {} out of range ({} blocks)",
                        t.block,
                        self.block_dims.len()
                    )));
                }
                let d = self.block_dims[t.block];
                if t.row >= d || t.col >= d {
                    return Err(SdpError::BadTerm(format!(
                        "{what}: entry ({}, {}) out of range for {d}x{d} block {}",
                        t.row, t.col, t.block
                    )));
                }
                if !t.coeff.is_finite() {
                    return Err(SdpError::BadTerm(format!("{what}: non-finite coefficient")));
                }
            }
            Ok(())
        };
        check_expr(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            check_expr(&c.expr, &format!("constraint {i}"))?;
            if !c.target.is_finite() || !c.tolerance.is_finite() || c.tolerance < 0.0 {
                return Err(SdpError::BadTerm(format!(
                    "constraint {i}: bad target/tolerance ({}, {})",
                    c.target, c.tolerance
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    BadTerm(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Converged to the requested tolerance.
    Optimal,
    /// Terminated with residuals above the request but below 1e-6.
    Inaccurate,
    /// Constraints are mutually inconsistent (detected in presolve or via a
    /// dual improving ray).
    Infeasible,
    /// No certificate either way; see `message` and `trace`.
    Failed,
}

/// One interior-point iteration, kept for post-mortems.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterationStat {
    pub mu: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub objective_value: f64,
    /// Row-major symmetric matrices, one per problem block.
    pub blocks: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Scaled residuals of the internal reduced form (diagnostic only;
    /// use [`verify`] for trustworthy feasibility numbers).
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub trace: Vec<IterationStat>,
    /// Human-readable diagnostics for non-Optimal exits.
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Relative accuracy of duality gap and residuals. Default 1e-9.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iterations: 200 }
    }
}

/// Solves the problem. Never panics on well-formed input; failure modes are
/// reported through [`SdpSolution::status`].
pub fn solve(problem: &SdpProblem, options: &SolveOptions) -> SdpSolution {
    match problem.validate() {
        Ok(()) => {}
        Err(e) => {
            return SdpSolution {
                status: SolveStatus::Failed,
                objective_value: f64::NAN,
                blocks: problem.block_dims.iter().map(|&d| vec![0.0; d * d]).collect(),
                iterations: 0,
                primal_residual: f64::INFINITY,
                dual_residual: f64::INFINITY,
                duality_gap: f64::INFINITY,
                trace: Vec::new(),
                message: Some(e.to_string()),
            }
        }
    }
    let reduced = presolve::reduce(problem);
    let outcome = match reduced {
        Err(msg) => ipm::Outcome {
            status: SolveStatus::Infeasible,
            z: Vec::new(),
            iterations: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            duality_gap: f64::INFINITY,
            trace: Vec::new(),
            message: Some(msg),
        },
        Ok(red) => {
            let outcome = ipm::solve_reduced(&red, options);
            return finish(problem, &red, outcome);
        }
    };
    SdpSolution {
        status: outcome.status,
        objective_value: f64::NAN,
        blocks: problem.block_dims.iter().map(|&d| vec![0.0; d * d]).collect(),
        iterations: 0,
        primal_residual: outcome.primal_residual,
        dual_residual: outcome.dual_residual,
        duality_gap: outcome.duality_gap,
        trace: outcome.trace,
        message: outcome.message,
    }
}

fn finish(problem: &SdpProblem, red: &presolve::Reduced, outcome: ipm::Outcome) -> SdpSolution {
    let blocks = red.reconstruct_blocks(problem, &outcome.z);
    let mut obj = red.obj_const;
    for (k, c) in red.obj.iter().enumerate() {
        obj += c * outcome.z[k];
    }
    SdpSolution {
        status: outcome.status,
        objective_value: obj,
        blocks,
        iterations: outcome.iterations,
        primal_residual: outcome.primal_residual,
        dual_residual: outcome.dual_residual,
        duality_gap: outcome.duality_gap,
        trace: outcome.trace,
        message: outcome.message,
    }
}

/// Independent check of a solution against its problem.
///
/// Everything is recomputed from `solution.blocks`: eigenvalue floors by
/// Jacobi decomposition, constraint residuals beyond their own tolerances,
/// and the objective. Solver-internal residuals are ignored.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    /// Most negative eigenvalue across blocks (0 if there are none).
    pub min_eigenvalue: f64,
    /// Largest constraint violation beyond each constraint's tolerance.
    pub max_constraint_violation: f64,
    /// Index of the worst-violated constraint, if any violation is nonzero.
    pub worst_constraint: Option<usize>,
    pub objective_reported: f64,
    pub objective_recomputed: f64,
}

impl VerifyReport {
    /// True when PSD-ness, constraints, and the reported objective all hold
    /// to `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.min_eigenvalue >= -tol
            && self.max_constraint_violation <= tol
            && (self.objective_reported - self.objective_recomputed).abs()
                <= tol * (1.0 + self.objective_recomputed.abs())
    }
}

pub fn verify(problem: &SdpProblem, solution: &SdpSolution) -> VerifyReport {
    let dims = &problem.block_dims;
    let mut min_eig = 0.0f64;
    for (b, &d) in dims.iter().enumerate() {
        if d == 0 {
            continue;
        }
        let (w, _) = linalg::eigh(d, &solution.blocks[b]);
        min_eig = min_eig.min(w[0]);
    }
    let mut max_violation = 0.0f64;
    let mut worst = None;
    for (i, c) in problem.constraints.iter().enumerate() {
        let v = c.expr.eval(dims, &solution.blocks);
        let excess = match c.relation {
            Relation::Eq => (v - c.target).abs() - c.tolerance,
            Relation::Le => v - (c.target + c.tolerance),
            Relation::Ge => (c.target - c.tolerance) - v,
        }
        .max(0.0);
        if excess > max_violation {
            max_violation = excess;
            worst = Some(i);
        }
    }
    let recomputed = problem.objective.eval(dims, &solution.blocks);
    VerifyReport {
        min_eigenvalue: min_eig,
        max_constraint_violation: max_violation,
        worst_constraint: worst,
        objective_reported: solution.objective_value,
        objective_recomputed: recomputed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(block: usize, row: usize, col: usize) -> LinearExpr {
        LinearExpr::new(vec![Term::new(block, row, col, 1.0)])
    }

    #[test]
    fn scalar_cap() {
        // max x s.t. x ≤ 3, x as a 1×1 PSD block.
        let mut p = SdpProblem::new(vec![1], true);
        p.objective = entry(0, 0, 0);
        p.add_constraint(entry(0, 0, 0), Relation::Le, 3.0, 0.0);
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal, "{:?}", sol.message);
        assert!((sol.objective_value - 3.0).abs() < 1e-7);
        assert!(verify(&p, &sol).passes(1e-7));
    }

    #[test]
    fn off_diagonal_is_limited_by_psd() {
        // max X01 with X00 = X11 = 1: optimum 1 (rank-one boundary).
        let mut p = SdpProblem::new(vec![2], true);
        p.objective = entry(0, 0, 1);
        p.add_constraint(entry(0, 0, 0), Relation::Eq, 1.0, 0.0);
        p.add_constraint(entry(0, 1, 1), Relation::Eq, 1.0, 0.0);
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal, "{:?}", sol.message);
        assert!((sol.objective_value - 1.0).abs() < 1e-7);
        assert!(verify(&p, &sol).passes(1e-6));
    }

    #[test]
    fn three_cycle_correlation_bound() {
        // max X01 + X12 - X02 over 3×3 correlation matrices: 3/2.
        let mut p = SdpProblem::new(vec![3], true);
        p.objective = LinearExpr::new(vec![
            Term::new(0, 0, 1, 1.0),
            Term::new(0, 1, 2, 1.0),
            Term::new(0, 0, 2, -1.0),
        ]);
        for i in 0..3 {
            p.add_constraint(entry(0, i, i), Relation::Eq, 1.0, 0.0);
        }
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal, "{:?}", sol.message);
        assert!((sol.objective_value - 1.5).abs() < 1e-7, "got {}", sol.objective_value);
        assert!(verify(&p, &sol).passes(1e-6));
    }

    #[test]
    fn entry_ties_across_blocks() {
        // Blocks a, b scalar; a = b, b ≤ 0.7, maximize a.
        let mut p = SdpProblem::new(vec![1, 1], true);
        p.objective = entry(0, 0, 0);
        p.add_constraint(
            LinearExpr::new(vec![Term::new(0, 0, 0, 1.0), Term::new(1, 0, 0, -1.0)]),
            Relation::Eq,
            0.0,
            0.0,
        );
        p.add_constraint(entry(1, 0, 0), Relation::Le, 0.7, 0.0);
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal, "{:?}", sol.message);
        assert!((sol.objective_value - 0.7).abs() < 1e-7);
        assert!((sol.blocks[0][0] - sol.blocks[1][0]).abs() < 1e-12);
    }

    #[test]
    fn equality_tolerance_is_a_verification_margin_not_slack() {
        // x = 0.5 with tolerance 0.1: solved exactly, never optimized into
        // the margin; the margin only widens what verification accepts.
        let mut p = SdpProblem::new(vec![1], true);
        p.objective = entry(0, 0, 0);
        p.add_constraint(entry(0, 0, 0), Relation::Eq, 0.5, 0.1);
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal, "{:?}", sol.message);
        assert!((sol.objective_value - 0.5).abs() < 1e-9);
        assert!(verify(&p, &sol).passes(1e-9));
        // A hand-made solution off by less than the tolerance still verifies.
        let mut shifted = sol.clone();
        shifted.blocks[0][0] = 0.55;
        shifted.objective_value = 0.55;
        let report = verify(&p, &shifted);
        assert_eq!(report.max_constraint_violation, 0.0);
    }

    #[test]
    fn minimization_works() {
        let mut p = SdpProblem::new(vec![1], false);
        p.objective = entry(0, 0, 0);
        p.add_constraint(entry(0, 0, 0), Relation::Ge, 0.25, 0.0);
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal, "{:?}", sol.message);
        assert!((sol.objective_value - 0.25).abs() < 1e-7);
    }

    #[test]
    fn conflicting_pins_are_infeasible() {
        let mut p = SdpProblem::new(vec![1], true);
        p.objective = entry(0, 0, 0);
        p.add_constraint(entry(0, 0, 0), Relation::Eq, 1.0, 0.0);
        p.add_constraint(entry(0, 0, 0), Relation::Eq, 2.0, 0.0);
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn constant_block_that_is_not_psd_is_infeasible() {
        // Fully pinned 2×2 block with eigenvalue -1.
        let mut p = SdpProblem::new(vec![2], true);
        p.add_constraint(entry(0, 0, 0), Relation::Eq, 0.0, 0.0);
        p.add_constraint(entry(0, 1, 1), Relation::Eq, 0.0, 0.0);
        p.add_constraint(entry(0, 0, 1), Relation::Eq, 1.0, 0.0);
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn contradictory_slacks_do_not_return_optimal() {
        // x ≥ 2 and x ≤ 1.
        let mut p = SdpProblem::new(vec![1], true);
        p.objective = entry(0, 0, 0);
        p.add_constraint(entry(0, 0, 0), Relation::Ge, 2.0, 0.0);
        p.add_constraint(entry(0, 0, 0), Relation::Le, 1.0, 0.0);
        let sol = solve(&p, &SolveOptions::default());
        assert!(
            matches!(sol.status, SolveStatus::Infeasible | SolveStatus::Failed),
            "status {:?}",
            sol.status
        );
    }

    #[test]
    fn verify_rejects_corrupted_blocks() {
        let mut p = SdpProblem::new(vec![2], true);
        p.objective = entry(0, 0, 1);
        p.add_constraint(entry(0, 0, 0), Relation::Eq, 1.0, 0.0);
        p.add_constraint(entry(0, 1, 1), Relation::Eq, 1.0, 0.0);
        let mut sol = solve(&p, &SolveOptions::default());
        assert!(verify(&p, &sol).passes(1e-6));
        sol.blocks[0][0] = 2.0; // violates the first equality
        assert!(!verify(&p, &sol).passes(1e-6));
        sol.blocks[0][0] = 1.0;
        sol.blocks[0][1] = 5.0; // breaks positive semidefiniteness
        sol.blocks[0][2] = 5.0;
        assert!(!verify(&p, &sol).passes(1e-6));
    }

    #[test]
    fn deterministic_across_runs() {
        let mut p = SdpProblem::new(vec![3], true);
        p.objective = LinearExpr::new(vec![
            Term::new(0, 0, 1, 1.0),
            Term::new(0, 1, 2, 1.0),
            Term::new(0, 0, 2, -1.0),
        ]);
        for i in 0..3 {
            p.add_constraint(entry(0, i, i), Relation::Eq, 1.0, 0.0);
        }
        let a = solve(&p, &SolveOptions::default());
        let b = solve(&p, &SolveOptions::default());
        assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
        for (x, y) in a.blocks[0].iter().zip(b.blocks[0].iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn weak_duality_gap_is_reported_small() {
        let mut p = SdpProblem::new(vec![2], true);
        p.objective = entry(0, 0, 1);
        p.add_constraint(entry(0, 0, 0), Relation::Eq, 1.0, 0.0);
        p.add_constraint(entry(0, 1, 1), Relation::Eq, 1.0, 0.0);
        let sol = solve(&p, &SolveOptions::default());
        assert!(sol.duality_gap <= 1e-8, "gap {}", sol.duality_gap);
    }

    #[test]
    fn problem_json_round_trip() {
        let mut p = SdpProblem::new(vec![2, 1], true);
        p.objective = entry(0, 0, 1);
        p.add_constraint(entry(1, 0, 0), Relation::Ge, -1.0, 0.5);
        let js = serde_json::to_string_pretty(&p).unwrap();
        assert!(js.contains("\"block\""));
        assert!(js.contains("\"relation\""));
        let back: SdpProblem = serde_json::from_str(&js).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn malformed_problems_fail_cleanly() {
        let mut p = SdpProblem::new(vec![2], true);
        p.objective = entry(0, 5, 0);
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, SolveStatus::Failed);
        assert!(sol.message.is_some());
    }
}
