//! General linear-program model types and the embedded simplex solver.
//!
//! Models are stated in the natural form `max c'x, rows {<=,=,>=} rhs,
//! l <= x <= u`. The solver standardizes internally (slack per row,
//! minimization) and solves with a bounded-variable revised simplex using a
//! product-form basis inverse. [`solve_lp`] is the public entry point; the
//! branch-and-bound in [`crate::milp`] drives the engine directly for warm
//! restarts.

pub mod simplex;

pub use simplex::{solve_lp, SimplexEngine, SimplexOptions};

/// Variable integrality marker. The LP solver always relaxes binaries to
/// their [0, 1] box; integrality is enforced by branch-and-bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    /// Sparse coefficients as (column index, value) pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// A linear program in modeling form. The objective sense is maximization
/// throughout this crate.
#[derive(Debug, Clone, Default)]
pub struct Model {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
}

impl Model {
    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
        objective: f64,
    ) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
            objective,
        });
        self.vars.len() - 1
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> usize {
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn binary_indices(&self) -> Vec<usize> {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| i)
            .collect()
    }

    /// Objective value of an assignment over the structural variables.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(values)
            .map(|(v, x)| v.objective * x)
            .sum()
    }

    /// Largest absolute constraint violation of an assignment, together with
    /// the worst row index.
    pub fn max_violation(&self, values: &[f64]) -> (f64, usize) {
        let mut worst = (0.0_f64, 0usize);
        for (r, row) in self.rows.iter().enumerate() {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * values[j]).sum();
            let viol = match row.sense {
                RowSense::Le => lhs - row.rhs,
                RowSense::Ge => row.rhs - lhs,
                RowSense::Eq => (lhs - row.rhs).abs(),
            };
            if viol > worst.0 {
                worst = (viol, r);
            }
        }
        worst
    }
}

/// Outcome of an LP solve.
#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    /// No feasible point; `rows` indexes the model rows whose infeasibility
    /// the solver certified (phase-1 artificials left positive, or the
    /// violated row found by the dual simplex).
    Infeasible { rows: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Objective in the model's (maximization) sense.
    pub objective: f64,
    /// Values of the structural variables.
    pub values: Vec<f64>,
    /// True when the final basis passed the dual-feasibility check, i.e.
    /// the solution carries an optimality certificate.
    pub dual_feasible: bool,
    pub iterations: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error("model has no variables")]
    EmptyModel,
    #[error("LP is unbounded (all toolkit models are bounded; this indicates a modeling bug)")]
    Unbounded,
    #[error("simplex failed to converge within the iteration limit")]
    IterationLimit,
    #[error("singular basis encountered during refactorization")]
    SingularBasis,
    #[error("variable {0} has crossing bounds (lower > upper)")]
    CrossingBounds(usize),
}
