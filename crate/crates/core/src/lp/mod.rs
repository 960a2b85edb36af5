//! Linear programming kernel.
//!
//! A bounded-variable revised simplex solver ([`LpSolver`]) with dual values,
//! reduced costs, warm starts from a [`Basis`] and Farkas certificates on
//! infeasible exits. Everything above it (branch-and-bound, cut separation)
//! is built on this module.

mod lu;
mod simplex;

use serde::{Deserialize, Serialize};

pub use simplex::LpSolver;

/// Row sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }

    /// The admissible range of the row activity for right-hand side `rhs`.
    pub fn range(self, rhs: f64) -> (f64, f64) {
        match self {
            Sense::Le => (f64::NEG_INFINITY, rhs),
            Sense::Ge => (rhs, f64::INFINITY),
            Sense::Eq => (rhs, rhs),
        }
    }
}

/// A sparse linear row `Σ coeffs (sense) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        LinearRow { coeffs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A linear program over continuous columns.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub obj: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub rows: Vec<LinearRow>,
    pub maximize: bool,
}

impl LpProblem {
    pub fn num_cols(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_col(&mut self, obj: f64, lower: f64, upper: f64) -> usize {
        self.obj.push(obj);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.obj.len() - 1
    }

    pub fn add_row(&mut self, row: LinearRow) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.num_cols() {
            worst = worst
                .max(self.col_lower[j] - x[j])
                .max(x[j] - self.col_upper[j]);
        }
        for row in &self.rows {
            worst = worst.max(row.violation(x));
        }
        worst
    }

    fn validate(&self) -> Result<(), String> {
        let n = self.num_cols();
        if self.col_lower.len() != n || self.col_upper.len() != n {
            return Err("bound vectors do not match the column count".into());
        }
        for j in 0..n {
            if self.obj[j].is_nan() || self.obj[j].is_infinite() {
                return Err(format!("objective coefficient of column {j} is not finite"));
            }
            if self.col_lower[j].is_nan() || self.col_upper[j].is_nan() {
                return Err(format!("bounds of column {j} are NaN"));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(format!("rhs of row {i} is not finite"));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(format!("row {i} references column {j} out of range"));
                }
                if !a.is_finite() {
                    return Err(format!("row {i} has a non-finite coefficient"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Position of a variable with respect to a simplex basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

/// A simplex basis over structural columns and row logicals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub cols: Vec<VarStatus>,
    pub rows: Vec<VarStatus>,
}

impl Basis {
    pub fn num_basic(&self) -> usize {
        self.cols
            .iter()
            .chain(self.rows.iter())
            .filter(|s| **s == VarStatus::Basic)
            .count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    /// Consecutive non-improving iterations before switching to Bland's rule.
    pub stall_threshold: usize,
    pub max_iterations: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-7,
            pivot_tol: 1e-9,
            refactor_every: 100,
            stall_threshold: 60,
            max_iterations: 200_000,
        }
    }
}

/// Result of an LP solve.
///
/// Dual values follow the convention `reduced_costs = obj - Aᵀ duals` in the
/// problem's own optimization sense. When the status is `Infeasible`,
/// `farkas` holds row multipliers `y` with `y ≥ 0` on `≤` rows, `y ≤ 0` on
/// `≥` rows and `min_{x in bounds} (Aᵀy)·x > yᵀb`.
#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    pub row_activity: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub farkas: Option<Vec<f64>>,
    pub basis: Basis,
    pub iterations: usize,
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `problem`, warm-starting from `hint` when it is a valid basis for
/// the problem's dimensions.
pub fn solve_lp(problem: &LpProblem, hint: Option<&Basis>) -> LpOutcome {
    solve_lp_with(problem, hint, LpOptions::default())
}

/// LP relaxation of a MILP (integrality dropped).
pub fn solve_lp_relaxation(model: &crate::model::MilpModel) -> LpOutcome {
    solve_lp(&model.to_lp(), None)
}

pub fn solve_lp_with(problem: &LpProblem, hint: Option<&Basis>, opts: LpOptions) -> LpOutcome {
    if let Err(msg) = problem.validate() {
        panic!("malformed LP: {msg}");
    }
    let mut solver = LpSolver::with_options(problem, opts);
    if let Some(b) = hint {
        solver.set_basis(b);
    }
    solver.solve()
}

/// Certificate margin of a Farkas ray: `min_{x in bounds} (Aᵀy)·x − max_{r in
/// row ranges} yᵀr`. A strictly positive margin proves infeasibility.
/// Returns `-inf` when the ray has the wrong sign on some row or bound.
pub fn farkas_margin(problem: &LpProblem, ray: &[f64]) -> f64 {
    let n = problem.num_cols();
    let scale = ray.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let eps = 1e-9 * scale;
    let mut g = vec![0.0; n];
    for (i, row) in problem.rows.iter().enumerate() {
        if ray[i] != 0.0 {
            for &(j, a) in &row.coeffs {
                g[j] += ray[i] * a;
            }
        }
    }
    let mut margin = 0.0;
    for j in 0..n {
        let gj = g[j];
        if gj > eps {
            if problem.col_lower[j].is_finite() {
                margin += gj * problem.col_lower[j];
            } else {
                return f64::NEG_INFINITY;
            }
        } else if gj < -eps {
            if problem.col_upper[j].is_finite() {
                margin += gj * problem.col_upper[j];
            } else {
                return f64::NEG_INFINITY;
            }
        } else {
            // |g| tiny: contributes at most eps * |bound| when the bound is finite.
            let bound = if gj >= 0.0 {
                problem.col_lower[j]
            } else {
                problem.col_upper[j]
            };
            if bound.is_finite() {
                margin += gj * bound;
            }
        }
    }
    for (i, row) in problem.rows.iter().enumerate() {
        let y = ray[i];
        let ok = match row.sense {
            Sense::Le => y >= -eps,
            Sense::Ge => y <= eps,
            Sense::Eq => true,
        };
        if !ok {
            return f64::NEG_INFINITY;
        }
        margin -= y * row.rhs;
    }
    margin
}

/// True when `ray` certifies infeasibility of `problem`.
pub fn verify_farkas(problem: &LpProblem, ray: &[f64]) -> bool {
    let scale = ray.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    scale > 0.0 && farkas_margin(problem, ray) > 1e-9 * scale.max(1.0)
}

/// Dual objective value implied by `duals` and `reduced_costs` (each column's
/// reduced cost is charged at the bound that makes the Lagrangian bounded).
pub fn dual_objective(problem: &LpProblem, duals: &[f64], reduced_costs: &[f64]) -> f64 {
    let mut value: f64 = problem
        .rows
        .iter()
        .zip(duals)
        .map(|(r, y)| r.rhs * y)
        .sum();
    for j in 0..problem.num_cols() {
        let d = reduced_costs[j];
        // Minimization: d > 0 sits at the lower bound, d < 0 at the upper one.
        // Maximization reverses the roles.
        let at_lower = if problem.maximize { d < 0.0 } else { d > 0.0 };
        let bound = if d == 0.0 {
            0.0
        } else if at_lower {
            problem.col_lower[j]
        } else {
            problem.col_upper[j]
        };
        if d != 0.0 && bound.is_finite() {
            value += d * bound;
        } else if d != 0.0 {
            value += if problem.maximize { f64::INFINITY } else { f64::NEG_INFINITY } * d.signum();
        }
    }
    value
}
