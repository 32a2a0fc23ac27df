//! Linear programming: problem description and a bounded-variable simplex.
//!
//! [`LpProblem`] is the modelling layer (variables with bounds, linear
//! constraints, objective). [`LpSolver`] owns a standard-form copy of a
//! problem plus a basis, so objectives and variable bounds can be changed and
//! the problem re-solved from the previous basis. [`solve_lp`] is the one-shot
//! entry point.

mod expr;
mod format;
mod simplex;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use expr::{LinExpr, VarId};
pub use format::write_lp_format;
pub use simplex::{Basis, LpSolver};

/// Primal feasibility tolerance (absolute).
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarBounds {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    vars: Vec<VarBounds>,
    names: Vec<Option<String>>,
    constraints: Vec<Constraint>,
    sense: Sense,
    objective: LinExpr,
}

impl Default for LpProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl LpProblem {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            names: Vec::new(),
            constraints: Vec::new(),
            sense: Sense::Minimize,
            objective: LinExpr::zero(),
        }
    }

    /// Adds a variable with bounds `lower ≤ x ≤ upper`; either may be infinite.
    pub fn add_var(&mut self, lower: f64, upper: f64) -> VarId {
        self.vars.push(VarBounds { lower, upper });
        self.names.push(None);
        VarId(self.vars.len() - 1)
    }

    pub fn add_named_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        let id = self.add_var(lower, upper);
        self.names[id.0] = Some(name.into());
        id
    }

    pub fn add_constraint(&mut self, expr: LinExpr, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { expr, relation, rhs });
    }

    pub fn set_objective(&mut self, sense: Sense, expr: LinExpr) {
        self.sense = sense;
        self.objective = expr;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        self.vars[var.0] = VarBounds { lower, upper };
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn bounds(&self, var: VarId) -> VarBounds {
        self.vars[var.0]
    }

    pub fn var_bounds(&self) -> &[VarBounds] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn var_name(&self, var: VarId) -> String {
        self.names[var.0].clone().unwrap_or_else(|| format!("x{}", var.0))
    }

    /// Largest violation of any bound or constraint at `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (b, &v) in self.vars.iter().zip(values) {
            worst = worst.max(b.lower - v).max(v - b.upper);
        }
        for c in &self.constraints {
            let lhs = c.expr.eval(values);
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Rejects NaN anywhere and infinities outside variable bounds.
    pub fn validate(&self) -> Result<()> {
        for (i, b) in self.vars.iter().enumerate() {
            if b.lower.is_nan() || b.upper.is_nan() || b.lower == f64::INFINITY || b.upper == f64::NEG_INFINITY {
                return Err(Error::NonFinite(format!("bounds of variable {i}")));
            }
        }
        let check = |e: &LinExpr, what: &str| -> Result<()> {
            if !e.constant.is_finite() || e.terms.iter().any(|(_, c)| !c.is_finite()) {
                return Err(Error::NonFinite(what.to_string()));
            }
            if let Some((v, _)) = e.terms.iter().find(|(v, _)| v.0 >= self.vars.len()) {
                return Err(Error::InvalidArgument(format!("{what} references unknown variable {}", v.0)));
            }
            Ok(())
        };
        for (i, c) in self.constraints.iter().enumerate() {
            check(&c.expr, &format!("constraint {i}"))?;
            if !c.rhs.is_finite() {
                return Err(Error::NonFinite(format!("right-hand side of constraint {i}")));
            }
        }
        check(&self.objective, "objective")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Values of the structural variables (meaningful for `Optimal`).
    pub values: Vec<f64>,
    /// Objective at `values`, in the problem's own sense.
    pub objective: f64,
    /// Proven bound on the optimum: an upper bound when maximizing, a lower
    /// bound when minimizing. Derived from the final dual multipliers, so it
    /// stays valid when the solve stops early in the dual phase.
    pub bound: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LpLimits {
    pub max_iterations: Option<usize>,
    pub time_budget: Option<Duration>,
}

/// Solves `problem` from scratch.
pub fn solve_lp(problem: &LpProblem, limits: LpLimits) -> Result<LpOutcome> {
    let mut solver = LpSolver::new(problem)?;
    Ok(solver.solve(limits))
}
