//! Branch-and-bound over binary variables.
//!
//! Nodes are explored best-first on their relaxation bound (ties go to the
//! older node). Each node stores only its binary fixings and the parent's
//! final basis, so child LPs warm-start with a few dual simplex pivots.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::Serialize;
use tracing::{debug, trace};

use crate::error::{Error, Result};
use crate::lp::{Basis, LpLimits, LpProblem, LpSolver, LpStatus, Sense, VarId};

/// A binary is integral when within this distance of 0 or 1.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Largest constraint violation accepted for an incumbent.
pub const INCUMBENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub base: LpProblem,
    pub binaries: Vec<VarId>,
}

impl MilpModel {
    pub fn new(base: LpProblem, binaries: Vec<VarId>) -> Result<Self> {
        let model = Self { base, binaries };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        for &b in &self.binaries {
            if b.0 >= self.base.num_vars() {
                return Err(Error::InvalidArgument(format!("binary {} is not a variable", b.0)));
            }
            let vb = self.base.bounds(b);
            if vb.lower < 0.0 || vb.upper > 1.0 {
                return Err(Error::InvalidArgument(format!("binary {} has bounds [{}, {}]", b.0, vb.lower, vb.upper)));
            }
        }
        Ok(())
    }

    /// Whether `values` satisfies every constraint and integrality within tolerance.
    pub fn is_feasible(&self, values: &[f64]) -> bool {
        values.len() == self.base.num_vars()
            && self.base.max_violation(values) <= INCUMBENT_TOL
            && self.binaries.iter().all(|b| fractionality(values[b.0]) <= INTEGRALITY_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    /// Wall-clock budget exhausted.
    TimedOut,
    /// Node budget exhausted.
    NodeLimit,
    /// One of the caller's early-stop targets was met.
    TargetReached,
}

#[derive(Debug, Clone, Default)]
pub struct MilpLimits {
    pub time_budget: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Stop as soon as an incumbent is strictly better than this value.
    pub incumbent_target: Option<f64>,
    /// Stop as soon as the proven bound is no better than this value.
    pub bound_target: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct MilpOptions {
    pub limits: MilpLimits,
    /// Candidate solution checked for feasibility before the search starts.
    pub initial_incumbent: Option<Vec<f64>>,
    /// Record the global bound after every node.
    pub log_nodes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeLog {
    pub node: usize,
    pub depth: usize,
    pub node_bound: f64,
    pub incumbent: Option<f64>,
    pub global_bound: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: MilpStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Objective of the incumbent, in the model's own sense.
    pub objective: Option<f64>,
    /// Proven bound on the optimum: upper when maximizing, lower when minimizing.
    pub best_bound: f64,
    /// Nodes solved after the root.
    pub nodes_explored: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
    pub log: Vec<NodeLog>,
}

pub fn solve_milp(model: &MilpModel, limits: MilpLimits) -> Result<SolveOutcome> {
    solve_milp_with(model, &MilpOptions { limits, ..Default::default() })
}

struct Node {
    /// Upper bound in maximization form.
    bound: f64,
    id: usize,
    depth: usize,
    fixings: Vec<(usize, f64)>,
    basis: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(other.id.cmp(&self.id))
    }
}

fn fractionality(v: f64) -> f64 {
    (v - v.round()).abs()
}

struct Search<'a> {
    model: &'a MilpModel,
    solver: LpSolver,
    sign: f64,
    root_bounds: Vec<(f64, f64)>,
    incumbent: Option<(f64, Vec<f64>)>,
    deadline: Option<Instant>,
    lp_iterations: usize,
}

enum NodeResult {
    Pruned,
    Unresolved(f64),
    Branch(f64, usize, Basis, Vec<f64>),
}

impl Search<'_> {
    fn incumbent_value(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::NEG_INFINITY, |(v, _)| *v)
    }

    fn offer(&mut self, values: Vec<f64>) -> bool {
        if !self.model.is_feasible(&values) {
            return false;
        }
        let v = self.sign * self.model.base.objective().eval(&values);
        if v > self.incumbent_value() {
            self.incumbent = Some((v, values));
            return true;
        }
        false
    }

    fn lp_limits(&self) -> LpLimits {
        LpLimits { max_iterations: None, time_budget: self.deadline.map(|d| d.saturating_duration_since(Instant::now())) }
    }

    fn apply_fixings(&mut self, fixings: &[(usize, f64)]) {
        for (k, b) in self.model.binaries.iter().enumerate() {
            let (lo, hi) = self.root_bounds[k];
            self.solver.set_bounds(*b, lo, hi);
        }
        for &(var, v) in fixings {
            self.solver.set_bounds(VarId(var), v, v);
        }
    }

    fn solve_node(&mut self, node: &Node, heuristic: bool) -> Result<NodeResult> {
        self.apply_fixings(&node.fixings);
        if let Some(b) = &node.basis {
            self.solver.set_basis(b);
        }
        let out = self.solver.solve(self.lp_limits());
        self.lp_iterations += out.iterations;
        match out.status {
            LpStatus::Infeasible => return Ok(NodeResult::Pruned),
            LpStatus::Unbounded => return Err(Error::UnboundedRelaxation),
            LpStatus::IterationLimit => {
                let b = (self.sign * out.bound).min(node.bound);
                return Ok(NodeResult::Unresolved(b));
            }
            LpStatus::Optimal => {}
        }
        let bound = (self.sign * out.bound).max(self.sign * out.objective).min(node.bound);
        if bound <= self.incumbent_value() + 1e-9 {
            return Ok(NodeResult::Pruned);
        }
        let mut branch: Option<(usize, f64)> = None;
        for &b in &self.model.binaries {
            let f = fractionality(out.values[b.0]);
            if f > INTEGRALITY_TOL && branch.is_none_or(|(_, best)| f > best) {
                branch = Some((b.0, f));
            }
        }
        let Some((var, _)) = branch else {
            if !self.offer(out.values.clone()) && self.incumbent_value() < self.sign * out.objective - 1e-9 {
                // integral but numerically off; keep the node open on its bound
                return Ok(NodeResult::Unresolved(bound));
            }
            return Ok(NodeResult::Pruned);
        };
        let basis = self.solver.basis();
        if heuristic {
            self.rounding_heuristic(&out.values);
        }
        Ok(NodeResult::Branch(bound, var, basis, out.values))
    }

    fn rounding_heuristic(&mut self, values: &[f64]) {
        for &b in &self.model.binaries {
            let r = values[b.0].round().clamp(0.0, 1.0);
            self.solver.set_bounds(b, r, r);
        }
        let out = self.solver.solve(self.lp_limits());
        self.lp_iterations += out.iterations;
        if out.status == LpStatus::Optimal {
            let mut vals = out.values;
            for &b in &self.model.binaries {
                vals[b.0] = vals[b.0].round();
            }
            if self.offer(vals) {
                debug!(incumbent = self.incumbent_value() * self.sign, "rounding heuristic improved incumbent");
            }
        }
    }
}

/// Solves `model` to optimality unless a limit or target intervenes.
pub fn solve_milp_with(model: &MilpModel, options: &MilpOptions) -> Result<SolveOutcome> {
    let start = Instant::now();
    model.validate()?;
    let limits = &options.limits;
    let sign = match model.base.sense() {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let mut search = Search {
        model,
        solver: LpSolver::new(&model.base)?,
        sign,
        root_bounds: model.binaries.iter().map(|&b| (model.base.bounds(b).lower, model.base.bounds(b).upper)).collect(),
        incumbent: None,
        deadline: limits.time_budget.map(|d| start + d),
        lp_iterations: 0,
    };
    if let Some(candidate) = &options.initial_incumbent {
        if search.offer(candidate.clone()) {
            debug!(objective = search.incumbent_value() * sign, "seeded incumbent accepted");
        }
    }
    let incumbent_target = limits.incumbent_target.map(|t| sign * t);
    let bound_target = limits.bound_target.map(|t| sign * t);

    let mut open = BinaryHeap::new();
    open.push(Node { bound: f64::INFINITY, id: 0, depth: 0, fixings: Vec::new(), basis: None });
    let mut next_id = 1;
    let mut unresolved = f64::NEG_INFINITY;
    let mut nodes = 0usize;
    let mut log = Vec::new();
    let mut status = None;
    let mut first = true;

    let global_bound = |open: &BinaryHeap<Node>, unresolved: f64, inc: f64| -> f64 {
        open.peek().map_or(f64::NEG_INFINITY, |n| n.bound).max(unresolved).max(inc)
    };

    while let Some(node) = open.pop() {
        if node.bound <= search.incumbent_value() + 1e-9 {
            continue;
        }
        if !first {
            if limits.node_limit.is_some_and(|l| nodes >= l) {
                open.push(node);
                status = Some(MilpStatus::NodeLimit);
                break;
            }
            if search.deadline.is_some_and(|d| Instant::now() >= d) {
                open.push(node);
                status = Some(MilpStatus::TimedOut);
                break;
            }
            nodes += 1;
        }
        first = false;
        match search.solve_node(&node, node.depth <= 2)? {
            NodeResult::Pruned => {}
            NodeResult::Unresolved(b) => {
                unresolved = unresolved.max(b);
                if search.deadline.is_some_and(|d| Instant::now() >= d) {
                    status = Some(MilpStatus::TimedOut);
                    break;
                }
            }
            NodeResult::Branch(bound, var, basis, values) => {
                let up_first = values[var] >= 0.5;
                let dirs = if up_first { [1.0, 0.0] } else { [0.0, 1.0] };
                for v in dirs {
                    let mut fixings = node.fixings.clone();
                    fixings.push((var, v));
                    open.push(Node { bound, id: next_id, depth: node.depth + 1, fixings, basis: Some(basis.clone()) });
                    next_id += 1;
                }
            }
        }
        let inc = search.incumbent_value();
        let gb = global_bound(&open, unresolved, inc);
        trace!(node = nodes, depth = node.depth, global_bound = gb * sign, "node solved");
        if options.log_nodes {
            log.push(NodeLog {
                node: nodes,
                depth: node.depth,
                node_bound: sign * node.bound.min(gb),
                incumbent: search.incumbent.as_ref().map(|(v, _)| sign * v),
                global_bound: sign * gb,
            });
        }
        if incumbent_target.is_some_and(|t| inc > t) || bound_target.is_some_and(|t| gb <= t) {
            status = Some(MilpStatus::TargetReached);
            break;
        }
    }

    let inc = search.incumbent_value();
    let gb = global_bound(&open, unresolved, inc);
    let status = status.unwrap_or(if unresolved > inc + 1e-9 {
        MilpStatus::TimedOut
    } else if search.incumbent.is_some() {
        MilpStatus::Optimal
    } else {
        MilpStatus::Infeasible
    });
    let best_bound = match status {
        MilpStatus::Optimal => inc,
        _ => gb,
    };
    let (objective, incumbent) = match search.incumbent {
        Some((v, x)) => (Some(sign * v), Some(x)),
        None => (None, None),
    };
    debug!(?status, nodes, "branch and bound finished");
    Ok(SolveOutcome {
        status,
        incumbent,
        objective,
        best_bound: sign * best_bound,
        nodes_explored: nodes,
        lp_iterations: search.lp_iterations,
        wall_time: start.elapsed(),
        log,
    })
}
