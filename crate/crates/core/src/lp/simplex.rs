//! Bounded-variable revised simplex with a dense explicit basis inverse.
//!
//! Every constraint row `i` gets a logical variable `r_i` so that the system
//! reads `A x - r = 0`, with the row's relation folded into the bounds of
//! `r_i`. Variable bounds are handled natively: a nonbasic variable sits at
//! its lower or upper bound (or at zero when free). Rows in verifier models
//! are few compared to columns, so an `m × m` inverse with product-form
//! updates and periodic refactorization is cheap.
//!
//! Pricing is Dantzig's rule with a Harris two-pass ratio test. After a run of
//! degenerate pivots the solver falls back to Bland's rule (lowest index
//! entering and leaving) until it makes progress again, which rules out
//! cycling. All ties are broken by lowest index, so runs are reproducible.

use std::time::Instant;

use super::{
    LinExpr, LpLimits, LpOutcome, LpProblem, LpStatus, Relation, Sense, VarId, FEASIBILITY_TOL, OPTIMALITY_TOL,
};
use crate::error::Result;

const PIVOT_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 40;
const DUAL_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Free nonbasic variable parked at zero.
    Zero,
}

/// Snapshot of a simplex basis, used to warm-start related solves.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    head: Vec<usize>,
    state: Vec<State>,
}

enum Phase {
    One,
    Two,
}

enum PrimalEnd {
    Optimal,
    Infeasible,
    Unbounded,
    Limit,
}

enum DualEnd {
    Optimal,
    Infeasible,
    Limit,
}

/// A problem in standard form together with its current basis.
#[derive(Debug, Clone)]
pub struct LpSolver {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Costs in minimization form over structurals then logicals.
    cost: Vec<f64>,
    obj_const: f64,
    sense: Sense,
    objective: LinExpr,
    head: Vec<usize>,
    state: Vec<State>,
    x: Vec<f64>,
    binv: Vec<f64>,
    since_refactor: usize,
    bland: bool,
    degenerate_run: usize,
    iterations: usize,
    max_iterations: usize,
    deadline: Option<Instant>,
}

impl LpSolver {
    pub fn new(problem: &LpProblem) -> Result<Self> {
        problem.validate()?;
        let n = problem.num_vars();
        let m = problem.num_constraints();
        let mut cols = vec![Vec::new(); n];
        let mut lo = Vec::with_capacity(n + m);
        let mut hi = Vec::with_capacity(n + m);
        for b in problem.var_bounds() {
            lo.push(b.lower);
            hi.push(b.upper);
        }
        for (i, c) in problem.constraints().iter().enumerate() {
            let mut e = c.expr.clone();
            e.normalize();
            for &(v, a) in &e.terms {
                cols[v.0].push((i, a));
            }
            let rhs = c.rhs - e.constant;
            let (l, u) = match c.relation {
                Relation::Le => (f64::NEG_INFINITY, rhs),
                Relation::Ge => (rhs, f64::INFINITY),
                Relation::Eq => (rhs, rhs),
            };
            lo.push(l);
            hi.push(u);
        }
        let mut solver = Self {
            n,
            m,
            cols,
            lo,
            hi,
            cost: vec![0.0; n + m],
            obj_const: 0.0,
            sense: Sense::Minimize,
            objective: LinExpr::zero(),
            head: (n..n + m).collect(),
            state: Vec::with_capacity(n + m),
            x: vec![0.0; n + m],
            binv: Vec::new(),
            since_refactor: 0,
            bland: false,
            degenerate_run: 0,
            iterations: 0,
            max_iterations: 0,
            deadline: None,
        };
        for j in 0..n {
            let s = solver.resting_state(j);
            solver.state.push(s);
            solver.x[j] = solver.resting_value(j, s);
        }
        solver.state.extend(std::iter::repeat_n(State::Basic, m));
        solver.set_objective(problem.sense(), problem.objective());
        Ok(solver)
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn set_objective(&mut self, sense: Sense, objective: &LinExpr) {
        let sign = match sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for &(v, c) in &objective.terms {
            self.cost[v.0] += sign * c;
        }
        self.obj_const = sign * objective.constant;
        self.sense = sense;
        self.objective = objective.clone();
    }

    pub fn bounds(&self, var: VarId) -> (f64, f64) {
        (self.lo[var.0], self.hi[var.0])
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let j = var.0;
        self.lo[j] = lower;
        self.hi[j] = upper;
        if self.state[j] != State::Basic {
            let s = match self.state[j] {
                State::Upper if upper.is_finite() => State::Upper,
                _ => self.resting_state(j),
            };
            self.state[j] = s;
            self.x[j] = self.resting_value(j, s);
        }
    }

    pub fn basis(&self) -> Basis {
        Basis { head: self.head.clone(), state: self.state.clone() }
    }

    /// Restores a basis taken from a solver built on the same problem
    /// structure. Nonbasic values are re-seated on the current bounds.
    pub fn set_basis(&mut self, basis: &Basis) {
        assert_eq!(basis.head.len(), self.m, "basis from a different problem");
        assert_eq!(basis.state.len(), self.n + self.m, "basis from a different problem");
        self.head = basis.head.clone();
        self.state = basis.state.clone();
        for j in 0..self.n + self.m {
            if self.state[j] != State::Basic {
                let s = match self.state[j] {
                    State::Lower if self.lo[j].is_finite() => State::Lower,
                    State::Upper if self.hi[j].is_finite() => State::Upper,
                    _ => self.resting_state(j),
                };
                self.state[j] = s;
                self.x[j] = self.resting_value(j, s);
            }
        }
    }

    fn resting_state(&self, j: usize) -> State {
        if self.lo[j].is_finite() {
            State::Lower
        } else if self.hi[j].is_finite() {
            State::Upper
        } else {
            State::Zero
        }
    }

    fn resting_value(&self, j: usize, s: State) -> f64 {
        match s {
            State::Lower => self.lo[j],
            State::Upper => self.hi[j],
            _ => 0.0,
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lo[j] == self.hi[j]
    }

    /// Solves from the current basis.
    pub fn solve(&mut self, limits: LpLimits) -> LpOutcome {
        let start = Instant::now();
        self.deadline = limits.time_budget.map(|d| start + d);
        self.max_iterations = limits.max_iterations.unwrap_or(10_000 + 50 * (self.n + self.m));
        self.iterations = 0;
        self.bland = false;
        self.degenerate_run = 0;

        if (0..self.n).any(|j| self.lo[j] > self.hi[j]) {
            return self.outcome(LpStatus::Infeasible);
        }
        self.refactor();
        for _attempt in 0..4 {
            if !self.primal_feasible() {
                if self.make_dual_feasible() {
                    match self.dual() {
                        DualEnd::Optimal => {}
                        DualEnd::Infeasible => return self.outcome(LpStatus::Infeasible),
                        DualEnd::Limit => return self.outcome(LpStatus::IterationLimit),
                    }
                } else {
                    match self.primal(Phase::One) {
                        PrimalEnd::Optimal => {}
                        PrimalEnd::Infeasible => return self.outcome(LpStatus::Infeasible),
                        PrimalEnd::Unbounded | PrimalEnd::Limit => return self.outcome(LpStatus::IterationLimit),
                    }
                }
            }
            match self.primal(Phase::Two) {
                PrimalEnd::Optimal => {
                    self.refactor();
                    if self.primal_feasible() {
                        return self.outcome(LpStatus::Optimal);
                    }
                }
                PrimalEnd::Unbounded => return self.outcome(LpStatus::Unbounded),
                PrimalEnd::Limit => return self.outcome(LpStatus::IterationLimit),
                PrimalEnd::Infeasible => unreachable!("phase two never reports infeasibility"),
            }
        }
        self.outcome(LpStatus::IterationLimit)
    }

    fn outcome(&self, status: LpStatus) -> LpOutcome {
        let values = self.x[..self.n].to_vec();
        let objective = self.objective.eval(&values);
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let bound_min = match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => self.dual_bound(),
        };
        LpOutcome { status, values, objective, bound: sign * bound_min, iterations: self.iterations }
    }

    /// Lagrangian lower bound (minimization form) from the current row
    /// multipliers: `c·x = d·x + y·(Ax - r) + y·r` with `Ax - r = 0`, so
    /// minimizing each `d_j x_j` over its box bounds the objective.
    fn dual_bound(&self) -> f64 {
        if self.binv.len() != self.m * self.m {
            return f64::NEG_INFINITY;
        }
        let y = self.row_multipliers(&self.basic_costs());
        let mut total = self.obj_const;
        for j in 0..self.n + self.m {
            let d = self.cost[j] - self.column_dot(j, &y);
            if d > 0.0 {
                if self.lo[j].is_finite() {
                    total += d * self.lo[j];
                } else if d > DUAL_ZERO {
                    return f64::NEG_INFINITY;
                }
            } else if d < 0.0 {
                if self.hi[j].is_finite() {
                    total += d * self.hi[j];
                } else if d < -DUAL_ZERO {
                    return f64::NEG_INFINITY;
                }
            }
        }
        total
    }

    fn check_limits(&self) -> bool {
        if self.iterations >= self.max_iterations {
            return true;
        }
        if self.iterations.is_multiple_of(16) {
            if let Some(deadline) = self.deadline {
                return Instant::now() >= deadline;
            }
        }
        false
    }

    fn primal_feasible(&self) -> bool {
        self.head.iter().all(|&j| self.x[j] >= self.lo[j] - FEASIBILITY_TOL && self.x[j] <= self.hi[j] + FEASIBILITY_TOL)
    }

    // ---- linear algebra --------------------------------------------------

    fn column_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(i, a)| a * y[i]).sum()
        } else {
            -y[j - self.n]
        }
    }

    fn basic_costs(&self) -> Vec<f64> {
        self.head.iter().map(|&j| self.cost[j]).collect()
    }

    /// `y = c_B B^{-1}`.
    fn row_multipliers(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &c) in cb.iter().enumerate() {
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, b) in y.iter_mut().zip(row) {
                    *yi += c * b;
                }
            }
        }
        y
    }

    /// `B^{-1} A_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        if j < self.n {
            for &(i, a) in &self.cols[j] {
                for (r, al) in alpha.iter_mut().enumerate() {
                    *al += a * self.binv[r * m + i];
                }
            }
        } else {
            let i = j - self.n;
            for (r, al) in alpha.iter_mut().enumerate() {
                *al = -self.binv[r * m + i];
            }
        }
        alpha
    }

    fn refactor(&mut self) {
        let m = self.m;
        loop {
            let mut a = vec![0.0; m * m];
            for (k, &j) in self.head.iter().enumerate() {
                if j < self.n {
                    for &(i, v) in &self.cols[j] {
                        a[i * m + k] = v;
                    }
                } else {
                    a[(j - self.n) * m + k] = -1.0;
                }
            }
            match invert(a, m) {
                Ok(binv) => {
                    self.binv = binv;
                    break;
                }
                Err((deficient, free_rows)) => {
                    for (k, row) in deficient.into_iter().zip(free_rows) {
                        let old = self.head[k];
                        let s = if self.lo[old].is_finite()
                            && (!self.hi[old].is_finite() || (self.x[old] - self.lo[old]).abs() <= (self.hi[old] - self.x[old]).abs())
                        {
                            State::Lower
                        } else if self.hi[old].is_finite() {
                            State::Upper
                        } else {
                            State::Zero
                        };
                        self.state[old] = s;
                        self.x[old] = self.resting_value(old, s);
                        self.head[k] = self.n + row;
                        self.state[self.n + row] = State::Basic;
                    }
                }
            }
        }
        self.recompute_basics();
        self.since_refactor = 0;
    }

    /// `x_B = -B^{-1} N x_N`.
    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.n + self.m {
            if self.state[j] == State::Basic || self.x[j] == 0.0 {
                continue;
            }
            if j < self.n {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * self.x[j];
                }
            } else {
                rhs[j - self.n] += self.x[j];
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.x[self.head[r]] = row.iter().zip(&rhs).map(|(b, v)| b * v).sum();
        }
    }

    /// Replace basic variable in row `r` by `q`, whose updated column is `alpha`.
    fn update_inverse(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        for v in &mut self.binv[r * m..(r + 1) * m] {
            *v /= piv;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for (i, row) in before.chunks_mut(m).chain(after.chunks_mut(m)).enumerate() {
            let idx = if i < r { i } else { i + 1 };
            let f = alpha[idx];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * p;
                }
            }
        }
        self.since_refactor += 1;
    }

    fn note_step(&mut self, step: f64) {
        if step.abs() < 1e-12 {
            self.degenerate_run += 1;
            if self.degenerate_run >= DEGENERATE_RUN {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }
    }

    // ---- primal simplex --------------------------------------------------

    fn primal(&mut self, phase: Phase) -> PrimalEnd {
        let phase_one = matches!(phase, Phase::One);
        loop {
            if self.check_limits() {
                return PrimalEnd::Limit;
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let cb: Vec<f64> = if phase_one {
                self.head
                    .iter()
                    .map(|&j| {
                        if self.x[j] < self.lo[j] - FEASIBILITY_TOL {
                            -1.0
                        } else if self.x[j] > self.hi[j] + FEASIBILITY_TOL {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            } else {
                self.basic_costs()
            };
            if phase_one && cb.iter().all(|&c| c == 0.0) {
                return PrimalEnd::Optimal;
            }
            let y = self.row_multipliers(&cb);

            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.n + self.m {
                let s = self.state[j];
                if s == State::Basic || self.is_fixed(j) {
                    continue;
                }
                let c = if phase_one { 0.0 } else { self.cost[j] };
                let d = c - self.column_dot(j, &y);
                let dir = match s {
                    State::Lower if d < -OPTIMALITY_TOL => 1.0,
                    State::Upper if d > OPTIMALITY_TOL => -1.0,
                    State::Zero if d.abs() > OPTIMALITY_TOL => -d.signum(),
                    _ => continue,
                };
                if self.bland {
                    entering = Some((j, dir, d.abs()));
                    break;
                }
                if entering.is_none_or(|(_, _, best)| d.abs() > best) {
                    entering = Some((j, dir, d.abs()));
                }
            }
            let Some((q, dir, _)) = entering else {
                return if phase_one { PrimalEnd::Infeasible } else { PrimalEnd::Optimal };
            };

            let alpha = self.ftran(q);
            let leave = self.primal_ratio(&alpha, dir, phase_one);
            let flip = if self.lo[q].is_finite() && self.hi[q].is_finite() {
                self.hi[q] - self.lo[q]
            } else {
                f64::INFINITY
            };
            self.iterations += 1;
            match leave {
                Some((r, theta, to_upper)) if theta < flip => {
                    for (i, &a) in alpha.iter().enumerate() {
                        self.x[self.head[i]] -= dir * a * theta;
                    }
                    self.x[q] += dir * theta;
                    let p = self.head[r];
                    let s = if to_upper && !self.is_fixed(p) { State::Upper } else { State::Lower };
                    self.x[p] = if to_upper { self.hi[p] } else { self.lo[p] };
                    self.state[p] = s;
                    self.head[r] = q;
                    self.state[q] = State::Basic;
                    self.update_inverse(r, &alpha);
                    self.note_step(theta);
                }
                _ if flip.is_finite() => {
                    for (i, &a) in alpha.iter().enumerate() {
                        self.x[self.head[i]] -= dir * a * flip;
                    }
                    if dir > 0.0 {
                        self.state[q] = State::Upper;
                        self.x[q] = self.hi[q];
                    } else {
                        self.state[q] = State::Lower;
                        self.x[q] = self.lo[q];
                    }
                    self.note_step(flip);
                }
                _ => {
                    if phase_one {
                        // an improving ray in phase one means the infeasibility
                        // costs are stale; rebuild and retry
                        self.refactor();
                        continue;
                    }
                    return PrimalEnd::Unbounded;
                }
            }
        }
    }

    /// Harris two-pass ratio test. Returns `(row, step, leaves_at_upper)`.
    fn primal_ratio(&self, alpha: &[f64], dir: f64, phase_one: bool) -> Option<(usize, f64, bool)> {
        // candidate: (row, relaxed step, exact step, |rate|, leaves_at_upper)
        let mut cands: Vec<(usize, f64, f64, f64, bool)> = Vec::new();
        for (r, &a) in alpha.iter().enumerate() {
            let rate = -dir * a;
            if rate.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.head[r];
            let (v, l, u) = (self.x[j], self.lo[j], self.hi[j]);
            if rate > 0.0 {
                if phase_one && v < l - FEASIBILITY_TOL {
                    let t = (l - v) / rate;
                    cands.push((r, t, t, rate, false));
                } else if u.is_finite() && !(phase_one && v > u + FEASIBILITY_TOL) {
                    cands.push((r, (u + FEASIBILITY_TOL - v) / rate, ((u - v) / rate).max(0.0), rate, true));
                }
            } else if phase_one && v > u + FEASIBILITY_TOL {
                let t = (u - v) / rate;
                cands.push((r, t, t, -rate, true));
            } else if l.is_finite() && !(phase_one && v < l - FEASIBILITY_TOL) {
                cands.push((r, (l - FEASIBILITY_TOL - v) / rate, ((l - v) / rate).max(0.0), -rate, false));
            }
        }
        if cands.is_empty() {
            return None;
        }
        if self.bland {
            let best = cands
                .iter()
                .min_by(|a, b| a.2.total_cmp(&b.2).then(self.head[a.0].cmp(&self.head[b.0])))
                .unwrap();
            return Some((best.0, best.2, best.4));
        }
        let bound = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let best = cands
            .iter()
            .filter(|c| c.2 <= bound)
            .max_by(|a, b| a.3.total_cmp(&b.3).then(b.0.cmp(&a.0)))
            .unwrap_or_else(|| cands.iter().min_by(|a, b| a.2.total_cmp(&b.2)).unwrap());
        Some((best.0, best.2, best.4))
    }

    // ---- dual simplex ----------------------------------------------------

    /// Moves boxed nonbasic variables to the bound matching the sign of their
    /// reduced cost. Returns whether the basis is now dual feasible.
    fn make_dual_feasible(&mut self) -> bool {
        let y = self.row_multipliers(&self.basic_costs());
        let mut feasible = true;
        let mut moved = false;
        for j in 0..self.n + self.m {
            let s = self.state[j];
            if s == State::Basic || self.is_fixed(j) {
                continue;
            }
            let d = self.cost[j] - self.column_dot(j, &y);
            let wrong = match s {
                State::Lower => d < -OPTIMALITY_TOL,
                State::Upper => d > OPTIMALITY_TOL,
                _ => d.abs() > OPTIMALITY_TOL,
            };
            if !wrong {
                continue;
            }
            if d > 0.0 && self.lo[j].is_finite() {
                self.state[j] = State::Lower;
                self.x[j] = self.lo[j];
                moved = true;
            } else if d < 0.0 && self.hi[j].is_finite() {
                self.state[j] = State::Upper;
                self.x[j] = self.hi[j];
                moved = true;
            } else {
                feasible = false;
            }
        }
        if moved {
            self.recompute_basics();
        }
        feasible
    }

    fn dual(&mut self) -> DualEnd {
        let m = self.m;
        loop {
            if self.check_limits() {
                return DualEnd::Limit;
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let mut leaving: Option<(usize, f64)> = None;
            for (r, &j) in self.head.iter().enumerate() {
                let viol = (self.lo[j] - self.x[j]).max(self.x[j] - self.hi[j]);
                if viol <= FEASIBILITY_TOL {
                    continue;
                }
                let better = match leaving {
                    None => true,
                    Some((best_r, best_v)) => {
                        if self.bland {
                            j < self.head[best_r]
                        } else {
                            viol > best_v
                        }
                    }
                };
                if better {
                    leaving = Some((r, viol));
                }
            }
            let Some((r, _)) = leaving else {
                return DualEnd::Optimal;
            };
            let p = self.head[r];
            let increase = self.x[p] < self.lo[p];
            let target = if increase { self.lo[p] } else { self.hi[p] };

            let y = self.row_multipliers(&self.basic_costs());
            let pivot_row = &self.binv[r * m..(r + 1) * m];
            // candidate: (var, relaxed ratio, exact ratio, |a_rj|)
            let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
            for j in 0..self.n + self.m {
                let s = self.state[j];
                if s == State::Basic || self.is_fixed(j) {
                    continue;
                }
                let a = self.column_dot(j, pivot_row);
                let eligible = match (s, increase) {
                    (State::Lower, true) => a < -PIVOT_TOL,
                    (State::Upper, true) => a > PIVOT_TOL,
                    (State::Lower, false) => a > PIVOT_TOL,
                    (State::Upper, false) => a < -PIVOT_TOL,
                    (State::Zero, _) => a.abs() > PIVOT_TOL,
                    (State::Basic, _) => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.cost[j] - self.column_dot(j, &y);
                let d_abs = match s {
                    State::Lower => d.max(0.0),
                    State::Upper => (-d).max(0.0),
                    _ => d.abs(),
                };
                cands.push((j, (d_abs + OPTIMALITY_TOL) / a.abs(), d_abs / a.abs(), a.abs()));
            }
            if cands.is_empty() {
                return DualEnd::Infeasible;
            }
            let q = if self.bland {
                cands.iter().min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0))).unwrap().0
            } else {
                let bound = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.2 <= bound)
                    .max_by(|a, b| a.3.total_cmp(&b.3).then(b.0.cmp(&a.0)))
                    .unwrap()
                    .0
            };
            let ratio = cands.iter().find(|c| c.0 == q).unwrap().2;

            let alpha = self.ftran(q);
            if alpha[r].abs() <= PIVOT_TOL {
                // row and column disagree numerically; refresh the inverse
                self.refactor();
                self.iterations += 1;
                continue;
            }
            let t = (self.x[p] - target) / alpha[r];
            for (i, &a) in alpha.iter().enumerate() {
                self.x[self.head[i]] -= a * t;
            }
            self.x[q] += t;
            self.x[p] = target;
            self.state[p] = if increase || self.is_fixed(p) { State::Lower } else { State::Upper };
            self.head[r] = q;
            self.state[q] = State::Basic;
            self.update_inverse(r, &alpha);
            self.iterations += 1;
            self.note_step(ratio);
        }
    }
}

/// Gauss-Jordan inversion without row swaps. On failure returns the
/// deficient basis positions and an equal number of rows left without a
/// pivot, so the caller can patch in logical columns.
#[allow(clippy::type_complexity)]
fn invert(mut a: Vec<f64>, m: usize) -> std::result::Result<Vec<f64>, (Vec<usize>, Vec<usize>)> {
    let mut e = vec![0.0; m * m];
    for i in 0..m {
        e[i * m + i] = 1.0;
    }
    let mut used = vec![false; m];
    let mut pivot_of = vec![usize::MAX; m];
    let mut deficient = Vec::new();
    for k in 0..m {
        let mut p = usize::MAX;
        let mut best = SINGULAR_TOL;
        for i in 0..m {
            if !used[i] && a[i * m + k].abs() > best {
                best = a[i * m + k].abs();
                p = i;
            }
        }
        if p == usize::MAX {
            deficient.push(k);
            continue;
        }
        used[p] = true;
        pivot_of[k] = p;
        let inv = 1.0 / a[p * m + k];
        for c in 0..m {
            a[p * m + c] *= inv;
            e[p * m + c] *= inv;
        }
        let prow_a: Vec<f64> = a[p * m..(p + 1) * m].to_vec();
        let prow_e: Vec<f64> = e[p * m..(p + 1) * m].to_vec();
        for i in 0..m {
            if i == p {
                continue;
            }
            let f = a[i * m + k];
            if f == 0.0 {
                continue;
            }
            for c in 0..m {
                a[i * m + c] -= f * prow_a[c];
                e[i * m + c] -= f * prow_e[c];
            }
        }
    }
    if !deficient.is_empty() {
        let free: Vec<usize> = (0..m).filter(|&i| !used[i]).collect();
        return Err((deficient, free));
    }
    let mut binv = vec![0.0; m * m];
    for k in 0..m {
        let p = pivot_of[k];
        binv[k * m..(k + 1) * m].copy_from_slice(&e[p * m..(p + 1) * m]);
    }
    Ok(binv)
}
