//! Per-neuron interval bounds and the presolve that computes them.
//!
//! Three procedures of increasing cost are available: interval arithmetic
//! over the current variable bounds (`Ia`), the LP relaxation of the model
//! built so far (`Lp`), and the exact MILP of that model (`Full`).
//! Progressive tightening runs them cheapest first and stops as soon as a
//! ReLU's phase is settled, or drops max-pool inputs that can no longer be
//! the maximum.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::{debug, warn};

use crate::encoder::{walk, BoundOracle, ModelBuilder};
use crate::error::{Error, Result};
use crate::lp::{LinExpr, LpLimits, LpSolver, LpStatus, Sense};
use crate::milp::{solve_milp, MilpLimits, MilpModel, MilpStatus};
use crate::network::{Affine, LoweredNet, Network};

/// Relative widening applied to bounds that come out of a solver.
pub const SOLVER_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn point(v: f64) -> Self {
        Self { lower: v, upper: v }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }

    /// Componentwise best of two valid intervals for the same quantity.
    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::new(self.lower.max(other.lower), self.upper.min(other.upper))
    }

    pub fn relu(&self) -> Interval {
        Interval::new(self.lower.max(0.0), self.upper.max(0.0))
    }

    /// `[-M, M]` with `M = max(-l, u)`.
    pub fn symmetric(&self) -> Interval {
        let m = (-self.lower).max(self.upper);
        Interval::new(-m, m)
    }

}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReluStatus {
    StablyActive,
    StablyInactive,
    Unstable,
}

impl ReluStatus {
    /// `u ≤ 0` is inactive (checked first, so `[0, 0]` is inactive);
    /// `l ≥ 0` is active.
    pub fn classify(iv: &Interval) -> Self {
        if iv.upper <= 0.0 {
            ReluStatus::StablyInactive
        } else if iv.lower >= 0.0 {
            ReluStatus::StablyActive
        } else {
            ReluStatus::Unstable
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    InputDomain,
    Ia,
    Lp,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Procedure {
    Ia,
    Lp,
    Full,
}

impl Procedure {
    fn provenance(self) -> Provenance {
        match self {
            Procedure::Ia => Provenance::Ia,
            Procedure::Lp => Provenance::Lp,
            Procedure::Full => Provenance::Full,
        }
    }
}

impl std::str::FromStr for Procedure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ia" => Ok(Procedure::Ia),
            "lp" => Ok(Procedure::Lp),
            "full" => Ok(Procedure::Full),
            other => Err(Error::InvalidArgument(format!("unknown bound procedure {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsConfig {
    /// Most expensive procedure to use.
    pub max_effort: Procedure,
    /// Cheap-first with early returns. When off, every procedure up to
    /// `max_effort` runs for both bounds of every neuron.
    pub progressive: bool,
    /// Replace `l, u` by `-M, M` in the ReLU big-M constraints.
    pub symmetric_big_m: bool,
    /// Per-solve wall-clock budget for `Full`, in seconds.
    pub full_time_budget_s: f64,
    pub full_node_limit: Option<usize>,
    pub lp_iteration_limit: Option<usize>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            max_effort: Procedure::Lp,
            progressive: true,
            symmetric_big_m: false,
            full_time_budget_s: 5.0,
            full_node_limit: None,
            lp_iteration_limit: None,
        }
    }
}

impl BoundsConfig {
    fn procedures(&self) -> Vec<Procedure> {
        [Procedure::Ia, Procedure::Lp, Procedure::Full].into_iter().filter(|p| *p <= self.max_effort).collect()
    }
}

/// Axis-aligned box of admissible inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InputDomain {
    /// The whole valid input domain `[0, 1]^m`.
    pub fn unit(m: usize) -> Self {
        Self { lower: vec![0.0; m], upper: vec![1.0; m] }
    }

    /// `{x' : |x' - x|∞ ≤ eps} ∩ [0, 1]^m`.
    pub fn linf_ball(x: &[f64], eps: f64) -> Self {
        Self {
            lower: x.iter().map(|v| (v - eps).max(0.0)).collect(),
            upper: x.iter().map(|v| (v + eps).min(1.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.len() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn contains_domain(&self, other: &InputDomain) -> bool {
        other.len() == self.len()
            && (0..self.len()).all(|i| self.lower[i] <= other.lower[i] && other.upper[i] <= self.upper[i])
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    fn digest(&self) -> String {
        let mut h = Sha256::new();
        for v in self.lower.iter().chain(&self.upper) {
            h.update(v.to_le_bytes());
        }
        hex::encode(&h.finalize()[..12])
    }
}

/// Bounds recorded by each procedure for one neuron. A side a procedure did
/// not compute is left infinite.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcedureBounds {
    pub ia: Option<Interval>,
    pub lp: Option<Interval>,
    pub full: Option<Interval>,
}

impl ProcedureBounds {
    fn slot(&mut self, p: Procedure) -> &mut Option<Interval> {
        match p {
            Procedure::Ia => &mut self.ia,
            Procedure::Lp => &mut self.lp,
            Procedure::Full => &mut self.full,
        }
    }

    fn record(&mut self, p: Procedure, upper: bool, v: f64) {
        let slot = self.slot(p).get_or_insert(Interval::new(f64::NEG_INFINITY, f64::INFINITY));
        if upper {
            slot.upper = v;
        } else {
            slot.lower = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Affine,
    Relu,
    Max,
    Residual,
}

/// Bounds for one entry of the network trace (see
/// [`LoweredNet::trace`]): affine and residual entries describe outputs,
/// ReLU and max entries describe their inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerBounds {
    pub kind: LayerKind,
    pub intervals: Vec<Interval>,
    /// Procedure that produced each `[lower, upper]`.
    pub provenance: Vec<[Provenance; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relu_status: Vec<ReluStatus>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub max_survivors: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub by_procedure: Vec<ProcedureBounds>,
}

impl LayerBounds {
    /// Post-activation intervals of a ReLU entry.
    pub fn relu_outputs(&self) -> Vec<Interval> {
        self.intervals.iter().map(Interval::relu).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityCounts {
    pub stably_active: usize,
    pub stably_inactive: usize,
    pub unstable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedGraph {
    pub domain: InputDomain,
    pub config: BoundsConfig,
    pub layers: Vec<LayerBounds>,
    pub logits: Vec<Interval>,
    pub logit_provenance: Vec<[Provenance; 2]>,
    pub lp_solves: usize,
    pub full_solves: usize,
}

impl BoundedGraph {
    pub fn stability(&self) -> StabilityCounts {
        let mut c = StabilityCounts::default();
        for l in &self.layers {
            for s in &l.relu_status {
                match s {
                    ReluStatus::StablyActive => c.stably_active += 1,
                    ReluStatus::StablyInactive => c.stably_inactive += 1,
                    ReluStatus::Unstable => c.unstable += 1,
                }
            }
        }
        c
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }
}

/// Interval arithmetic for an affine map:
/// `lower = W⁻u + W⁺l + b`, `upper = W⁺u + W⁻l + b`.
pub fn ia_bounds(affine: &Affine, inputs: &[Interval]) -> Vec<Interval> {
    affine
        .rows
        .iter()
        .zip(&affine.bias)
        .map(|(row, &b)| {
            let (mut lo, mut hi) = (b, b);
            for &(j, w) in row {
                let iv = inputs[j];
                if w > 0.0 {
                    lo += w * iv.lower;
                    hi += w * iv.upper;
                } else if w < 0.0 {
                    lo += w * iv.upper;
                    hi += w * iv.lower;
                }
            }
            Interval::new(lo, hi)
        })
        .collect()
}

/// Indices that can attain the maximum: input `i` is dropped when its upper
/// bound is below the largest lower bound.
pub fn max_survivors(intervals: &[Interval]) -> Vec<usize> {
    let l_max = intervals.iter().map(|iv| iv.lower).fold(f64::NEG_INFINITY, f64::max);
    (0..intervals.len()).filter(|&i| intervals[i].upper >= l_max).collect()
}

/// Runs bound procedures against a partially built model.
pub struct Tightener<'a> {
    builder: &'a ModelBuilder,
    config: &'a BoundsConfig,
    solver: Option<LpSolver>,
    pub lp_solves: usize,
    pub full_solves: usize,
}

/// Result of tightening one neuron.
#[derive(Debug, Clone, Copy)]
pub struct Tightened {
    pub interval: Interval,
    pub provenance: [Provenance; 2],
    pub by_procedure: ProcedureBounds,
}

impl Tightened {
    fn start() -> Self {
        Self {
            interval: Interval::new(f64::NEG_INFINITY, f64::INFINITY),
            provenance: [Provenance::Ia; 2],
            by_procedure: ProcedureBounds::default(),
        }
    }

    fn update(&mut self, p: Procedure, upper: bool, v: f64) {
        self.by_procedure.record(p, upper, v);
        if upper && v < self.interval.upper {
            self.interval.upper = v;
            self.provenance[1] = p.provenance();
        } else if !upper && v > self.interval.lower {
            self.interval.lower = v;
            self.provenance[0] = p.provenance();
        }
    }
}

impl<'a> Tightener<'a> {
    pub fn new(builder: &'a ModelBuilder, config: &'a BoundsConfig) -> Self {
        Self { builder, config, solver: None, lp_solves: 0, full_solves: 0 }
    }

    fn procedures_for(&self, e: &LinExpr) -> Vec<Procedure> {
        if self.builder.is_input_only(e) {
            // exact over a box; solvers cannot do better
            vec![Procedure::Ia]
        } else {
            self.config.procedures()
        }
    }

    /// One side of the bound on `e` from procedure `p`, already widened.
    pub fn bound(&mut self, p: Procedure, e: &LinExpr, upper: bool) -> Result<f64> {
        if e.is_constant() {
            return Ok(e.constant);
        }
        let pick = |iv: Interval| if upper { iv.upper } else { iv.lower };
        match p {
            Procedure::Ia => Ok(pick(self.builder.interval_of(e))),
            Procedure::Lp => {
                let problem = self.builder.problem();
                let solver = match &mut self.solver {
                    Some(s) => s,
                    None => self.solver.insert(LpSolver::new(problem)?),
                };
                let sense = if upper { Sense::Maximize } else { Sense::Minimize };
                solver.set_objective(sense, e);
                let out = solver.solve(LpLimits { max_iterations: self.config.lp_iteration_limit, time_budget: None });
                self.lp_solves += 1;
                match out.status {
                    LpStatus::Optimal | LpStatus::IterationLimit => {}
                    LpStatus::Infeasible => {
                        return Err(Error::InconsistentBounds("LP relaxation of the partial model is infeasible".into()))
                    }
                    LpStatus::Unbounded => return Err(Error::UnboundedRelaxation),
                }
                let b = if out.bound.is_nan() { if upper { f64::INFINITY } else { f64::NEG_INFINITY } } else { out.bound };
                Ok(guard(b, upper))
            }
            Procedure::Full => {
                let mut lp = self.builder.problem().clone();
                lp.set_objective(if upper { Sense::Maximize } else { Sense::Minimize }, e.clone());
                let model = MilpModel::new(lp, self.builder.binaries().to_vec())?;
                let limits = MilpLimits {
                    time_budget: Some(Duration::from_secs_f64(self.config.full_time_budget_s)),
                    node_limit: self.config.full_node_limit,
                    ..Default::default()
                };
                let out = solve_milp(&model, limits)?;
                self.full_solves += 1;
                if out.status == MilpStatus::Infeasible {
                    return Err(Error::InconsistentBounds("partial model is infeasible".into()));
                }
                Ok(guard(out.best_bound, upper))
            }
        }
    }

    /// Bounds for a ReLU input, following the early-return rules.
    pub fn tighten_relu(&mut self, e: &LinExpr) -> Result<(Tightened, ReluStatus)> {
        let mut t = Tightened::start();
        let progressive = self.config.progressive;
        for p in self.procedures_for(e) {
            let u = self.bound(p, e, true)?;
            t.update(p, true, u);
            if progressive && t.interval.upper <= 0.0 && p != Procedure::Ia {
                break;
            }
            let l = self.bound(p, e, false)?;
            t.update(p, false, l);
            if progressive && (t.interval.upper <= 0.0 || t.interval.lower >= 0.0) {
                break;
            }
        }
        let status = ReluStatus::classify(&t.interval);
        Ok((t, status))
    }

    /// Best bounds from every procedure, both sides.
    pub fn tighten_all(&mut self, e: &LinExpr) -> Result<Tightened> {
        let mut t = Tightened::start();
        for p in self.procedures_for(e) {
            let u = self.bound(p, e, true)?;
            t.update(p, true, u);
            let l = self.bound(p, e, false)?;
            t.update(p, false, l);
        }
        Ok(t)
    }

    /// Bounds for the inputs of `y = max(xs)`; returns the inputs that can
    /// still attain the maximum and the best bounds for every input.
    pub fn tighten_max(&mut self, xs: &[LinExpr], initial: Option<&[Interval]>) -> Result<(Vec<usize>, Vec<Interval>)> {
        let mut state: Vec<Tightened> = xs.iter().map(|_| Tightened::start()).collect();
        if let Some(init) = initial {
            for (s, iv) in state.iter_mut().zip(init) {
                s.interval = *iv;
            }
        }
        let groups = vec![(0..xs.len()).collect::<Vec<_>>()];
        let survivors = self.tighten_groups(xs, &groups, &mut state)?;
        Ok((survivors.into_iter().next().unwrap(), state.iter().map(|s| s.interval).collect()))
    }

    /// GetBoundsForMax over possibly overlapping groups sharing one bound
    /// table.
    fn tighten_groups(&mut self, xs: &[LinExpr], groups: &[Vec<usize>], state: &mut [Tightened]) -> Result<Vec<Vec<usize>>> {
        let mut done: Vec<Vec<Procedure>> = vec![Vec::new(); xs.len()];
        let all = self.config.procedures();
        for &p in &all {
            for g in groups {
                let mut l_max = g.iter().map(|&i| state[i].interval.lower).fold(f64::NEG_INFINITY, f64::max);
                for &i in g {
                    if !self.procedures_for(&xs[i]).contains(&p) || done[i].contains(&p) {
                        continue;
                    }
                    if self.config.progressive && state[i].interval.upper < l_max {
                        continue;
                    }
                    let u = self.bound(p, &xs[i], true)?;
                    state[i].update(p, true, u);
                    let l = self.bound(p, &xs[i], false)?;
                    state[i].update(p, false, l);
                    done[i].push(p);
                    l_max = l_max.max(state[i].interval.lower);
                }
            }
        }
        Ok(groups
            .iter()
            .map(|g| {
                let ivs: Vec<Interval> = g.iter().map(|&i| state[i].interval).collect();
                max_survivors(&ivs).into_iter().map(|k| g[k]).collect()
            })
            .collect())
    }
}

/// Moves a solver bound outward so solver tolerances cannot make it unsound.
fn guard(v: f64, upper: bool) -> f64 {
    let slack = SOLVER_GUARD * (1.0 + v.abs());
    if upper {
        v + slack
    } else {
        v - slack
    }
}

struct Compute<'c> {
    config: &'c BoundsConfig,
    layers: Vec<LayerBounds>,
    lp_solves: usize,
    full_solves: usize,
}

impl Compute<'_> {
    fn ia_layer(kind: LayerKind, b: &ModelBuilder, out: &[LinExpr]) -> LayerBounds {
        LayerBounds {
            kind,
            intervals: out.iter().map(|e| b.interval_of(e)).collect(),
            provenance: vec![[Provenance::Ia; 2]; out.len()],
            relu_status: Vec::new(),
            max_survivors: Vec::new(),
            by_procedure: Vec::new(),
        }
    }

    fn absorb(&mut self, t: &Tightener) {
        self.lp_solves += t.lp_solves;
        self.full_solves += t.full_solves;
    }
}

impl BoundOracle for Compute<'_> {
    fn affine(&mut self, b: &ModelBuilder, out: &[LinExpr]) -> Result<()> {
        self.layers.push(Self::ia_layer(LayerKind::Affine, b, out));
        Ok(())
    }

    fn residual(&mut self, b: &ModelBuilder, out: &[LinExpr]) -> Result<()> {
        self.layers.push(Self::ia_layer(LayerKind::Residual, b, out));
        Ok(())
    }

    fn relu(&mut self, b: &ModelBuilder, pre: &[LinExpr]) -> Result<Vec<(Interval, ReluStatus)>> {
        let mut t = Tightener::new(b, self.config);
        let mut layer = LayerBounds {
            kind: LayerKind::Relu,
            intervals: Vec::with_capacity(pre.len()),
            provenance: Vec::with_capacity(pre.len()),
            relu_status: Vec::with_capacity(pre.len()),
            max_survivors: Vec::new(),
            by_procedure: Vec::with_capacity(pre.len()),
        };
        for e in pre {
            let (r, status) = t.tighten_relu(e)?;
            layer.intervals.push(r.interval);
            layer.provenance.push(r.provenance);
            layer.relu_status.push(status);
            layer.by_procedure.push(r.by_procedure);
        }
        self.absorb(&t);
        let out = layer.intervals.iter().copied().zip(layer.relu_status.iter().copied()).collect();
        debug!(neurons = pre.len(), lp = t.lp_solves, "relu layer bounded");
        self.layers.push(layer);
        Ok(out)
    }

    fn max(&mut self, b: &ModelBuilder, inputs: &[LinExpr], groups: &[Vec<usize>]) -> Result<(Vec<Interval>, Vec<Vec<usize>>)> {
        let mut t = Tightener::new(b, self.config);
        let mut state: Vec<Tightened> = inputs.iter().map(|_| Tightened::start()).collect();
        let survivors = t.tighten_groups(inputs, groups, &mut state)?;
        self.absorb(&t);
        let intervals: Vec<Interval> = state.iter().map(|s| s.interval).collect();
        self.layers.push(LayerBounds {
            kind: LayerKind::Max,
            intervals: intervals.clone(),
            provenance: state.iter().map(|s| s.provenance).collect(),
            relu_status: Vec::new(),
            max_survivors: survivors.clone(),
            by_procedure: state.iter().map(|s| s.by_procedure).collect(),
        });
        Ok((intervals, survivors))
    }
}

/// Bounds every neuron of `net` over `domain`.
pub fn build_bounded_graph(net: &LoweredNet, domain: &InputDomain, config: &BoundsConfig) -> Result<BoundedGraph> {
    if domain.len() != net.input_dim {
        return Err(Error::Shape(format!("domain has {} coordinates, network expects {}", domain.len(), net.input_dim)));
    }
    if (0..domain.len()).any(|i| !(domain.lower[i] <= domain.upper[i]) || !domain.lower[i].is_finite() || !domain.upper[i].is_finite()) {
        return Err(Error::InvalidArgument("input domain must be a finite non-empty box".into()));
    }
    let mut builder = ModelBuilder::new(domain, config.symmetric_big_m);
    let mut oracle = Compute { config, layers: Vec::new(), lp_solves: 0, full_solves: 0 };
    let inputs = builder.input_exprs();
    let logits = walk(&mut builder, &net.ops, inputs, &mut oracle)?;
    let mut t = Tightener::new(&builder, config);
    let mut logit_iv = Vec::with_capacity(logits.len());
    let mut logit_prov = Vec::with_capacity(logits.len());
    for e in &logits {
        let r = t.tighten_all(e)?;
        logit_iv.push(r.interval);
        logit_prov.push(r.provenance);
    }
    oracle.absorb(&t);
    Ok(BoundedGraph {
        domain: domain.clone(),
        config: config.clone(),
        layers: oracle.layers,
        logits: logit_iv,
        logit_provenance: logit_prov,
        lp_solves: oracle.lp_solves,
        full_solves: oracle.full_solves,
    })
}

/// Hex SHA-256 of the network's canonical JSON.
pub fn network_hash(net: &Network) -> String {
    hex::encode(Sha256::digest(net.to_json().as_bytes()))
}

/// Memoizes graphs by (network, domain, configuration), optionally
/// persisting them as JSON files under a directory.
#[derive(Debug, Default)]
pub struct BoundsCache {
    memory: Mutex<HashMap<String, Arc<BoundedGraph>>>,
    dir: Option<PathBuf>,
}

impl BoundsCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { memory: Mutex::new(HashMap::new()), dir }
    }

    fn key(net_hash: &str, domain: &InputDomain, config: &BoundsConfig) -> String {
        let cfg = serde_json::to_string(config).expect("config serializes");
        let cfg = hex::encode(&Sha256::digest(cfg.as_bytes())[..8]);
        format!("{}-{}-{}", &net_hash[..net_hash.len().min(16)], domain.digest(), cfg)
    }

    pub fn get_or_build(&self, net_hash: &str, net: &LoweredNet, domain: &InputDomain, config: &BoundsConfig) -> Result<Arc<BoundedGraph>> {
        let key = Self::key(net_hash, domain, config);
        if let Some(g) = self.memory.lock().expect("cache lock").get(&key) {
            return Ok(g.clone());
        }
        let path = self.dir.as_ref().map(|d| d.join(format!("{key}.json")));
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            match std::fs::read(p).map_err(Error::from).and_then(|b| serde_json::from_slice::<BoundedGraph>(&b).map_err(Error::from)) {
                Ok(g) if g.domain == *domain && g.config == *config => {
                    let g = Arc::new(g);
                    self.memory.lock().expect("cache lock").insert(key, g.clone());
                    return Ok(g);
                }
                Ok(_) => warn!(path = %p.display(), "cached bounds do not match; rebuilding"),
                Err(e) => warn!(path = %p.display(), error = %e, "unreadable cached bounds; rebuilding"),
            }
        }
        let g = Arc::new(build_bounded_graph(net, domain, config)?);
        if let Some(p) = path {
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&p, g.to_json())?;
        }
        // another worker may have raced us; keep whichever landed first
        let mut mem = self.memory.lock().expect("cache lock");
        Ok(mem.entry(key).or_insert(g).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Layer, Network};

    #[test]
    fn ia_examples() {
        let a = Affine { rows: vec![vec![(0, 1.0), (1, -1.0)]], bias: vec![0.0], in_dim: 2 };
        let unit = [Interval::new(0.0, 1.0); 2];
        assert_eq!(ia_bounds(&a, &unit), vec![Interval::new(-1.0, 1.0)]);
        let id = Affine { rows: vec![vec![(0, 1.0)], vec![(1, 1.0)]], bias: vec![0.0, 0.0], in_dim: 2 };
        let ivs = [Interval::new(-0.5, 2.0), Interval::new(3.0, 4.0)];
        assert_eq!(ia_bounds(&id, &ivs), ivs.to_vec());
        let konst = Affine { rows: vec![vec![]], bias: vec![1.5], in_dim: 2 };
        assert_eq!(ia_bounds(&konst, &ivs), vec![Interval::point(1.5)]);
    }

    #[test]
    fn max_survivor_examples() {
        let ivs = [Interval::new(0.0, 1.0), Interval::new(2.0, 3.0), Interval::new(-1.0, 0.5)];
        assert_eq!(max_survivors(&ivs), vec![1]);
        assert_eq!(max_survivors(&[Interval::new(0.0, 1.0); 4]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn status_tie_rules() {
        assert_eq!(ReluStatus::classify(&Interval::new(-1.0, 0.0)), ReluStatus::StablyInactive);
        assert_eq!(ReluStatus::classify(&Interval::new(0.0, 1.0)), ReluStatus::StablyActive);
        assert_eq!(ReluStatus::classify(&Interval::point(0.0)), ReluStatus::StablyInactive);
        assert_eq!(ReluStatus::classify(&Interval::new(-1.0, 1.0)), ReluStatus::Unstable);
    }

    fn hidden_layer_net(w1: Vec<Vec<f64>>, b1: Vec<f64>, w2: Vec<Vec<f64>>, b2: Vec<f64>) -> LoweredNet {
        let inputs = w1[0].len();
        Network::new(
            vec![inputs],
            vec![
                Layer::FullyConnected { weights: w1, bias: b1 },
                Layer::Relu,
                Layer::FullyConnected { weights: w2, bias: b2 },
                Layer::Relu,
                Layer::FullyConnected { weights: vec![vec![1.0, 1.0]], bias: vec![0.0] },
            ],
        )
        .unwrap()
        .lower()
    }

    #[test]
    fn early_return_skips_solvers() {
        // second layer pre-activations: one clearly negative, one clearly positive
        let net = hidden_layer_net(
            vec![vec![1.0, -1.0], vec![1.0, 1.0]],
            vec![0.0, 0.0],
            vec![vec![-1.0, -1.0], vec![1.0, 1.0]],
            vec![-0.5, 0.2],
        );
        let g = build_bounded_graph(&net, &InputDomain::unit(2), &BoundsConfig::default()).unwrap();
        let second = &g.layers[3];
        assert_eq!(second.relu_status, vec![ReluStatus::StablyInactive, ReluStatus::StablyActive]);
        assert!(second.by_procedure.iter().all(|p| p.lp.is_none()));
        // the first hidden layer depends on inputs only
        assert!(g.layers[1].by_procedure.iter().all(|p| p.lp.is_none()));
    }

    #[test]
    fn lp_tightens_unstable_neuron() {
        // h1 = relu(x0 - x1), h2 = relu(x1 - x0); z = h1 + h2 - 0.5 has IA [-0.5, 1.5]
        // but h1 + h2 = |x0 - x1| so the LP can cut the upper side
        let net = hidden_layer_net(
            vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
            vec![0.0, 0.0],
            vec![vec![1.0, 1.0], vec![0.0, 0.0]],
            vec![-0.5, 0.0],
        );
        let g = build_bounded_graph(&net, &InputDomain::unit(2), &BoundsConfig::default()).unwrap();
        let iv = g.layers[3].intervals[0];
        let ia = g.layers[3].by_procedure[0].ia.unwrap();
        assert!((ia.upper - 1.5).abs() < 1e-9);
        assert!(iv.upper < ia.upper - 1e-3);
        assert_eq!(g.layers[3].relu_status[0], ReluStatus::Unstable);
        assert_eq!(g.layers[3].provenance[0][1], Provenance::Lp);
    }

    #[test]
    fn cache_returns_same_graph() {
        let net = hidden_layer_net(vec![vec![1.0, -1.0], vec![1.0, 1.0]], vec![0.0, 0.0], vec![vec![1.0, 1.0], vec![1.0, -1.0]], vec![0.0, 0.0]);
        let dir = tempfile::tempdir().unwrap();
        let cache = BoundsCache::new(Some(dir.path().to_path_buf()));
        let d = InputDomain::unit(2);
        let a = cache.get_or_build("abc", &net, &d, &BoundsConfig::default()).unwrap();
        let fresh = BoundsCache::new(Some(dir.path().to_path_buf()));
        let b = fresh.get_or_build("abc", &net, &d, &BoundsConfig::default()).unwrap();
        assert_eq!(*a, *b);
        let c = cache.get_or_build("abc", &net, &d, &BoundsConfig::default()).unwrap();
        assert!(Arc::ptr_eq(&a, &c));
    }
}
