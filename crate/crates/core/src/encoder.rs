//! MILP formulations of network queries.
//!
//! [`ModelBuilder`] walks a lowered network and keeps every activation as a
//! [`LinExpr`] over model variables. Affine layers just compose expressions.
//! Model variables exist only for inputs, unstable ReLU outputs and their
//! indicators, max outputs and their selectors, and query auxiliaries.
//! Every variable has a recipe, so a concrete input can be completed into a
//! full assignment of the model (used to seed incumbents and to check
//! decoded solutions).

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundedGraph, BoundsConfig, InputDomain, Interval, LayerKind, ReluStatus, Tightener};
use crate::error::{Error, Result};
use crate::lp::{LinExpr, LpProblem, Relation, Sense, VarId};
use crate::milp::MilpModel;
use crate::network::{LoweredNet, Op, Sample};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingStats {
    pub stably_active: usize,
    pub stably_inactive: usize,
    pub unstable: usize,
    pub labels_eliminated: usize,
    /// Selector binaries introduced by max-pooling units.
    pub max_selectors: usize,
    /// Selector binaries introduced by the label disjunction.
    pub target_selectors: usize,
    pub binaries: usize,
    pub constraints: usize,
    pub variables: usize,
}

#[derive(Debug, Clone)]
enum Recipe {
    Input(usize),
    Relu(LinExpr),
    ReluOn(LinExpr),
    Max(Vec<LinExpr>),
    MaxSel(Vec<LinExpr>, usize),
    AbsDev(VarId, f64),
    MaxAbsDev(Vec<(VarId, f64)>),
}

/// Incrementally built MILP for a network over a box input domain.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    lp: LpProblem,
    binaries: Vec<VarId>,
    recipes: Vec<Recipe>,
    symmetric: bool,
    inputs: usize,
    stats: EncodingStats,
    scratch: Vec<f64>,
}

impl ModelBuilder {
    /// Creates one variable per input coordinate, bounded by `domain`.
    pub fn new(domain: &InputDomain, symmetric_big_m: bool) -> Self {
        let mut b = Self {
            lp: LpProblem::new(),
            binaries: Vec::new(),
            recipes: Vec::new(),
            symmetric: symmetric_big_m,
            inputs: domain.len(),
            stats: EncodingStats::default(),
            scratch: Vec::new(),
        };
        for i in 0..domain.len() {
            b.new_var(format!("x{i}"), domain.lower[i], domain.upper[i], Recipe::Input(i));
        }
        b
    }

    pub fn problem(&self) -> &LpProblem {
        &self.lp
    }

    pub fn binaries(&self) -> &[VarId] {
        &self.binaries
    }

    pub fn input_vars(&self) -> Vec<VarId> {
        (0..self.inputs).map(VarId).collect()
    }

    pub fn input_exprs(&self) -> Vec<LinExpr> {
        (0..self.inputs).map(|i| LinExpr::var(VarId(i))).collect()
    }

    pub fn stats(&self) -> EncodingStats {
        let mut s = self.stats;
        s.binaries = self.binaries.len();
        s.constraints = self.lp.num_constraints();
        s.variables = self.lp.num_vars();
        s
    }

    /// Whether `e` depends on input variables only, in which case its
    /// interval over the box is exact.
    pub fn is_input_only(&self, e: &LinExpr) -> bool {
        e.terms.iter().all(|(v, _)| v.0 < self.inputs)
    }

    /// Range of `e` over the variable bounds alone.
    pub fn interval_of(&self, e: &LinExpr) -> Interval {
        let (mut lo, mut hi) = (e.constant, e.constant);
        for &(v, c) in &e.terms {
            let b = self.lp.bounds(v);
            if c > 0.0 {
                lo += c * b.lower;
                hi += c * b.upper;
            } else {
                lo += c * b.upper;
                hi += c * b.lower;
            }
        }
        Interval::new(lo, hi)
    }

    fn new_var(&mut self, name: String, lo: f64, hi: f64, recipe: Recipe) -> VarId {
        self.recipes.push(recipe);
        self.lp.add_named_var(name, lo, hi)
    }

    fn new_binary(&mut self, name: String, recipe: Recipe) -> VarId {
        let v = self.new_var(name, 0.0, 1.0, recipe);
        self.binaries.push(v);
        v
    }

    fn affine(&mut self, a: &crate::network::Affine, x: &[LinExpr]) -> Vec<LinExpr> {
        let scratch = &mut self.scratch;
        scratch.resize(self.lp.num_vars(), 0.0);
        a.rows.iter().zip(&a.bias).map(|(row, &b)| LinExpr::weighted_sum(row, x, b, scratch)).collect()
    }

    /// `y = max(x, 0)` given `x ∈ interval`.
    pub fn encode_relu(&mut self, x: &LinExpr, interval: Interval, status: ReluStatus) -> Result<LinExpr> {
        match status {
            ReluStatus::StablyInactive => {
                self.stats.stably_inactive += 1;
                return Ok(LinExpr::zero());
            }
            ReluStatus::StablyActive => {
                self.stats.stably_active += 1;
                return Ok(x.clone());
            }
            ReluStatus::Unstable => {}
        }
        let Interval { lower: l, upper: u } = interval;
        if !l.is_finite() || !u.is_finite() {
            return Err(Error::InconsistentBounds(format!("unstable ReLU needs finite bounds, got [{l}, {u}]")));
        }
        self.stats.unstable += 1;
        let k = self.stats.unstable - 1;
        let (l, u) = if self.symmetric {
            let m = (-l).max(u);
            (-m, m)
        } else {
            (l, u)
        };
        let y = self.new_var(format!("relu{k}_y"), 0.0, u, Recipe::Relu(x.clone()));
        let a = self.new_binary(format!("relu{k}_a"), Recipe::ReluOn(x.clone()));
        let ye = LinExpr::var(y);
        // y <= x - l(1 - a)
        let c1 = &(&ye - x) - &LinExpr::from_terms(&[(a, l)], 0.0);
        self.lp.add_constraint(c1, Relation::Le, -l);
        // y >= x
        self.lp.add_constraint(&ye - x, Relation::Ge, 0.0);
        // y <= u a
        self.lp.add_constraint(LinExpr::from_terms(&[(y, 1.0), (a, -u)], 0.0), Relation::Le, 0.0);
        Ok(ye)
    }

    /// `y = max(xs)`; `xs` must already be reduced to the inputs that can
    /// attain the maximum.
    pub fn encode_max(&mut self, xs: &[LinExpr], intervals: &[Interval]) -> Result<LinExpr> {
        self.encode_max_inner(xs, intervals).map(|(e, _)| e)
    }

    fn encode_max_inner(&mut self, xs: &[LinExpr], intervals: &[Interval]) -> Result<(LinExpr, usize)> {
        match xs.len() {
            0 => return Err(Error::InvalidArgument("max over no inputs".into())),
            1 => return Ok((xs[0].clone(), 0)),
            _ => {}
        }
        if intervals.iter().any(|iv| !iv.lower.is_finite() || !iv.upper.is_finite()) {
            return Err(Error::InconsistentBounds("max inputs need finite bounds".into()));
        }
        let k = self.lp.num_vars();
        let l_max = intervals.iter().map(|iv| iv.lower).fold(f64::NEG_INFINITY, f64::max);
        let u_max = intervals.iter().map(|iv| iv.upper).fold(f64::NEG_INFINITY, f64::max);
        let y = self.new_var(format!("max{k}_y"), l_max, u_max, Recipe::Max(xs.to_vec()));
        let ye = LinExpr::var(y);
        let mut sum = Vec::with_capacity(xs.len());
        for (i, x) in xs.iter().enumerate() {
            let a = self.new_binary(format!("max{k}_a{i}"), Recipe::MaxSel(xs.to_vec(), i));
            sum.push((a, 1.0));
            let u_others = intervals
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, iv)| iv.upper)
                .fold(f64::NEG_INFINITY, f64::max);
            let big_m = u_others - intervals[i].lower;
            let diff = &ye - x;
            self.lp.add_constraint(diff.clone(), Relation::Ge, 0.0);
            // y <= x_i + (1 - a_i) M_i
            self.lp.add_constraint(diff.add_scaled(&LinExpr::var(a), big_m), Relation::Le, big_m);
        }
        self.lp.add_constraint(LinExpr::from_terms(&sum, 0.0), Relation::Eq, 1.0);
        Ok((ye, xs.len()))
    }

    /// Extends an input point to values for every model variable.
    pub fn complete(&self, x: &[f64]) -> Vec<f64> {
        let mut vals = vec![0.0; self.recipes.len()];
        for (i, r) in self.recipes.iter().enumerate() {
            vals[i] = match r {
                Recipe::Input(k) => x[*k],
                Recipe::Relu(e) => e.eval(&vals).max(0.0),
                Recipe::ReluOn(e) => f64::from(u8::from(e.eval(&vals) >= 0.0)),
                Recipe::Max(es) => es.iter().map(|e| e.eval(&vals)).fold(f64::NEG_INFINITY, f64::max),
                Recipe::MaxSel(es, pos) => {
                    let v: Vec<f64> = es.iter().map(|e| e.eval(&vals)).collect();
                    f64::from(u8::from(crate::network::argmax(&v) == *pos))
                }
                Recipe::AbsDev(v, c) => (vals[v.0] - c).abs(),
                Recipe::MaxAbsDev(list) => list.iter().map(|(v, c)| (vals[v.0] - c).abs()).fold(0.0, f64::max),
            };
        }
        vals
    }
}

/// Supplies intervals while [`walk`] builds a model. Called once per trace
/// entry, in depth-first order.
pub(crate) trait BoundOracle {
    fn affine(&mut self, b: &ModelBuilder, out: &[LinExpr]) -> Result<()>;
    fn relu(&mut self, b: &ModelBuilder, pre: &[LinExpr]) -> Result<Vec<(Interval, ReluStatus)>>;
    /// Returns one interval per input and the surviving members of each group.
    fn max(&mut self, b: &ModelBuilder, inputs: &[LinExpr], groups: &[Vec<usize>]) -> Result<(Vec<Interval>, Vec<Vec<usize>>)>;
    fn residual(&mut self, b: &ModelBuilder, out: &[LinExpr]) -> Result<()>;
}

pub(crate) fn walk(b: &mut ModelBuilder, ops: &[Op], mut x: Vec<LinExpr>, oracle: &mut dyn BoundOracle) -> Result<Vec<LinExpr>> {
    for op in ops {
        x = match op {
            Op::Affine(a) => {
                let out = b.affine(a, &x);
                oracle.affine(b, &out)?;
                out
            }
            Op::Relu => {
                let found = oracle.relu(b, &x)?;
                let mut out = Vec::with_capacity(x.len());
                for (e, (iv, st)) in x.iter().zip(found) {
                    out.push(b.encode_relu(e, iv, st)?);
                }
                out
            }
            Op::Max(groups) => {
                let (ivs, survivors) = oracle.max(b, &x, groups)?;
                let mut out = Vec::with_capacity(groups.len());
                for keep in &survivors {
                    let xs: Vec<LinExpr> = keep.iter().map(|&i| x[i].clone()).collect();
                    let is: Vec<Interval> = keep.iter().map(|&i| ivs[i]).collect();
                    let (e, sel) = b.encode_max_inner(&xs, &is)?;
                    b.stats.max_selectors += sel;
                    out.push(e);
                }
                out
            }
            Op::Residual(branch) => {
                let inner = walk(b, branch, x.clone(), oracle)?;
                let out: Vec<LinExpr> = inner.iter().zip(&x).map(|(p, q)| p + q).collect();
                oracle.residual(b, &out)?;
                out
            }
        };
    }
    Ok(x)
}

/// Reads intervals back out of a finished [`BoundedGraph`].
struct Replay<'g> {
    graph: &'g BoundedGraph,
    next: usize,
}

impl Replay<'_> {
    fn take(&mut self, kind: LayerKind) -> Result<&crate::bounds::LayerBounds> {
        let layer = self
            .graph
            .layers
            .get(self.next)
            .filter(|l| l.kind == kind)
            .ok_or_else(|| Error::InvalidArgument("bounded graph does not match the network".into()))?;
        self.next += 1;
        Ok(layer)
    }
}

impl BoundOracle for Replay<'_> {
    fn affine(&mut self, _: &ModelBuilder, _: &[LinExpr]) -> Result<()> {
        self.take(LayerKind::Affine).map(|_| ())
    }

    fn relu(&mut self, _: &ModelBuilder, _: &[LinExpr]) -> Result<Vec<(Interval, ReluStatus)>> {
        let l = self.take(LayerKind::Relu)?;
        Ok(l.intervals.iter().copied().zip(l.relu_status.iter().copied()).collect())
    }

    fn max(&mut self, _: &ModelBuilder, _: &[LinExpr], _: &[Vec<usize>]) -> Result<(Vec<Interval>, Vec<Vec<usize>>)> {
        let l = self.take(LayerKind::Max)?;
        Ok((l.intervals.clone(), l.max_survivors.clone()))
    }

    fn residual(&mut self, _: &ModelBuilder, _: &[LinExpr]) -> Result<()> {
        self.take(LayerKind::Residual).map(|_| ())
    }
}

/// Labels that can still attain the top logit: `μ` is kept iff its upper
/// bound is at least every other label's best lower bound. The true label is
/// always kept. Returned in increasing order.
pub fn eliminate_labels(logits: &[Interval], true_label: usize) -> Vec<usize> {
    (0..logits.len())
        .filter(|&mu| {
            if mu == true_label {
                return true;
            }
            let best_other = logits
                .iter()
                .enumerate()
                .filter(|&(nu, _)| nu != mu)
                .map(|(_, iv)| iv.lower)
                .fold(f64::NEG_INFINITY, f64::max);
            logits[mu].upper >= best_other
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    Linf,
}

impl std::str::FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "linf" | "l_inf" | "inf" => Ok(Norm::Linf),
            other => Err(Error::InvalidArgument(format!("unknown norm {other:?} (expected l1 or linf)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    Any,
    Labels(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionQuery {
    pub norm: Norm,
    pub targets: Targets,
    /// Required lead of the target logit over the true one; ties count as
    /// adversarial when zero.
    pub margin: f64,
    /// Optional l∞ cap on the search region.
    pub max_distortion: Option<f64>,
}

impl Default for DistortionQuery {
    fn default() -> Self {
        Self { norm: Norm::Linf, targets: Targets::Any, margin: 0.0, max_distortion: None }
    }
}

/// A query encoded as a MILP, plus what is needed to interpret solutions.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub model: MilpModel,
    pub stats: EncodingStats,
    pub input_vars: Vec<VarId>,
    pub logits: Vec<LinExpr>,
    /// Labels other than the true one that survived elimination.
    pub targets: Vec<usize>,
    /// No target survived elimination, so no adversarial input exists in
    /// the encoded domain; `model` is then a placeholder.
    pub trivially_robust: bool,
    builder: ModelBuilder,
}

impl Encoding {
    /// Full model assignment induced by input `x`.
    pub fn complete(&self, x: &[f64]) -> Vec<f64> {
        self.builder.complete(x)
    }

    pub fn decode_input(&self, values: &[f64]) -> Vec<f64> {
        self.input_vars.iter().map(|v| values[v.0]).collect()
    }

    pub fn decode_logits(&self, values: &[f64]) -> Vec<f64> {
        self.logits.iter().map(|e| e.eval(values)).collect()
    }
}

struct Prepared {
    builder: ModelBuilder,
    logits: Vec<LinExpr>,
    targets: Vec<usize>,
    eliminated: usize,
    diffs: Vec<LinExpr>,
    diff_intervals: Vec<Interval>,
}

fn prepare(net: &LoweredNet, graph: &BoundedGraph, domain: &InputDomain, label: usize, wanted: &[usize], config: &BoundsConfig) -> Result<Prepared> {
    if !graph.domain.contains_domain(domain) {
        return Err(Error::InvalidArgument("query domain is not inside the bounded graph's domain".into()));
    }
    if label >= net.num_labels {
        return Err(Error::InvalidArgument(format!("label {label} out of range for {} labels", net.num_labels)));
    }
    let mut builder = ModelBuilder::new(domain, graph.config.symmetric_big_m);
    let mut replay = Replay { graph, next: 0 };
    let inputs = builder.input_exprs();
    let logits = walk(&mut builder, &net.ops, inputs, &mut replay)?;
    let logit_iv: Vec<Interval> =
        logits.iter().zip(&graph.logits).map(|(e, g)| builder.interval_of(e).intersect(g)).collect();
    let retained = eliminate_labels(&logit_iv, label);
    let eliminated = net.num_labels - retained.len();
    let targets: Vec<usize> = wanted.iter().copied().filter(|t| retained.contains(t)).collect();
    let diffs: Vec<LinExpr> = targets.iter().map(|&t| &logits[t] - &logits[label]).collect();
    let coarse: Vec<Interval> = targets
        .iter()
        .zip(&diffs)
        .map(|(&t, d)| {
            let by_logits = Interval::new(logit_iv[t].lower - logit_iv[label].upper, logit_iv[t].upper - logit_iv[label].lower);
            builder.interval_of(d).intersect(&by_logits)
        })
        .collect();
    let (keep, diff_intervals) = if diffs.len() > 1 {
        let mut t = Tightener::new(&builder, config);
        let (keep, ivs) = t.tighten_max(&diffs, Some(&coarse))?;
        (keep, ivs)
    } else {
        ((0..diffs.len()).collect(), coarse)
    };
    Ok(Prepared {
        targets: keep.iter().map(|&i| targets[i]).collect(),
        diffs: keep.iter().map(|&i| diffs[i].clone()).collect(),
        diff_intervals: keep.iter().map(|&i| diff_intervals[i]).collect(),
        builder,
        logits,
        eliminated,
    })
}

fn finish(mut p: Prepared, objective_sense: Sense, objective: LinExpr, trivially_robust: bool, target_selectors: usize) -> Result<Encoding> {
    p.builder.lp.set_objective(objective_sense, objective);
    let mut stats = p.builder.stats();
    stats.labels_eliminated = p.eliminated;
    stats.target_selectors = target_selectors;
    let input_vars = p.builder.input_vars();
    Ok(Encoding {
        model: MilpModel::new(p.builder.lp.clone(), p.builder.binaries.clone())?,
        stats,
        input_vars,
        logits: p.logits,
        targets: p.targets,
        trivially_robust,
        builder: p.builder,
    })
}

/// Maximize `max_{μ ≠ λ} f_μ(x') - f_λ(x')` over the clipped l∞ ball of
/// radius `eps` around the sample.
pub fn encode_robustness(net: &LoweredNet, graph: &BoundedGraph, sample: &Sample, eps: f64, config: &BoundsConfig) -> Result<Encoding> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be finite and non-negative, got {eps}")));
    }
    let domain = InputDomain::linf_ball(&sample.input, eps);
    let others: Vec<usize> = (0..net.num_labels).filter(|&l| l != sample.label).collect();
    let mut p = prepare(net, graph, &domain, sample.label, &others, config)?;
    if p.targets.is_empty() {
        return finish(p, Sense::Maximize, LinExpr::zero(), true, 0);
    }
    let (diffs, ivs) = (p.diffs.clone(), p.diff_intervals.clone());
    let (margin, sel) = p.builder.encode_max_inner(&diffs, &ivs)?;
    finish(p, Sense::Maximize, margin, false, sel)
}

/// Minimize the distortion of `x'` from the sample subject to some target
/// logit leading the true one by at least `query.margin`.
pub fn encode_min_distortion(net: &LoweredNet, graph: &BoundedGraph, sample: &Sample, query: &DistortionQuery, config: &BoundsConfig) -> Result<Encoding> {
    let wanted = match &query.targets {
        Targets::Any => (0..net.num_labels).filter(|&l| l != sample.label).collect(),
        Targets::Labels(ls) => {
            if let Some(&bad) = ls.iter().find(|&&l| l == sample.label || l >= net.num_labels) {
                return Err(Error::InvalidArgument(format!("target label {bad} is the true label or out of range")));
            }
            let mut ls = ls.clone();
            ls.sort_unstable();
            ls.dedup();
            ls
        }
    };
    if wanted.is_empty() {
        return Err(Error::InvalidArgument("no target labels".into()));
    }
    let domain = distortion_domain(sample, query)?;
    let mut p = prepare(net, graph, &domain, sample.label, &wanted, config)?;
    if p.targets.is_empty() {
        return finish(p, Sense::Minimize, LinExpr::zero(), true, 0);
    }
    let (diffs, ivs) = (p.diffs.clone(), p.diff_intervals.clone());
    let (lead, sel) = p.builder.encode_max_inner(&diffs, &ivs)?;
    p.builder.lp.add_constraint(lead, Relation::Ge, query.margin);

    let x = &sample.input;
    let objective = match query.norm {
        Norm::L1 => {
            let mut terms = Vec::new();
            let mut constant = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                let b = p.builder.lp.bounds(VarId(j));
                if b.lower == b.upper {
                    constant += (b.lower - xj).abs();
                    continue;
                }
                let reach = (xj - b.lower).max(b.upper - xj);
                let d = p.builder.new_var(format!("dev{j}"), 0.0, reach, Recipe::AbsDev(VarId(j), xj));
                p.builder.lp.add_constraint(LinExpr::from_terms(&[(d, 1.0), (VarId(j), -1.0)], 0.0), Relation::Ge, -xj);
                p.builder.lp.add_constraint(LinExpr::from_terms(&[(d, 1.0), (VarId(j), 1.0)], 0.0), Relation::Ge, xj);
                terms.push((d, 1.0));
            }
            let total = LinExpr::from_terms(&terms, constant);
            if let Some(cap) = query.max_distortion {
                p.builder.lp.add_constraint(total.clone(), Relation::Le, cap);
            }
            total
        }
        Norm::Linf => {
            let mut list = Vec::new();
            let mut reach: f64 = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                let b = p.builder.lp.bounds(VarId(j));
                reach = reach.max(xj - b.lower).max(b.upper - xj);
                list.push((VarId(j), xj));
            }
            let e = p.builder.new_var("dev_max".into(), 0.0, reach, Recipe::MaxAbsDev(list.clone()));
            for (v, xj) in list {
                p.builder.lp.add_constraint(LinExpr::from_terms(&[(e, 1.0), (v, -1.0)], 0.0), Relation::Ge, -xj);
                p.builder.lp.add_constraint(LinExpr::from_terms(&[(e, 1.0), (v, 1.0)], 0.0), Relation::Ge, xj);
            }
            LinExpr::var(e)
        }
    };
    finish(p, Sense::Minimize, objective, false, sel)
}

/// Search region for a distortion query: the unit box, optionally capped.
pub fn distortion_domain(sample: &Sample, query: &DistortionQuery) -> Result<InputDomain> {
    match query.max_distortion {
        None => Ok(InputDomain::unit(sample.input.len())),
        Some(cap) if cap >= 0.0 && cap.is_finite() => Ok(InputDomain::linf_ball(&sample.input, cap)),
        Some(cap) => Err(Error::InvalidArgument(format!("max distortion must be finite and non-negative, got {cap}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builder_1d(lo: f64, hi: f64) -> ModelBuilder {
        ModelBuilder::new(&InputDomain { lower: vec![lo], upper: vec![hi] }, false)
    }

    #[test]
    fn stable_relus_add_nothing() {
        let mut b = builder_1d(1.0, 2.0);
        let x = LinExpr::var(VarId(0));
        let y = b.encode_relu(&x, Interval::new(1.0, 2.0), ReluStatus::StablyActive).unwrap();
        assert_eq!(y, x);
        let z = b.encode_relu(&x, Interval::new(-2.0, -1.0), ReluStatus::StablyInactive).unwrap();
        assert!(z.is_constant() && z.constant == 0.0);
        assert!(b.binaries().is_empty());
        assert_eq!(b.problem().num_constraints(), 0);
    }

    #[test]
    fn unstable_relu_rejects_infinite_bounds() {
        let mut b = builder_1d(-1.0, 1.0);
        let x = LinExpr::var(VarId(0));
        assert!(b.encode_relu(&x, Interval::new(f64::NEG_INFINITY, 1.0), ReluStatus::Unstable).is_err());
    }

    #[test]
    fn max_structure_counts() {
        let mut b = ModelBuilder::new(&InputDomain::unit(3), false);
        let xs = b.input_exprs();
        let ivs = vec![Interval::new(0.0, 1.0); 3];
        b.encode_max(&xs, &ivs).unwrap();
        assert_eq!(b.binaries().len(), 3);
        let sums = b.problem().constraints().iter().filter(|c| c.relation == Relation::Eq).count();
        assert_eq!(sums, 1);
        let one = b.encode_max(&xs[..1], &ivs[..1]).unwrap();
        assert_eq!(one, xs[0]);
        assert_eq!(b.binaries().len(), 3);
    }

    #[test]
    fn label_elimination_examples() {
        let same = vec![Interval::new(0.0, 1.0); 4];
        assert_eq!(eliminate_labels(&same, 2), vec![0, 1, 2, 3]);
        let ivs = [Interval::new(5.0, 6.0), Interval::new(0.0, 1.0), Interval::new(2.0, 7.0)];
        assert_eq!(eliminate_labels(&ivs, 0), vec![0, 2]);
        // the true label survives even when dominated
        assert_eq!(eliminate_labels(&ivs, 1), vec![0, 1, 2]);
    }

    #[test]
    fn completion_satisfies_relu_encoding() {
        let mut b = builder_1d(-1.0, 2.0);
        let x = LinExpr::var(VarId(0));
        b.encode_relu(&x, Interval::new(-1.0, 2.0), ReluStatus::Unstable).unwrap();
        for v in [-1.0, -0.3, 0.0, 0.7, 2.0] {
            let vals = b.complete(&[v]);
            assert!(b.problem().max_violation(&vals) <= 1e-12, "x = {v}");
            assert_eq!(vals[1], f64::max(v, 0.0));
        }
    }
}
