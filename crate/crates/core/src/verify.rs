//! Per-sample verification and dataset-level aggregation.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{debug, info, warn};

use crate::attack::{is_valid_counterexample, margin, pgd_attack, PgdConfig, RADIUS_TOL};
use crate::bounds::{network_hash, BoundedGraph, BoundsCache, BoundsConfig, InputDomain};
use crate::encoder::{distortion_domain, eliminate_labels, encode_min_distortion, encode_robustness, DistortionQuery, EncodingStats, Norm, Targets};
use crate::error::{Error, Result};
use crate::milp::{solve_milp_with, MilpLimits, MilpOptions, MilpStatus, SolveOutcome};
use crate::network::{argmax, LoweredNet, Network, Sample};

/// A maximized margin above this is a counterexample.
pub const MARGIN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CertifiedRobust,
    Counterexample,
    Misclassified,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndecidedReason {
    Timeout,
    NodeLimit,
    /// Optimal margin in `(0, MARGIN_TOL]`.
    Boundary,
    /// The solver's answer did not survive re-checking with a forward pass.
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Robustness,
    MinDistortion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Clean,
    Pgd,
    Milp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub pgd_s: f64,
    pub build_s: f64,
    pub solve_s: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.pgd_s + self.build_s + self.solve_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub sample_id: usize,
    pub query: QueryKind,
    pub label: usize,
    pub predicted: usize,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<UndecidedReason>,
    /// Radius of the l∞ ball for robustness queries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversarial: Option<Vec<f64>>,
    /// Best objective found: the margin for robustness, the distortion for
    /// distortion queries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    /// Proven bound on the optimum (upper for the margin, lower for the
    /// distortion).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<EncodingStats>,
    /// Labels left in the query after bound-based elimination.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<usize>,
    pub nodes_explored: usize,
    pub lp_iterations: usize,
    /// Wall-clock measurements; kept out of the JSON so that records are
    /// reproducible byte for byte.
    #[serde(skip)]
    pub timings: Timings,
}

impl VerificationRecord {
    fn new(sample_id: usize, query: QueryKind, sample: &Sample, predicted: usize) -> Self {
        Self {
            sample_id,
            query,
            label: sample.label,
            predicted,
            verdict: Verdict::Undecided,
            reason: None,
            eps: None,
            source: None,
            adversarial: None,
            objective: None,
            bound: None,
            distortion: None,
            stats: None,
            targets: Vec::new(),
            nodes_explored: 0,
            lp_iterations: 0,
            timings: Timings::default(),
        }
    }
}

/// PGD settings whose radius comes from the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdPrepass {
    pub steps: usize,
    /// Defaults to `2.5 eps / steps`.
    pub step_size: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PgdPrepass {
    fn default() -> Self {
        Self { steps: 100, step_size: None, restarts: 1, seed: 0 }
    }
}

impl PgdPrepass {
    pub fn config(&self, eps: f64) -> PgdConfig {
        let steps = self.steps.max(1);
        PgdConfig {
            steps,
            step_size: self.step_size.unwrap_or(2.5 * eps / steps as f64),
            restarts: self.restarts,
            seed: self.seed,
            ..PgdConfig::new(eps)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub bounds: BoundsConfig,
    /// Bound over the perturbation ball; when off, bounds cover the whole
    /// input domain and are shared by every sample.
    pub restricted_domain: bool,
    pub time_limit_s: Option<f64>,
    pub node_limit: Option<usize>,
    /// PGD pre-pass; its best point seeds the MILP incumbent.
    pub pgd: Option<PgdPrepass>,
    /// Stop once the verdict is known instead of solving the margin to
    /// optimality.
    pub stop_early: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            bounds: BoundsConfig::default(),
            restricted_domain: true,
            time_limit_s: Some(1200.0),
            node_limit: None,
            pgd: Some(PgdPrepass::default()),
            stop_early: true,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.time_limit_s {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("time limit must be positive, got {t}")));
            }
        }
        if self.bounds.full_time_budget_s <= 0.0 || !self.bounds.full_time_budget_s.is_finite() {
            return Err(Error::InvalidArgument("per-bound time budget must be positive".into()));
        }
        Ok(())
    }

    fn milp_limits(&self, spent: Duration) -> MilpLimits {
        MilpLimits {
            time_budget: self.time_limit_s.map(|t| Duration::from_secs_f64(t).saturating_sub(spent)),
            node_limit: self.node_limit,
            ..Default::default()
        }
    }
}

/// A network prepared for repeated queries.
pub struct Verifier {
    net: Network,
    lowered: LoweredNet,
    hash: String,
    cache: Arc<BoundsCache>,
    pub config: VerifyConfig,
}

impl Verifier {
    pub fn new(net: Network, config: VerifyConfig) -> Result<Self> {
        Self::with_cache(net, config, Arc::new(BoundsCache::default()))
    }

    pub fn with_cache(net: Network, config: VerifyConfig, cache: Arc<BoundsCache>) -> Result<Self> {
        config.validate()?;
        let lowered = net.lower();
        let hash = network_hash(&net);
        Ok(Self { net, lowered, hash, cache, config })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn lowered(&self) -> &LoweredNet {
        &self.lowered
    }

    fn check_sample(&self, sample: &Sample) -> Result<()> {
        if sample.input.len() != self.lowered.input_dim {
            return Err(Error::Shape(format!("sample has {} inputs, network expects {}", sample.input.len(), self.lowered.input_dim)));
        }
        if sample.label >= self.lowered.num_labels {
            return Err(Error::InvalidArgument(format!("label {} out of range", sample.label)));
        }
        Ok(())
    }

    /// Bounds for `domain`, or for the whole input domain when the
    /// restricted-domain optimization is off.
    pub fn bounds_for(&self, domain: &InputDomain, bounds: &BoundsConfig, restricted: bool) -> Result<Arc<BoundedGraph>> {
        if restricted {
            // per-sample graphs are not worth keeping around
            Ok(Arc::new(crate::bounds::build_bounded_graph(&self.lowered, domain, bounds)?))
        } else {
            self.cache.get_or_build(&self.hash, &self.lowered, &InputDomain::unit(self.lowered.input_dim), bounds)
        }
    }

    /// Decides whether some input within `eps` (l∞, clipped to `[0, 1]`) of
    /// the sample is classified differently.
    pub fn verify_sample(&self, sample_id: usize, sample: &Sample, eps: f64) -> Result<VerificationRecord> {
        self.verify_with(sample_id, sample, eps, &self.config)
    }

    fn verify_with(&self, sample_id: usize, sample: &Sample, eps: f64, config: &VerifyConfig) -> Result<VerificationRecord> {
        self.check_sample(sample)?;
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be finite and non-negative, got {eps}")));
        }
        let started = Instant::now();
        let clean = self.lowered.forward(&sample.input);
        let predicted = argmax(&clean);
        let mut rec = VerificationRecord::new(sample_id, QueryKind::Robustness, sample, predicted);
        rec.eps = Some(eps);
        if predicted != sample.label {
            rec.verdict = Verdict::Misclassified;
            rec.source = Some(Source::Clean);
            rec.adversarial = Some(sample.input.clone());
            rec.objective = Some(margin(&clean, sample.label));
            return Ok(rec);
        }

        let mut seed_point = None;
        if let Some(pgd) = config.pgd.as_ref().filter(|_| eps > 0.0) {
            let t = Instant::now();
            let r = pgd_attack(&self.lowered, sample, &pgd.config(eps))?;
            rec.timings.pgd_s = t.elapsed().as_secs_f64();
            {
                if let Some(x) = r.adversarial {
                    if is_valid_counterexample(&self.lowered, sample, &x, eps, (0.0, 1.0)) {
                        rec.verdict = Verdict::Counterexample;
                        rec.source = Some(Source::Pgd);
                        rec.objective = Some(margin(&self.lowered.forward(&x), sample.label));
                        rec.adversarial = Some(x);
                        return Ok(rec);
                    }
                }
                seed_point = Some(r.best);
            }
        }

        let t = Instant::now();
        let ball = InputDomain::linf_ball(&sample.input, eps);
        let graph = self.bounds_for(&ball, &config.bounds, config.restricted_domain)?;
        let enc = encode_robustness(&self.lowered, &graph, sample, eps, &config.bounds)?;
        rec.timings.build_s = t.elapsed().as_secs_f64();
        rec.stats = Some(enc.stats);
        rec.targets = enc.targets.clone();
        if enc.trivially_robust {
            rec.verdict = Verdict::CertifiedRobust;
            return Ok(rec);
        }

        let t = Instant::now();
        let mut limits = config.milp_limits(started.elapsed());
        if config.stop_early {
            limits.incumbent_target = Some(MARGIN_TOL);
            limits.bound_target = Some(0.0);
        }
        let options = MilpOptions { limits, initial_incumbent: seed_point.map(|x| enc.complete(&x)), log_nodes: false };
        let out = solve_milp_with(&enc.model, &options)?;
        rec.timings.solve_s = t.elapsed().as_secs_f64();
        record_solve(&mut rec, &out);

        let t_best = out.objective.unwrap_or(f64::NEG_INFINITY);
        if t_best > MARGIN_TOL {
            let mut x = enc.decode_input(out.incumbent.as_ref().expect("objective implies incumbent"));
            ball.project(&mut x);
            if is_valid_counterexample(&self.lowered, sample, &x, eps, (0.0, 1.0)) {
                rec.verdict = Verdict::Counterexample;
                rec.source = Some(Source::Milp);
                rec.adversarial = Some(x);
            } else {
                warn!(sample_id, margin = t_best, "MILP counterexample failed the forward check");
                rec.reason = Some(UndecidedReason::Numerical);
            }
        } else if out.best_bound <= 0.0 || (out.status == MilpStatus::Optimal && t_best <= 0.0 && out.best_bound <= MARGIN_TOL) {
            rec.verdict = Verdict::CertifiedRobust;
        } else {
            rec.reason = Some(match out.status {
                MilpStatus::TimedOut => UndecidedReason::Timeout,
                MilpStatus::NodeLimit => UndecidedReason::NodeLimit,
                MilpStatus::Optimal | MilpStatus::TargetReached => UndecidedReason::Boundary,
                MilpStatus::Infeasible => UndecidedReason::Numerical,
            });
        }
        debug!(sample_id, verdict = ?rec.verdict, nodes = rec.nodes_explored, "sample verified");
        Ok(rec)
    }

    /// The robustness MILP for one sample in LP text format, for
    /// cross-checking with external solvers.
    pub fn export_robustness_model(&self, sample: &Sample, eps: f64) -> Result<String> {
        self.check_sample(sample)?;
        let ball = InputDomain::linf_ball(&sample.input, eps);
        let graph = self.bounds_for(&ball, &self.config.bounds, self.config.restricted_domain)?;
        let enc = encode_robustness(&self.lowered, &graph, sample, eps, &self.config.bounds)?;
        Ok(crate::lp::write_lp_format(&enc.model.base, &enc.model.binaries))
    }

    /// Smallest perturbation under `query.norm` that makes some target label
    /// lead the true one by `query.margin`.
    pub fn min_distortion(&self, sample_id: usize, sample: &Sample, query: &DistortionQuery) -> Result<VerificationRecord> {
        self.check_sample(sample)?;
        let clean = self.lowered.forward(&sample.input);
        let predicted = argmax(&clean);
        let mut rec = VerificationRecord::new(sample_id, QueryKind::MinDistortion, sample, predicted);
        if predicted != sample.label {
            rec.verdict = Verdict::Misclassified;
            rec.source = Some(Source::Clean);
            rec.distortion = Some(0.0);
            return Ok(rec);
        }
        let started = Instant::now();
        let domain = distortion_domain(sample, query)?;
        let graph = self.bounds_for(&domain, &self.config.bounds, query.max_distortion.is_some())?;
        let enc = encode_min_distortion(&self.lowered, &graph, sample, query, &self.config.bounds)?;
        rec.timings.build_s = started.elapsed().as_secs_f64();
        rec.stats = Some(enc.stats);
        rec.targets = enc.targets.clone();
        if enc.trivially_robust {
            rec.verdict = Verdict::CertifiedRobust;
            return Ok(rec);
        }
        let t = Instant::now();
        let options = MilpOptions { limits: self.config.milp_limits(started.elapsed()), ..Default::default() };
        let out = solve_milp_with(&enc.model, &options)?;
        rec.timings.solve_s = t.elapsed().as_secs_f64();
        record_solve(&mut rec, &out);
        match (out.status, &out.incumbent) {
            (MilpStatus::Infeasible, _) => rec.verdict = Verdict::CertifiedRobust,
            (status, Some(vals)) => {
                let mut x = enc.decode_input(vals);
                domain.project(&mut x);
                let logits = self.lowered.forward(&x);
                let lead = enc.targets.iter().map(|&t| logits[t] - logits[sample.label]).fold(f64::NEG_INFINITY, f64::max);
                if lead < query.margin - MARGIN_TOL {
                    warn!(sample_id, lead, "distortion witness failed the forward check");
                    rec.reason = Some(UndecidedReason::Numerical);
                } else if status == MilpStatus::Optimal {
                    rec.verdict = Verdict::Counterexample;
                    rec.source = Some(Source::Milp);
                    rec.distortion = out.objective;
                    rec.adversarial = Some(x);
                } else {
                    rec.reason = Some(limit_reason(status));
                    rec.adversarial = Some(x);
                }
            }
            (status, None) => rec.reason = Some(limit_reason(status)),
        }
        Ok(rec)
    }

    /// Verifies every sample on a pool of `workers` threads. Records come
    /// back in sample order and do not depend on the worker count.
    pub fn verify_dataset(&self, samples: &[Sample], eps: f64, workers: usize) -> Result<(Vec<VerificationRecord>, BatchSummary)> {
        let records = self.run_pool(samples, workers, |i, s| self.verify_sample(i, s, eps))?;
        let summary = BatchSummary::from_records(&records);
        info!(
            samples = summary.samples,
            lower = summary.lower_bound_adv_error,
            upper = summary.upper_bound_adv_error,
            "dataset verified"
        );
        Ok((records, summary))
    }

    pub fn distort_dataset(&self, samples: &[Sample], query: &DistortionQuery, workers: usize) -> Result<Vec<VerificationRecord>> {
        self.run_pool(samples, workers, |i, s| self.min_distortion(i, s, query))
    }

    fn run_pool<F>(&self, samples: &[Sample], workers: usize, f: F) -> Result<Vec<VerificationRecord>>
    where
        F: Fn(usize, &Sample) -> Result<VerificationRecord> + Sync,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
        pool.install(|| samples.par_iter().enumerate().map(|(i, s)| f(i, s)).collect())
    }

    /// Mean stability counts and label eliminations per radius.
    pub fn stability_profile(&self, samples: &[Sample], eps_list: &[f64]) -> Result<Vec<ProfileRow>> {
        let mut rows = Vec::with_capacity(eps_list.len());
        for &eps in eps_list {
            let per_sample: Vec<(usize, usize, usize, usize)> = samples
                .par_iter()
                .map(|s| {
                    self.check_sample(s)?;
                    let g = crate::bounds::build_bounded_graph(&self.lowered, &InputDomain::linf_ball(&s.input, eps), &self.config.bounds)?;
                    let c = g.stability();
                    let kept = eliminate_labels(&g.logits, s.label).len();
                    Ok((c.unstable, c.stably_active, c.stably_inactive, self.lowered.num_labels - kept))
                })
                .collect::<Result<_>>()?;
            let n = per_sample.len().max(1) as f64;
            let mean = |k: fn(&(usize, usize, usize, usize)) -> usize| per_sample.iter().map(k).sum::<usize>() as f64 / n;
            let relus = self.lowered.relu_count();
            let unstable = mean(|t| t.0);
            rows.push(ProfileRow {
                eps,
                possibly_unstable: unstable,
                provably_active: mean(|t| t.1),
                provably_inactive: mean(|t| t.2),
                labels_eliminated: mean(|t| t.3),
                stable_fraction: if relus == 0 { 1.0 } else { 1.0 - unstable / relus as f64 },
            });
        }
        Ok(rows)
    }

    /// Runs the four configurations that each remove one optimization.
    pub fn ablation_report(&self, samples: &[Sample], eps: f64, workers: usize) -> Result<Vec<AblationRow>> {
        let mut base = self.config.clone();
        base.pgd = None;
        let variants = [
            ("baseline", base.clone()),
            ("no_progressive_tightening", VerifyConfig { bounds: BoundsConfig { progressive: false, ..base.bounds.clone() }, ..base.clone() }),
            ("unrestricted_domain", VerifyConfig { restricted_domain: false, ..base.clone() }),
            ("symmetric_big_m", VerifyConfig { bounds: BoundsConfig { symmetric_big_m: true, ..base.bounds.clone() }, ..base.clone() }),
        ];
        let mut rows = Vec::new();
        for (name, cfg) in variants {
            // warm the shared whole-domain bounds outside the timed region
            let shared_build = if cfg.restricted_domain {
                0.0
            } else {
                let t = Instant::now();
                self.bounds_for(&InputDomain::unit(self.lowered.input_dim), &cfg.bounds, false)?;
                t.elapsed().as_secs_f64()
            };
            let records = self.run_pool(samples, workers, |i, s| self.verify_with(i, s, eps, &cfg))?;
            rows.push(AblationRow::new(name, &records, shared_build));
        }
        Ok(rows)
    }
}

fn record_solve(rec: &mut VerificationRecord, out: &SolveOutcome) {
    rec.objective = out.objective;
    rec.bound = Some(out.best_bound).filter(|b| b.is_finite());
    rec.nodes_explored = out.nodes_explored;
    rec.lp_iterations = out.lp_iterations;
}

fn limit_reason(status: MilpStatus) -> UndecidedReason {
    match status {
        MilpStatus::TimedOut => UndecidedReason::Timeout,
        MilpStatus::NodeLimit => UndecidedReason::NodeLimit,
        _ => UndecidedReason::Numerical,
    }
}

/// One-off robustness check with a fresh [`Verifier`].
pub fn verify_sample(net: &Network, sample: &Sample, eps: f64, config: &VerifyConfig) -> Result<VerificationRecord> {
    Verifier::new(net.clone(), config.clone())?.verify_sample(0, sample, eps)
}

/// One-off minimum-distortion query with a fresh [`Verifier`].
pub fn min_distortion(net: &Network, sample: &Sample, norm: Norm, targets: Targets, config: &VerifyConfig) -> Result<VerificationRecord> {
    let query = DistortionQuery { norm, targets, ..Default::default() };
    Verifier::new(net.clone(), config.clone())?.min_distortion(0, sample, &query)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub samples: usize,
    pub certified: usize,
    pub counterexamples: usize,
    pub misclassified: usize,
    pub undecided: usize,
    pub test_error: f64,
    /// Misclassified plus counterexamples.
    pub lower_bound_adv_error: f64,
    /// Everything not certified.
    pub upper_bound_adv_error: f64,
    pub fraction_timed_out: f64,
    pub mean_time_s: f64,
    pub median_time_s: f64,
    pub mean_nodes: f64,
    pub mean_unstable: f64,
    pub mean_stably_active: f64,
    pub mean_stably_inactive: f64,
    pub mean_labels_eliminated: f64,
}

impl BatchSummary {
    pub fn from_records(records: &[VerificationRecord]) -> Self {
        let n = records.len();
        let count = |v: Verdict| records.iter().filter(|r| r.verdict == v).count();
        let (certified, cex, mis, und) =
            (count(Verdict::CertifiedRobust), count(Verdict::Counterexample), count(Verdict::Misclassified), count(Verdict::Undecided));
        let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        let mut times: Vec<f64> = records.iter().map(|r| r.timings.total()).collect();
        let nodes: Vec<f64> = records.iter().map(|r| r.nodes_explored as f64).collect();
        let stats: Vec<EncodingStats> = records.iter().filter_map(|r| r.stats).collect();
        let stat_mean = |f: fn(&EncodingStats) -> usize| mean(&stats.iter().map(|s| f(s) as f64).collect::<Vec<_>>());
        let timed_out = records.iter().filter(|r| matches!(r.reason, Some(UndecidedReason::Timeout | UndecidedReason::NodeLimit))).count();
        Self {
            samples: n,
            certified,
            counterexamples: cex,
            misclassified: mis,
            undecided: und,
            test_error: frac(mis),
            lower_bound_adv_error: frac(mis + cex),
            upper_bound_adv_error: frac(n - certified),
            fraction_timed_out: frac(timed_out),
            mean_time_s: mean(&times),
            median_time_s: median(&mut times),
            mean_nodes: mean(&nodes),
            mean_unstable: stat_mean(|s| s.unstable),
            mean_stably_active: stat_mean(|s| s.stably_active),
            mean_stably_inactive: stat_mean(|s| s.stably_inactive),
            mean_labels_eliminated: stat_mean(|s| s.labels_eliminated),
        }
    }

    /// Plain-text table with the usual columns.
    pub fn table(&self) -> String {
        format!(
            "{:>10} {:>10} {:>10} {:>10} {:>12}\n{:>9.2}% {:>9.2}% {:>9.2}% {:>9.2}% {:>12.4}\n",
            "test err",
            "adv LB",
            "adv UB",
            "undecided",
            "mean time s",
            100.0 * self.test_error,
            100.0 * self.lower_bound_adv_error,
            100.0 * self.upper_bound_adv_error,
            100.0 * self.undecided as f64 / self.samples.max(1) as f64,
            self.mean_time_s
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub eps: f64,
    pub possibly_unstable: f64,
    pub provably_active: f64,
    pub provably_inactive: f64,
    pub labels_eliminated: f64,
    pub stable_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub mean_build_s: f64,
    /// One-off cost of the shared whole-domain bounds.
    pub shared_build_s: f64,
    pub mean_solve_s: f64,
    pub mean_nodes: f64,
    pub median_nodes: f64,
    pub fraction_timed_out: f64,
    pub verdicts: Vec<Verdict>,
}

impl AblationRow {
    fn new(name: &str, records: &[VerificationRecord], shared_build_s: f64) -> Self {
        let mut nodes: Vec<f64> = records.iter().map(|r| r.nodes_explored as f64).collect();
        let build: Vec<f64> = records.iter().map(|r| r.timings.build_s).collect();
        let solve: Vec<f64> = records.iter().map(|r| r.timings.solve_s).collect();
        Self {
            name: name.to_string(),
            mean_build_s: mean(&build),
            shared_build_s,
            mean_solve_s: mean(&solve),
            mean_nodes: mean(&nodes),
            median_nodes: median(&mut nodes),
            fraction_timed_out: BatchSummary::from_records(records).fraction_timed_out,
            verdicts: records.iter().map(|r| r.verdict).collect(),
        }
    }
}

/// Checks the record invariants that make a counterexample trustworthy.
pub fn validate_record(net: &LoweredNet, sample: &Sample, rec: &VerificationRecord, query: Option<&DistortionQuery>) -> bool {
    if rec.verdict != Verdict::Counterexample {
        return true;
    }
    let Some(x) = &rec.adversarial else { return false };
    match rec.query {
        QueryKind::Robustness => is_valid_counterexample(net, sample, x, rec.eps.unwrap_or(0.0), (0.0, 1.0)),
        QueryKind::MinDistortion => {
            let q = query.cloned().unwrap_or_default();
            let logits = net.forward(x);
            let targets: Vec<usize> = match &q.targets {
                Targets::Any => (0..logits.len()).filter(|&l| l != sample.label).collect(),
                Targets::Labels(ls) => ls.clone(),
            };
            let lead = targets.iter().map(|&t| logits[t] - logits[sample.label]).fold(f64::NEG_INFINITY, f64::max);
            let dist = match q.norm {
                Norm::Linf => x.iter().zip(&sample.input).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
                Norm::L1 => x.iter().zip(&sample.input).map(|(a, b)| (a - b).abs()).sum(),
            };
            lead >= q.margin - MARGIN_TOL
                && x.iter().all(|v| (0.0..=1.0).contains(v))
                && rec.distortion.is_some_and(|d| (dist - d).abs() <= RADIUS_TOL * (1.0 + x.len() as f64))
        }
    }
}
