use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pwlcert::attack::{pgd_attack, PgdConfig};
use pwlcert::bounds::{BoundsCache, BoundsConfig, InputDomain, Procedure};
use pwlcert::encoder::{DistortionQuery, Norm, Targets};
use pwlcert::network::{load_dataset, DatasetSource, Network, Sample};
use pwlcert::verify::{BatchSummary, PgdPrepass, VerificationRecord, Verifier, VerifyConfig};
use serde::Serialize;
use tracing::info;
use tracing_subscriber::EnvFilter;

/// Complete verification of piecewise-linear neural networks via MILP.
#[derive(Parser, Debug)]
#[command(name = "pwlcert", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug, -vvv trace). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify robustness in an l∞ ball around each sample, or find counterexamples.
    Certify(CertifyArgs),
    /// Compute minimum adversarial distortions.
    Distort(DistortArgs),
    /// Run the PGD attack alone.
    Attack(AttackArgs),
    /// Count provably stable ReLUs and eliminated labels over a grid of radii.
    Profile(ProfileArgs),
    /// Zero the smallest weights of each linear layer, preserving l1 norms.
    Sparsify(SparsifyArgs),
    /// Compare solver effort with each optimization switched off in turn.
    Ablate(AblateArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct Data {
    /// Network JSON file.
    #[arg(long, env = "PWLCERT_NETWORK")]
    network: PathBuf,
    /// Dataset: a CSV file, or an IDX images file (with --labels).
    #[arg(long, env = "PWLCERT_DATASET")]
    dataset: PathBuf,
    /// IDX labels file paired with an IDX images dataset.
    #[arg(long, env = "PWLCERT_LABELS")]
    labels: Option<PathBuf>,
    /// Skip this many samples.
    #[arg(long, default_value_t = 0)]
    start: usize,
    /// Use at most this many samples.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
enum Effort {
    Ia,
    Lp,
    Full,
}

impl From<Effort> for Procedure {
    fn from(e: Effort) -> Self {
        match e {
            Effort::Ia => Procedure::Ia,
            Effort::Lp => Procedure::Lp,
            Effort::Full => Procedure::Full,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct Solver {
    /// Per-sample wall-clock limit in seconds.
    #[arg(long, env = "PWLCERT_TIME_LIMIT", default_value_t = 1200.0)]
    time_limit: f64,
    /// Branch-and-bound node limit; gives reproducible results regardless of machine speed.
    #[arg(long, env = "PWLCERT_NODE_LIMIT")]
    node_limit: Option<usize>,
    /// Worker threads (samples are verified independently).
    #[arg(long, env = "PWLCERT_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Most expensive bound procedure.
    #[arg(long, value_enum, default_value_t = Effort::Lp)]
    bounds: Effort,
    /// Time budget for each full MILP bound, in seconds.
    #[arg(long, default_value_t = 5.0)]
    full_budget: f64,
    /// Run every bound procedure on every neuron.
    #[arg(long)]
    no_progressive: bool,
    /// Compute bounds over the whole input domain instead of the perturbation ball.
    #[arg(long)]
    unrestricted_domain: bool,
    /// Use symmetric big-M constants in the ReLU encoding.
    #[arg(long)]
    symmetric_big_m: bool,
    /// Directory for persisted whole-domain bounds.
    #[arg(long, env = "PWLCERT_BOUNDS_CACHE")]
    bounds_cache: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, env = "PWLCERT_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, env = "PWLCERT_OUT", default_value = "pwlcert-out")]
    out: PathBuf,
}

impl Solver {
    fn bounds_config(&self) -> BoundsConfig {
        BoundsConfig {
            max_effort: self.bounds.into(),
            progressive: !self.no_progressive,
            symmetric_big_m: self.symmetric_big_m,
            full_time_budget_s: self.full_budget,
            ..Default::default()
        }
    }

    fn verify_config(&self, pgd: Option<PgdPrepass>) -> VerifyConfig {
        VerifyConfig {
            bounds: self.bounds_config(),
            restricted_domain: !self.unrestricted_domain,
            time_limit_s: Some(self.time_limit),
            node_limit: self.node_limit,
            pgd,
            stop_early: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            bail!(usage("--time-limit must be a positive number of seconds"));
        }
        if !(self.full_budget > 0.0 && self.full_budget.is_finite()) {
            bail!(usage("--full-budget must be a positive number of seconds"));
        }
        if self.workers == 0 {
            bail!(usage("--workers must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct Pgd {
    /// Skip the PGD pre-pass.
    #[arg(long)]
    no_pgd: bool,
    #[arg(long, default_value_t = 100)]
    pgd_steps: usize,
    /// Absolute step size (default 2.5 eps / steps).
    #[arg(long)]
    pgd_step_size: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pgd_restarts: usize,
}

#[derive(Args, Debug, Serialize)]
struct CertifyArgs {
    #[command(flatten)]
    data: Data,
    /// l∞ radius.
    #[arg(long, env = "PWLCERT_EPS")]
    eps: f64,
    #[command(flatten)]
    solver: Solver,
    #[command(flatten)]
    pgd: Pgd,
    /// Also write each sample's MILP in LP text format under <out>/models.
    #[arg(long)]
    export_lp: bool,
}

#[derive(Args, Debug, Serialize)]
struct DistortArgs {
    #[command(flatten)]
    data: Data,
    #[arg(long, value_parser = parse_norm, default_value = "linf")]
    #[serde(skip)]
    norm: Norm,
    /// Comma-separated target labels, or "any".
    #[arg(long, default_value = "any")]
    targets: String,
    /// Required lead of the target logit over the true one.
    #[arg(long, default_value_t = 0.0)]
    margin: f64,
    /// Search only within this l∞ distance; tighter bounds, and infeasibility certifies the cap.
    #[arg(long)]
    max_distortion: Option<f64>,
    #[command(flatten)]
    solver: Solver,
}

#[derive(Args, Debug, Serialize)]
struct AttackArgs {
    #[command(flatten)]
    data: Data,
    /// l∞ radius (required unless a preset supplies it).
    #[arg(long)]
    eps: Option<f64>,
    /// Named hyperparameter set.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PgdConfig::PRESETS))]
    preset: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, env = "PWLCERT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "PWLCERT_OUT", default_value = "pwlcert-out")]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ProfileArgs {
    #[command(flatten)]
    data: Data,
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',', required = true)]
    eps_list: Vec<f64>,
    /// Write each sample's bounded graph as JSON under <out>/bounds.
    #[arg(long)]
    dump_bounds: bool,
    #[command(flatten)]
    solver: Solver,
}

#[derive(Args, Debug, Serialize)]
struct SparsifyArgs {
    #[arg(long)]
    network: PathBuf,
    /// Fraction of weights to zero, one per linear layer (or one for all).
    #[arg(long, value_delimiter = ',', required = true)]
    fractions: Vec<f64>,
    /// Where to write the sparsified network.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct AblateArgs {
    #[command(flatten)]
    data: Data,
    #[arg(long, env = "PWLCERT_EPS")]
    eps: f64,
    #[command(flatten)]
    solver: Solver,
}

fn parse_norm(s: &str) -> std::result::Result<Norm, String> {
    s.parse().map_err(|e: pwlcert::Error| e.to_string())
}

/// Marks an error as a usage problem (exit code 2).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> Usage {
    Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default)))
        .with_writer(std::io::stderr)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let is_usage = e.downcast_ref::<Usage>().is_some()
                || matches!(e.downcast_ref::<pwlcert::Error>(), Some(pwlcert::Error::InvalidArgument(_)));
            ExitCode::from(if is_usage { 2 } else { 1 })
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Certify(a) => certify(a),
        Command::Distort(a) => distort(a),
        Command::Attack(a) => attack(a),
        Command::Profile(a) => profile(a),
        Command::Sparsify(a) => sparsify(a),
        Command::Ablate(a) => ablate(a),
    }
}

fn load(data: &Data) -> Result<(Network, Vec<Sample>)> {
    let net = Network::load(&data.network).with_context(|| format!("loading network {}", data.network.display()))?;
    let source = match (&data.labels, data.dataset.extension().and_then(|e| e.to_str())) {
        (Some(labels), _) => DatasetSource::Idx { images: data.dataset.clone(), labels: labels.clone() },
        (None, Some(ext)) if ext.eq_ignore_ascii_case("csv") => DatasetSource::Csv(data.dataset.clone()),
        (None, _) => bail!(usage("IDX datasets need --labels; other datasets must be .csv files")),
    };
    let samples = load_dataset(&source).with_context(|| format!("loading dataset {}", data.dataset.display()))?;
    let samples: Vec<Sample> = samples.into_iter().skip(data.start).take(data.limit.unwrap_or(usize::MAX)).collect();
    for (i, s) in samples.iter().enumerate() {
        if s.input.len() != net.input_len() {
            bail!("sample {i} has {} inputs, network expects {}", s.input.len(), net.input_len());
        }
        if s.label >= net.num_labels() {
            bail!("sample {i} has label {} but the network has {} outputs", s.label, net.num_labels());
        }
    }
    info!(samples = samples.len(), "loaded dataset");
    Ok((net, samples))
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        bail!(usage(format!("--eps must be a finite non-negative number, got {eps}")));
    }
    Ok(())
}

fn verifier(net: Network, solver: &Solver, pgd: Option<PgdPrepass>) -> Result<Verifier> {
    let cache = Arc::new(BoundsCache::new(solver.bounds_cache.clone()));
    Ok(Verifier::with_cache(net, solver.verify_config(pgd), cache)?)
}

fn prepare_out(out: &Path, config: &impl Serialize) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join("config.json"), config)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_records(out: &Path, records: &[VerificationRecord]) -> Result<()> {
    let mut lines = fs::File::create(out.join("records.jsonl"))?;
    let mut timings = fs::File::create(out.join("timings.jsonl"))?;
    for r in records {
        writeln!(lines, "{}", serde_json::to_string(r)?)?;
        writeln!(timings, "{}", serde_json::json!({"sample_id": r.sample_id, "pgd_s": r.timings.pgd_s, "build_s": r.timings.build_s, "solve_s": r.timings.solve_s}))?;
    }
    Ok(())
}

fn certify(a: CertifyArgs) -> Result<()> {
    check_eps(a.eps)?;
    a.solver.validate()?;
    let (net, samples) = load(&a.data)?;
    let pgd = (!a.pgd.no_pgd).then_some(PgdPrepass {
        steps: a.pgd.pgd_steps,
        step_size: a.pgd.pgd_step_size,
        restarts: a.pgd.pgd_restarts,
        seed: a.solver.seed,
    });
    let v = verifier(net, &a.solver, pgd)?;
    prepare_out(&a.solver.out, &serde_json::json!({"command": "certify", "args": &a, "resolved": &v.config}))?;
    let (records, summary) = v.verify_dataset(&samples, a.eps, a.solver.workers)?;
    write_records(&a.solver.out, &records)?;
    write_json(&a.solver.out.join("summary.json"), &summary)?;
    if a.export_lp {
        let dir = a.solver.out.join("models");
        fs::create_dir_all(&dir)?;
        for (i, (s, r)) in samples.iter().zip(&records).enumerate() {
            if r.stats.is_some() {
                fs::write(dir.join(format!("sample{i}.lp")), v.export_robustness_model(s, a.eps)?)?;
            }
        }
    }
    print!("{}", summary.table());
    Ok(())
}

fn parse_targets(s: &str) -> Result<Targets> {
    if s.trim().eq_ignore_ascii_case("any") {
        return Ok(Targets::Any);
    }
    let labels = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| usage(format!("bad target label {t:?}"))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if labels.is_empty() {
        bail!(usage("--targets needs at least one label"));
    }
    Ok(Targets::Labels(labels))
}

fn distort(a: DistortArgs) -> Result<()> {
    a.solver.validate()?;
    let targets = parse_targets(&a.targets)?;
    if let Some(cap) = a.max_distortion {
        check_eps(cap)?;
    }
    let (net, samples) = load(&a.data)?;
    if let Targets::Labels(ls) = &targets {
        if let Some(bad) = ls.iter().find(|&&l| l >= net.num_labels()) {
            bail!(usage(format!("target label {bad} out of range")));
        }
        if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| ls.contains(&s.label)) {
            bail!(usage(format!("--targets includes label {} which is the true label of sample {i}", s.label)));
        }
    }
    let query = DistortionQuery { norm: a.norm, targets, margin: a.margin, max_distortion: a.max_distortion };
    let v = verifier(net, &a.solver, None)?;
    prepare_out(&a.solver.out, &serde_json::json!({"command": "distort", "args": &a, "query": &query, "resolved": &v.config}))?;
    let records = v.distort_dataset(&samples, &query, a.solver.workers)?;
    write_records(&a.solver.out, &records)?;
    let summary = BatchSummary::from_records(&records);
    write_json(&a.solver.out.join("summary.json"), &summary)?;
    println!("{:>8} {:>6} {:>16} {:>12}", "sample", "label", "verdict", "distortion");
    for r in &records {
        let d = r.distortion.map_or_else(|| "-".to_string(), |d| format!("{d:.6}"));
        println!("{:>8} {:>6} {:>16} {:>12}", r.sample_id, r.label, format!("{:?}", r.verdict), d);
    }
    Ok(())
}

fn attack(a: AttackArgs) -> Result<()> {
    let mut cfg = match (&a.preset, a.eps) {
        (Some(p), eps) => {
            let mut c = PgdConfig::preset(p).expect("validated by clap");
            if let Some(e) = eps {
                c.eps = e;
            }
            c
        }
        (None, Some(eps)) => PgdConfig::new(eps),
        (None, None) => bail!(usage("attack needs --eps or --preset")),
    };
    check_eps(cfg.eps)?;
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(s) = a.step_size {
        cfg.step_size = s;
    }
    cfg.restarts = a.restarts;
    cfg.seed = a.seed;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let (net, samples) = load(&a.data)?;
    let lowered = net.lower();
    prepare_out(&a.out, &serde_json::json!({"command": "attack", "args": &a, "resolved": &cfg}))?;
    let mut lines = fs::File::create(a.out.join("records.jsonl"))?;
    let mut found = 0;
    for (i, s) in samples.iter().enumerate() {
        let r = pgd_attack(&lowered, s, &cfg)?;
        found += usize::from(r.adversarial.is_some());
        let rec = serde_json::json!({"sample_id": i, "label": s.label, "success": r.adversarial.is_some(), "adversarial": r.adversarial, "best_margin": r.best_margin});
        writeln!(lines, "{rec}")?;
    }
    let frac = found as f64 / samples.len().max(1) as f64;
    write_json(&a.out.join("summary.json"), &serde_json::json!({"samples": samples.len(), "successes": found, "pgd_lower_bound_adv_error": frac}))?;
    println!("PGD succeeded on {found} of {} samples ({:.2}%)", samples.len(), 100.0 * frac);
    Ok(())
}

fn profile(a: ProfileArgs) -> Result<()> {
    a.solver.validate()?;
    for &e in &a.eps_list {
        check_eps(e)?;
    }
    let (net, samples) = load(&a.data)?;
    let v = verifier(net, &a.solver, None)?;
    prepare_out(&a.solver.out, &serde_json::json!({"command": "profile", "args": &a, "resolved": &v.config}))?;
    let rows = v.stability_profile(&samples, &a.eps_list)?;
    write_json(&a.solver.out.join("profile.json"), &rows)?;
    let mut csv = String::from("eps,possibly_unstable,provably_active,provably_inactive,labels_eliminated,stable_fraction\n");
    println!("{:>8} {:>10} {:>10} {:>10} {:>10} {:>8}", "eps", "unstable", "active", "inactive", "elim", "stable%");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.eps, r.possibly_unstable, r.provably_active, r.provably_inactive, r.labels_eliminated, r.stable_fraction
        ));
        println!(
            "{:>8} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>7.2}%",
            r.eps,
            r.possibly_unstable,
            r.provably_active,
            r.provably_inactive,
            r.labels_eliminated,
            100.0 * r.stable_fraction
        );
    }
    fs::write(a.solver.out.join("profile.csv"), csv)?;
    if a.dump_bounds {
        let dir = a.solver.out.join("bounds");
        fs::create_dir_all(&dir)?;
        let bounds = a.solver.bounds_config();
        for &eps in &a.eps_list {
            for (i, s) in samples.iter().enumerate() {
                let g = v.bounds_for(&InputDomain::linf_ball(&s.input, eps), &bounds, true)?;
                fs::write(dir.join(format!("eps{eps}_sample{i}.json")), g.to_json())?;
            }
        }
    }
    Ok(())
}

fn sparsify(a: SparsifyArgs) -> Result<()> {
    let net = Network::load(&a.network).with_context(|| format!("loading network {}", a.network.display()))?;
    let linear = net
        .layers()
        .iter()
        .filter(|l| matches!(l, pwlcert::network::Layer::FullyConnected { .. } | pwlcert::network::Layer::Convolution { .. }))
        .count();
    let fractions = if a.fractions.len() == 1 { vec![a.fractions[0]; linear] } else { a.fractions.clone() };
    let out = net.sparsify(&fractions)?;
    out.save(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    println!("wrote {}", a.output.display());
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    check_eps(a.eps)?;
    a.solver.validate()?;
    let (net, samples) = load(&a.data)?;
    let v = verifier(net, &a.solver, None)?;
    prepare_out(&a.solver.out, &serde_json::json!({"command": "ablate", "args": &a, "resolved": &v.config}))?;
    let rows = v.ablation_report(&samples, a.eps, a.solver.workers)?;
    write_json(&a.solver.out.join("ablation.json"), &rows)?;
    println!("{:<28} {:>10} {:>10} {:>10} {:>10} {:>9}", "configuration", "build s", "solve s", "nodes", "median", "timeout%");
    for r in &rows {
        println!(
            "{:<28} {:>10.4} {:>10.4} {:>10.2} {:>10.1} {:>8.2}%",
            r.name,
            r.mean_build_s + r.shared_build_s / samples.len().max(1) as f64,
            r.mean_solve_s,
            r.mean_nodes,
            r.median_nodes,
            100.0 * r.fraction_timed_out
        );
    }
    let base = &rows[0].verdicts;
    if rows.iter().any(|r| &r.verdicts != base) {
        tracing::warn!("verdicts differ between configurations");
    }
    Ok(())
}
