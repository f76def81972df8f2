//! Experiment driver: instance generation, exact oracles, planner runs,
//! online regret traces, and slope fits. Every run writes a manifest
//! (config hash + seeds + crate version) sufficient to replay it
//! bit-identically.
//!
//! Exit codes: 0 success, 2 hypothesis violation, 3 budget overflow in
//! strict mode, 1 other failures, 64 usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use genmdp::*;

#[derive(Parser)]
#[command(name = "genmdp", version, about = "MDP planning and online learning under a generative model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random mixing MDP and write it as JSON.
    GenMdp(GenMdpArgs),
    /// Exact oracles: optimal gain/bias/span, ergodicity coefficient, and
    /// (with --horizon) the optimal finite-horizon values.
    Oracle(OracleArgs),
    /// Finite-horizon generative planning.
    PlanFinite(PlanFiniteArgs),
    /// Average-reward generative planning.
    PlanInfinite(PlanInfiniteArgs),
    /// Online learning over H-step episodes with doubling policy refresh.
    OnlineFinite(OnlineFiniteArgs),
    /// Online learning with doubling episodes and the three regret ledgers.
    OnlineInfinite(OnlineInfiniteArgs),
    /// Log-log slope fit of a trace column.
    Fit(FitArgs),
    /// Run a JSON experiment config (schema-validated; unknown keys rejected).
    Run(RunArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Named fixture: M2, riverswim6, compactD1.
    #[arg(long)]
    fixture: Option<String>,
    /// Path to a FiniteMdp JSON document.
    #[arg(long)]
    mdp: Option<PathBuf>,
    /// Net resolution per axis for compact instances.
    #[arg(long)]
    net: Option<usize>,
}

#[derive(Args)]
struct GenMdpArgs {
    #[arg(long)]
    states: usize,
    #[arg(long)]
    actions: usize,
    /// Uniform-mixture weight in [0,1]; the ergodicity coefficient is at
    /// most 1 - mixing.
    #[arg(long, default_value_t = 0.1)]
    mixing: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Exact,
    Uniform,
    SignedWorst,
}

impl From<NoiseArg> for NoiseMode {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Exact => NoiseMode::Exact,
            NoiseArg::Uniform => NoiseMode::Uniform,
            NoiseArg::SignedWorst => NoiseMode::SignedWorst,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FiniteModeArg {
    Classical,
    QuantumModern,
    QuantumSimple,
    OracleExact,
}

impl From<FiniteModeArg> for FiniteMode {
    fn from(m: FiniteModeArg) -> Self {
        match m {
            FiniteModeArg::Classical => FiniteMode::Classical,
            FiniteModeArg::QuantumModern => FiniteMode::QuantumModern,
            FiniteModeArg::QuantumSimple => FiniteMode::QuantumSimple,
            FiniteModeArg::OracleExact => FiniteMode::OracleExact,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InfiniteModeArg {
    Classical,
    Quantum,
    OracleExact,
}

impl From<InfiniteModeArg> for InfiniteMode {
    fn from(m: InfiniteModeArg) -> Self {
        match m {
            InfiniteModeArg::Classical => InfiniteMode::Classical,
            InfiniteModeArg::Quantum => InfiniteMode::Quantum,
            InfiniteModeArg::OracleExact => InfiniteMode::OracleExact,
        }
    }
}

#[derive(Args)]
struct PlanFiniteArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    horizon: usize,
    #[arg(long, value_enum)]
    mode: FiniteModeArg,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Uniform)]
    noise: NoiseArg,
    /// Constant-scale multiplier on classical sample counts.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Enforce phase budgets as hard errors.
    #[arg(long)]
    strict: bool,
    /// Optional budget for the (single) generative phase.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanInfiniteArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum)]
    mode: InfiniteModeArg,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Uniform)]
    noise: NoiseArg,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Span-contraction coefficient; auto-filled from the exact oracle when
    /// omitted.
    #[arg(long)]
    nu: Option<f64>,
    /// Bias-span upper bound Lambda; auto-filled from the exact oracle when
    /// omitted.
    #[arg(long)]
    span_bound: Option<f64>,
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OnlineFiniteArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    horizon: usize,
    #[arg(long)]
    episodes: u64,
    #[arg(long, value_enum)]
    mode: FiniteModeArg,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run this many seeds (seed, seed+1, ...) in parallel.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Uniform)]
    noise: NoiseArg,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Generative budget constant: each phase may use c_budget * tau queries.
    #[arg(long, default_value_t = 8.0)]
    budget_const: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OnlineInfiniteArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    steps: u64,
    #[arg(long, value_enum)]
    mode: InfiniteModeArg,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Uniform)]
    noise: NoiseArg,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 8.0)]
    budget_const: f64,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    span_bound: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value = "cum_inpath")]
    column: String,
    #[arg(long)]
    t_min: f64,
    #[arg(long)]
    t_max: f64,
    /// Fit |value| instead of the signed value.
    #[arg(long)]
    abs: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
}

/// JSON experiment description accepted by `genmdp run`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    task: TaskKind,
    instance: InstanceSpec,
    #[serde(default)]
    net: Option<usize>,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default)]
    horizon: Option<usize>,
    #[serde(default)]
    episodes: Option<u64>,
    #[serde(default)]
    steps: Option<u64>,
    #[serde(default)]
    eps: Option<f64>,
    #[serde(default = "default_delta")]
    delta: f64,
    seeds: Vec<u64>,
    #[serde(default)]
    noise: Option<String>,
    #[serde(default = "default_scale")]
    scale: f64,
    #[serde(default = "default_budget")]
    c_budget: f64,
    out_dir: PathBuf,
}

fn default_delta() -> f64 {
    0.1
}
fn default_scale() -> f64 {
    1.0
}
fn default_budget() -> f64 {
    8.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum TaskKind {
    PlanFinite,
    PlanInfinite,
    OnlineFinite,
    OnlineInfinite,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
enum InstanceSpec {
    #[serde(rename = "fixture")]
    Fixture(String),
    #[serde(rename = "random_mdp")]
    RandomMdp { states: usize, actions: usize, mixing: f64, seed: u64 },
    #[serde(rename = "compact")]
    Compact { dim: usize, actions: usize, beta: f64, seed: u64 },
}

enum Instance {
    Finite(FiniteMdp),
    Compact(CompactMdpSpec, Net),
}

impl Instance {
    fn env(&self) -> PlanEnv<'_> {
        match self {
            Instance::Finite(m) => PlanEnv::Finite(m),
            Instance::Compact(spec, net) => PlanEnv::Compact { spec, net },
        }
    }

    fn holder(&self) -> HolderParams {
        match self {
            Instance::Finite(_) => HolderParams::zero(),
            Instance::Compact(spec, _) => spec.holder,
        }
    }
}

fn load_instance(
    fixture_name: Option<&str>,
    mdp_path: Option<&Path>,
    net: Option<usize>,
) -> Result<Instance> {
    match (fixture_name, mdp_path) {
        (Some(name), None) => match fixture(name)? {
            FixtureKind::Finite(m) => Ok(Instance::Finite(m)),
            FixtureKind::Compact(spec) => {
                let n = net.ok_or_else(|| {
                    Error::Invalid("compact instances need --net (resolution per axis)".into())
                })?;
                let net = build_uniform_net(spec.dim(), n)?;
                Ok(Instance::Compact(spec, net))
            }
        },
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Invalid(format!("read {}: {e}", path.display())))?;
            let m: FiniteMdp = serde_json::from_str(&text)
                .map_err(|e| Error::Invalid(format!("parse {}: {e}", path.display())))?;
            Ok(Instance::Finite(m))
        }
        _ => Err(Error::Invalid("give exactly one of --fixture / --mdp".into())),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::Invalid(format!("mkdir {}: {e}", parent.display())))?;
        }
    }
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Invalid(format!("serialize: {e}")))?;
    fs::write(path, text).map_err(|e| Error::Invalid(format!("write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'a str,
    version: &'a str,
    config_sha256: String,
    config: C,
    seeds: Vec<u64>,
}

fn write_manifest<C: Serialize>(dir: &Path, config: &C, seeds: &[u64]) -> Result<()> {
    let canonical = serde_json::to_string(config).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let manifest = Manifest {
        tool: "genmdp",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: format!("{:x}", hasher.finalize()),
        config,
        seeds: seeds.to_vec(),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

#[derive(Serialize)]
struct OracleReport {
    g_star: f64,
    bias: Vec<f64>,
    bias_span: f64,
    nu: f64,
    optimal_rule: DecisionRule,
    v_star: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct TraceSidecar<'a> {
    g_star: f64,
    episodes: &'a [EpisodeLog],
    ledger: &'a [LedgerRecord],
    overflow: bool,
}

fn run_command(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenMdp(a) => {
            let m = generate_random_mdp(a.states, a.actions, a.mixing, a.seed)?;
            write_json(&a.out, &m)
        }
        Command::Oracle(a) => {
            let inst = load_instance(
                a.instance.fixture.as_deref(),
                a.instance.mdp.as_deref(),
                a.instance.net,
            )?;
            let mdp = inst.env().induced_finite()?.into_owned();
            let opt = exact_gain_bias_optimal(&mdp)?;
            let nu = ergodicity_coefficient(&mdp).nu;
            let v_star = match a.horizon {
                Some(h) => Some(exact_backward_induction(&mdp, HorizonSpec::new(h)?)?.0),
                None => None,
            };
            write_json(
                &a.out,
                &OracleReport {
                    g_star: opt.gain,
                    bias: opt.bias,
                    bias_span: opt.span,
                    nu,
                    optimal_rule: opt.rule,
                    v_star,
                },
            )
        }
        Command::PlanFinite(a) => {
            let inst = load_instance(
                a.instance.fixture.as_deref(),
                a.instance.mdp.as_deref(),
                a.instance.net,
            )?;
            let env = inst.env();
            let holder = inst.holder();
            let h = HorizonSpec::new(a.horizon)?;
            let mut ledger = if a.strict { QueryLedger::strict() } else { QueryLedger::new() };
            if let Some(b) = a.budget {
                ledger.open_phase(0, b);
            }
            let qcfg = QuantumEmulationConfig::with_mode(a.noise.into());
            let mut rng = SamplerConfig::new(a.seed, 0).rng();
            let out = match FiniteMode::from(a.mode) {
                FiniteMode::Classical => classical_backward_induction(
                    &env, h, a.eps, a.delta, &holder, a.scale, &mut ledger, 0, &mut rng,
                )?,
                FiniteMode::QuantumModern => quantum_modern_backward_induction(
                    &env, h, a.eps, a.delta, &holder, &qcfg, &mut ledger, 0, &mut rng,
                )?,
                FiniteMode::QuantumSimple => quantum_simple_backward_induction(
                    &env, h, a.eps, a.delta, &holder, &qcfg, &mut ledger, 0, &mut rng,
                )?,
                FiniteMode::OracleExact => {
                    return Err(Error::Invalid(
                        "oracle-exact is an online-loop control, use `oracle`".into(),
                    ))
                }
            };
            write_json(&a.out, &out)
        }
        Command::PlanInfinite(a) => {
            let inst = load_instance(
                a.instance.fixture.as_deref(),
                a.instance.mdp.as_deref(),
                a.instance.net,
            )?;
            let env = inst.env();
            let holder = inst.holder();
            let induced = env.induced_finite()?;
            let nu = match a.nu {
                Some(v) => v,
                None => ergodicity_coefficient(&induced).nu,
            };
            let span_bound = match a.span_bound {
                Some(v) => v,
                None => exact_gain_bias_optimal(&induced)?.span,
            };
            let mut cfg = VIConfig::new(a.eps, span_bound, nu, a.delta);
            cfg.holder = holder;
            cfg.scale = a.scale;
            let mut ledger = if a.strict { QueryLedger::strict() } else { QueryLedger::new() };
            if let Some(b) = a.budget {
                ledger.open_phase(0, b);
            }
            let qcfg = QuantumEmulationConfig::with_mode(a.noise.into());
            let mut rng = SamplerConfig::new(a.seed, 0).rng();
            let out = match InfiniteMode::from(a.mode) {
                InfiniteMode::Classical => {
                    classical_value_iteration(&env, &cfg, &mut ledger, 0, &mut rng)?
                }
                InfiniteMode::Quantum => {
                    quantum_value_iteration(&env, &cfg, &qcfg, &mut ledger, 0, &mut rng)?
                }
                InfiniteMode::OracleExact => {
                    return Err(Error::Invalid(
                        "oracle-exact is an online-loop control, use `oracle`".into(),
                    ))
                }
            };
            write_json(&a.out, &out)
        }
        Command::OnlineFinite(a) => {
            let inst = load_instance(
                a.instance.fixture.as_deref(),
                a.instance.mdp.as_deref(),
                a.instance.net,
            )?;
            let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
            fs::create_dir_all(&a.out).map_err(|e| Error::Invalid(e.to_string()))?;
            write_manifest(
                &a.out,
                &serde_json::json!({
                    "task": "online-finite",
                    "fixture": a.instance.fixture,
                    "mdp": a.instance.mdp,
                    "net": a.instance.net,
                    "horizon": a.horizon,
                    "episodes": a.episodes,
                    "mode": format!("{:?}", FiniteMode::from(a.mode)),
                    "delta": a.delta,
                    "noise": format!("{:?}", NoiseMode::from(a.noise)),
                    "scale": a.scale,
                    "budget_const": a.budget_const,
                }),
                &seeds,
            )?;
            run_seeds(&seeds, &a.out, |seed| {
                let mut cfg = OnlineConfig::new(a.delta, seed);
                cfg.scale = a.scale;
                cfg.c_budget = a.budget_const;
                cfg.qcfg = QuantumEmulationConfig::with_mode(a.noise.into());
                run_online_finite(
                    &inst.env(),
                    HorizonSpec::new(a.horizon)?,
                    a.episodes,
                    a.mode.into(),
                    &inst.holder(),
                    &cfg,
                )
            })
        }
        Command::OnlineInfinite(a) => {
            let inst = load_instance(
                a.instance.fixture.as_deref(),
                a.instance.mdp.as_deref(),
                a.instance.net,
            )?;
            let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
            fs::create_dir_all(&a.out).map_err(|e| Error::Invalid(e.to_string()))?;
            write_manifest(
                &a.out,
                &serde_json::json!({
                    "task": "online-infinite",
                    "fixture": a.instance.fixture,
                    "mdp": a.instance.mdp,
                    "net": a.instance.net,
                    "steps": a.steps,
                    "mode": format!("{:?}", InfiniteMode::from(a.mode)),
                    "delta": a.delta,
                    "noise": format!("{:?}", NoiseMode::from(a.noise)),
                    "scale": a.scale,
                    "budget_const": a.budget_const,
                    "nu": a.nu,
                    "span_bound": a.span_bound,
                }),
                &seeds,
            )?;
            run_seeds(&seeds, &a.out, |seed| {
                let mut cfg = OnlineConfig::new(a.delta, seed);
                cfg.scale = a.scale;
                cfg.c_budget = a.budget_const;
                cfg.qcfg = QuantumEmulationConfig::with_mode(a.noise.into());
                run_online_infinite(
                    &inst.env(),
                    a.steps,
                    a.mode.into(),
                    &inst.holder(),
                    a.nu,
                    a.span_bound,
                    &cfg,
                )
            })
        }
        Command::Fit(a) => {
            let (ts, ys) = read_csv_column(&a.csv, &a.column)?;
            let ys: Vec<f64> = if a.abs { ys.iter().map(|v| v.abs()).collect() } else { ys };
            let fit = fit_loglog_slope(&ts, &ys, (a.t_min, a.t_max))?;
            println!(
                "slope {:.4}  intercept {:.4}  residual {:.4}  points {}",
                fit.exponent, fit.intercept, fit.residual, fit.points
            );
            if let Some(out) = a.out {
                write_json(&out, &fit)?;
            }
            Ok(())
        }
        Command::Run(a) => {
            let text = fs::read_to_string(&a.config)
                .map_err(|e| Error::Invalid(format!("read {}: {e}", a.config.display())))?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Invalid(format!("config schema: {e}")))?;
            run_experiment(cfg)
        }
    }
}

fn run_seeds(
    seeds: &[u64],
    out_dir: &Path,
    run: impl Fn(u64) -> Result<RegretTrace> + Sync,
) -> Result<()> {
    use rayon::prelude::*;
    let results: Vec<(u64, Result<RegretTrace>)> =
        seeds.par_iter().map(|&seed| (seed, run(seed))).collect();
    for (seed, result) in results {
        let trace = result?;
        let csv_path = out_dir.join(format!("trace_seed{seed}.csv"));
        let mut file = fs::File::create(&csv_path).map_err(|e| Error::Invalid(e.to_string()))?;
        trace
            .write_csv(std::io::BufWriter::new(&mut file))
            .map_err(|e| Error::Invalid(e.to_string()))?;
        let sidecar = TraceSidecar {
            g_star: trace.g_star,
            episodes: &trace.raw.episodes,
            ledger: &trace.ledger,
            overflow: trace.any_overflow(),
        };
        write_json(&out_dir.join(format!("episodes_seed{seed}.json")), &sidecar)?;
    }
    Ok(())
}

fn read_csv_column(path: &Path, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Invalid("empty csv".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let t_idx = cols
        .iter()
        .position(|c| *c == "t")
        .ok_or_else(|| Error::Invalid("csv lacks a `t` column".into()))?;
    let y_idx = cols
        .iter()
        .position(|c| *c == column)
        .ok_or_else(|| Error::Invalid(format!("csv lacks column `{column}`")))?;
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() <= t_idx.max(y_idx) {
            continue;
        }
        let t: f64 = fields[t_idx].parse().map_err(|e| Error::Invalid(format!("bad t: {e}")))?;
        if fields[y_idx].is_empty() {
            continue;
        }
        let y: f64 =
            fields[y_idx].parse().map_err(|e| Error::Invalid(format!("bad value: {e}")))?;
        ts.push(t);
        ys.push(y);
    }
    Ok((ts, ys))
}

fn run_experiment(cfg: ExperimentConfig) -> Result<()> {
    let inst = match &cfg.instance {
        InstanceSpec::Fixture(name) => match fixture(name)? {
            FixtureKind::Finite(m) => Instance::Finite(m),
            FixtureKind::Compact(spec) => {
                let n =
                    cfg.net.ok_or_else(|| Error::Invalid("compact instance needs `net`".into()))?;
                let net = build_uniform_net(spec.dim(), n)?;
                Instance::Compact(spec, net)
            }
        },
        InstanceSpec::RandomMdp { states, actions, mixing, seed } => {
            Instance::Finite(generate_random_mdp(*states, *actions, *mixing, *seed)?)
        }
        InstanceSpec::Compact { dim, actions, beta, seed } => {
            let spec = make_holder_family(*dim, *actions, *beta, *seed)?;
            let n = cfg.net.ok_or_else(|| Error::Invalid("compact instance needs `net`".into()))?;
            let net = build_uniform_net(spec.dim(), n)?;
            Instance::Compact(spec, net)
        }
    };
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Invalid(e.to_string()))?;
    write_manifest(&cfg.out_dir, &cfg, &cfg.seeds)?;

    let noise = match cfg.noise.as_deref() {
        None | Some("uniform") => NoiseMode::Uniform,
        Some("exact") => NoiseMode::Exact,
        Some("signed_worst") => NoiseMode::SignedWorst,
        Some(other) => return Err(Error::Invalid(format!("unknown noise mode `{other}`"))),
    };

    match cfg.task {
        TaskKind::OnlineFinite => {
            let mode = parse_finite_mode(cfg.mode.as_deref())?;
            let h = HorizonSpec::new(
                cfg.horizon.ok_or_else(|| Error::Invalid("missing horizon".into()))?,
            )?;
            let episodes =
                cfg.episodes.ok_or_else(|| Error::Invalid("missing episodes".into()))?;
            run_seeds(&cfg.seeds, &cfg.out_dir, |seed| {
                let mut ocfg = OnlineConfig::new(cfg.delta, seed);
                ocfg.scale = cfg.scale;
                ocfg.c_budget = cfg.c_budget;
                ocfg.qcfg = QuantumEmulationConfig::with_mode(noise);
                run_online_finite(&inst.env(), h, episodes, mode, &inst.holder(), &ocfg)
            })
        }
        TaskKind::OnlineInfinite => {
            let mode = parse_infinite_mode(cfg.mode.as_deref())?;
            let steps = cfg.steps.ok_or_else(|| Error::Invalid("missing steps".into()))?;
            run_seeds(&cfg.seeds, &cfg.out_dir, |seed| {
                let mut ocfg = OnlineConfig::new(cfg.delta, seed);
                ocfg.scale = cfg.scale;
                ocfg.c_budget = cfg.c_budget;
                ocfg.qcfg = QuantumEmulationConfig::with_mode(noise);
                run_online_infinite(&inst.env(), steps, mode, &inst.holder(), None, None, &ocfg)
            })
        }
        TaskKind::PlanFinite => {
            let mode = parse_finite_mode(cfg.mode.as_deref())?;
            let h = HorizonSpec::new(
                cfg.horizon.ok_or_else(|| Error::Invalid("missing horizon".into()))?,
            )?;
            let eps = cfg.eps.ok_or_else(|| Error::Invalid("missing eps".into()))?;
            for &seed in &cfg.seeds {
                let env = inst.env();
                let holder = inst.holder();
                let qcfg = QuantumEmulationConfig::with_mode(noise);
                let mut ledger = QueryLedger::new();
                let mut rng = SamplerConfig::new(seed, 0).rng();
                let out = match mode {
                    FiniteMode::Classical => classical_backward_induction(
                        &env, h, eps, cfg.delta, &holder, cfg.scale, &mut ledger, 0, &mut rng,
                    )?,
                    FiniteMode::QuantumModern => quantum_modern_backward_induction(
                        &env, h, eps, cfg.delta, &holder, &qcfg, &mut ledger, 0, &mut rng,
                    )?,
                    FiniteMode::QuantumSimple => quantum_simple_backward_induction(
                        &env, h, eps, cfg.delta, &holder, &qcfg, &mut ledger, 0, &mut rng,
                    )?,
                    FiniteMode::OracleExact => {
                        return Err(Error::Invalid("oracle-exact is an online-loop control".into()))
                    }
                };
                write_json(&cfg.out_dir.join(format!("plan_seed{seed}.json")), &out)?;
            }
            Ok(())
        }
        TaskKind::PlanInfinite => {
            let mode = parse_infinite_mode(cfg.mode.as_deref())?;
            let eps = cfg.eps.ok_or_else(|| Error::Invalid("missing eps".into()))?;
            let induced = inst.env().induced_finite()?.into_owned();
            let nu = ergodicity_coefficient(&induced).nu;
            let span_bound = exact_gain_bias_optimal(&induced)?.span;
            for &seed in &cfg.seeds {
                let env = inst.env();
                let mut vic = VIConfig::new(eps, span_bound, nu, cfg.delta);
                vic.holder = inst.holder();
                vic.scale = cfg.scale;
                let qcfg = QuantumEmulationConfig::with_mode(noise);
                let mut ledger = QueryLedger::new();
                let mut rng = SamplerConfig::new(seed, 0).rng();
                let out = match mode {
                    InfiniteMode::Classical => {
                        classical_value_iteration(&env, &vic, &mut ledger, 0, &mut rng)?
                    }
                    InfiniteMode::Quantum => {
                        quantum_value_iteration(&env, &vic, &qcfg, &mut ledger, 0, &mut rng)?
                    }
                    InfiniteMode::OracleExact => {
                        return Err(Error::Invalid("oracle-exact is an online-loop control".into()))
                    }
                };
                write_json(&cfg.out_dir.join(format!("vi_seed{seed}.json")), &out)?;
            }
            Ok(())
        }
    }
}

fn parse_finite_mode(s: Option<&str>) -> Result<FiniteMode> {
    match s {
        Some("classical") => Ok(FiniteMode::Classical),
        Some("quantum_modern") => Ok(FiniteMode::QuantumModern),
        Some("quantum_simple") => Ok(FiniteMode::QuantumSimple),
        Some("oracle_exact") => Ok(FiniteMode::OracleExact),
        other => Err(Error::Invalid(format!("unknown finite-horizon mode {other:?}"))),
    }
}

fn parse_infinite_mode(s: Option<&str>) -> Result<InfiniteMode> {
    match s {
        Some("classical") => Ok(InfiniteMode::Classical),
        Some("quantum") => Ok(InfiniteMode::Quantum),
        Some("oracle_exact") => Ok(InfiniteMode::OracleExact),
        other => Err(Error::Invalid(format!("unknown infinite-horizon mode {other:?}"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep 2/3 reserved for hypothesis/budget failures
            let _ = e.print();
            return ExitCode::from(64);
        }
    };
    match run_command(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Hypothesis(_) => ExitCode::from(2),
                Error::BudgetOverflow { .. } => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
