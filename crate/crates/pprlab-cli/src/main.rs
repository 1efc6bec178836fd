//! `pprlab` — batch driver for the personalized-PageRank laboratory.
//!
//! Subcommands: `generate` | `ppr` | `estimate` | `lift-check` | `experiment`
//! | `verify`. Every command takes an explicit `--seed` (there are no
//! wall-clock defaults anywhere), echoes its full configuration into every
//! output it writes, and produces byte-identical output on re-runs at any
//! `--threads` setting.
//!
//! Exit codes: `0` success, `1` check failure, `2` usage or configuration
//! error.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pprlab::estimators::{backward_push, fora, forward_push, mc_estimate, EstimatorError, McConfig};
use pprlab::exact::{closed_form_vector, exact_ppr, ExactError, DEFAULT_TOL};
use pprlab::experiments::{
    frequency_vs_formula, posterior_splits, success_curve, success_curve_csv, ExperimentError,
    Strategy, SuccessCurveConfig,
};
use pprlab::graph::{GraphBuilder, GraphError, LabeledMultigraph, NodeId};
use pprlab::instance::{
    build_instance, choose_params_a, choose_params_r, multiplicity_tail, sample_sigma,
    InstanceError, InstanceParams, LabelKind,
};
use pprlab::lift::{build_lift, lift_transform_deviation, LiftError, LiftSpec};
use pprlab::oracle::{ArcOracle, Budget, InitialCoverage, OracleError, Query, QueryOracle};
use pprlab::util::{child_seed, trial_rng};
use rand::Rng;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "pprlab",
    version,
    about = "Personalized-PageRank laboratory: hard instances, budgeted oracles, estimators, lifts, experiments"
)]
struct Cli {
    /// Worker threads for parallel trials (0 = all available cores).
    /// Results are identical at every setting.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a hard instance and write it as a graph file plus metadata.
    Generate(GenerateArgs),
    /// Solve PPR exactly on an instance or a graph file.
    Ppr(PprArgs),
    /// Run an oracle-based estimator (Monte Carlo, pushes, or their combination).
    Estimate(EstimateArgs),
    /// Lift an instance to a simple graph and check the decay transform.
    LiftCheck(LiftCheckArgs),
    /// Run a measurement campaign: success curve, multiplicity tail, or posterior.
    Experiment(ExperimentArgs),
    /// Self-check the laboratory (closed forms, normalization, lift, frequencies)
    /// or validate a graph file.
    Verify(VerifyArgs),
}

/// Instance-shape flags shared by most commands.
#[derive(Args, Serialize, Clone)]
struct ShapeArgs {
    /// Group size n (each of the four node groups has n nodes).
    #[arg(long)]
    n: Option<u32>,
    /// Heavy in-degree D.
    #[arg(long = "D")]
    heavy: Option<u32>,
    /// Degree gap d (heavy side receives D, light side D−d).
    #[arg(long = "d")]
    gap: Option<u32>,
    /// Padding size r (extra feeder/sink nodes diluting useful ports).
    #[arg(long = "r", default_value_t = 0)]
    pad: u32,
    /// Walk decay α.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

impl ShapeArgs {
    fn params(&self) -> Result<InstanceParams, CliError> {
        match (self.n, self.heavy, self.gap) {
            (Some(n), Some(heavy), Some(gap)) => {
                Ok(InstanceParams::new(n, heavy, gap, self.pad, self.alpha)?)
            }
            _ => Err(CliError::Config(
                "an explicit shape needs all of --n, --D, --d".into(),
            )),
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Derive the shape for additive accuracy ε (with --beta, --n0, --m0).
    #[arg(long)]
    eps: Option<f64>,
    /// Budget exponent β for the additive regime.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Derive the shape for relative accuracy c above threshold δ
    /// (with --c, --n0, --m0).
    #[arg(long)]
    delta: Option<f64>,
    /// Relative accuracy c for the relative regime.
    #[arg(long, default_value_t = 0.25)]
    c: f64,
    /// Ambient node budget for the derived regimes.
    #[arg(long)]
    n0: Option<f64>,
    /// Ambient edge/query budget for the derived regimes.
    #[arg(long)]
    m0: Option<f64>,
    /// Master seed (mandatory; nothing falls back to wall-clock time).
    #[arg(long)]
    seed: u64,
    /// Graph file to write; metadata goes to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PprArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Solve on this graph file instead of a sampled instance.
    #[arg(long, conflicts_with_all = ["n", "heavy", "gap"])]
    graph: Option<PathBuf>,
    /// Source node label.
    #[arg(long, default_value_t = 1)]
    source: u32,
    /// Solver tolerance (sup-norm of the iteration increment).
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Master seed (used to sample the instance when no --graph is given).
    #[arg(long)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Estimate on this graph file instead of a sampled instance.
    #[arg(long, conflicts_with_all = ["n", "heavy", "gap"])]
    graph: Option<PathBuf>,
    /// Which estimator to run.
    #[arg(long, value_enum)]
    method: Method,
    /// Source node (mc, forward-push, fora).
    #[arg(long, default_value_t = 1)]
    source: u32,
    /// Target node (backward-push only).
    #[arg(long)]
    target: Option<u32>,
    /// Walk count (mc, fora).
    #[arg(long, default_value_t = 10_000)]
    walks: u64,
    /// Push threshold r_max (forward-push, backward-push, fora).
    #[arg(long = "r-max", default_value_t = 1e-4)]
    r_max: f64,
    /// Query budget (unlimited when omitted).
    #[arg(long)]
    budget: Option<u64>,
    /// Master seed for instance sampling, oracle tie-breaking, and walks.
    #[arg(long)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct LiftCheckArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Check this graph file instead of a sampled instance.
    #[arg(long, conflicts_with_all = ["n", "heavy", "gap"])]
    graph: Option<PathBuf>,
    /// Lift order L (defaults to the graph's edge multiplicity).
    #[arg(long = "lift-l")]
    lift_l: Option<u32>,
    /// Largest acceptable deviation of the decay-transform identity.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Master seed (instance sampling and offset assignment).
    #[arg(long)]
    seed: u64,
    /// Optional JSON report file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Which campaign to run.
    #[arg(long, value_enum)]
    mode: Mode,
    #[command(flatten)]
    shape: ShapeArgs,
    /// Budget scales γ (budget = ⌊γ·n·D⌋), comma-separated.
    #[arg(long = "gamma-grid", default_value = "0,0.25,0.5,1,2,3,4")]
    gamma_grid: String,
    /// Trials per grid point (success-curve), samples (multiplicity).
    #[arg(long, default_value_t = 200)]
    trials: u64,
    /// Split-recovery strategy (success-curve).
    #[arg(long, value_enum, default_value_t = StrategyArg::PortCount)]
    strategy: StrategyArg,
    /// Walk cap per trial for the mc strategy.
    #[arg(long = "walk-cap", default_value_t = SuccessCurveConfig::DEFAULT_WALK_CAP)]
    walk_cap: u64,
    /// Multiplicity threshold L (multiplicity mode).
    #[arg(long = "lift-l", default_value_t = 4)]
    lift_l: u32,
    /// In-ports probed per pool node (posterior mode).
    #[arg(long, default_value_t = 1)]
    probes: u32,
    /// Master seed.
    #[arg(long)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    /// Validate this graph file (format, port consistency, normalization)
    /// instead of running the desk suite.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Walk decay α for the normalization check in graph mode.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Tolerance for the deterministic checks. Loosening it never turns a
    /// pass into a failure.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Trials for the statistical frequency check in the desk suite.
    #[arg(long, default_value_t = 20_000)]
    trials: u64,
    /// Master seed.
    #[arg(long)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Method {
    Mc,
    ForwardPush,
    BackwardPush,
    Fora,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    SuccessCurve,
    Multiplicity,
    Posterior,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum StrategyArg {
    Mc,
    PortCount,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Mc => Strategy::Mc,
            StrategyArg::PortCount => Strategy::PortCount,
        }
    }
}

// ---------------------------------------------------------------------------
// Error handling and exit codes
// ---------------------------------------------------------------------------

enum CliError {
    /// A verification check failed (exit 1).
    Check(String),
    /// Bad configuration, infeasible parameters, or I/O trouble (exit 2).
    Config(String),
}

impl From<InstanceError> for CliError {
    fn from(e: InstanceError) -> Self {
        CliError::Config(e.to_string())
    }
}
impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        CliError::Config(e.to_string())
    }
}
impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Config(e.to_string())
    }
}
impl From<LiftError> for CliError {
    fn from(e: LiftError) -> Self {
        CliError::Config(e.to_string())
    }
}
impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Config(e.to_string())
    }
}
impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Oracle(OracleError::BudgetExhausted) => {
                CliError::Check("query budget exhausted before the estimator finished".into())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}
impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Config(e.to_string())
    }
}
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o error: {e}"))
    }
}

fn main() {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // Thread count is a performance knob only; every parallel driver
        // restores trial order before aggregating.
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Ppr(a) => cmd_ppr(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::LiftCheck(a) => cmd_lift_check(&a),
        Command::Experiment(a) => cmd_experiment(&a),
        Command::Verify(a) => cmd_verify(&a),
    };
    match result {
        Ok(()) => {}
        Err(CliError::Check(msg)) => {
            eprintln!("check failed: {msg}");
            std::process::exit(1);
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, content)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// An instance sampled from shape flags, or a graph loaded from file.
struct GraphSource {
    graph: LabeledMultigraph,
    params: Option<InstanceParams>,
    alpha: f64,
}

fn load_source(
    graph: &Option<PathBuf>,
    shape: &ShapeArgs,
    seed: u64,
) -> Result<GraphSource, CliError> {
    match graph {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let g = LabeledMultigraph::deserialize(&text)?;
            Ok(GraphSource { graph: g, params: None, alpha: shape.alpha })
        }
        None => {
            let p = shape.params()?;
            let sigma = sample_sigma(&p, &mut trial_rng(seed, 0));
            let g = build_instance(&p, &sigma)?;
            Ok(GraphSource { graph: g, params: Some(p), alpha: p.alpha })
        }
    }
}

fn parse_gamma_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let grid: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let grid = grid.map_err(|e| CliError::Config(format!("bad --gamma-grid entry: {e}")))?;
    if grid.is_empty() || grid.iter().any(|&g| !g.is_finite() || g < 0.0) {
        return Err(CliError::Config(
            "--gamma-grid needs one or more finite values >= 0".into(),
        ));
    }
    Ok(grid)
}

fn config_json<T: Serialize>(cfg: &T) -> String {
    serde_json::to_string(cfg).expect("configs serialize")
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct GenerateConfig<'a> {
    command: &'a str,
    params: &'a InstanceParams,
    seed: u64,
    out: String,
}

#[derive(Serialize)]
struct GenerateMetadata<'a> {
    config: GenerateConfig<'a>,
    split: &'a [u32],
    multiplicity: u32,
    node_count: u32,
    edge_count: u64,
}

fn cmd_generate(a: &GenerateArgs) -> Result<(), CliError> {
    let p = if a.shape.n.is_some() {
        a.shape.params()?
    } else if let Some(eps) = a.eps {
        let (n0, m0) = regime_budgets(a)?;
        let choice = choose_params_a(n0, m0, eps, a.beta, a.shape.alpha, None)?;
        println!(
            "additive regime: n={} D={} d={} (achieved gap {:.3e})",
            choice.params.n, choice.params.heavy, choice.params.gap, choice.gap
        );
        choice.params
    } else if let Some(delta) = a.delta {
        let (n0, m0) = regime_budgets(a)?;
        if n0 < 2.0 || n0.fract() != 0.0 || n0 > f64::from(u32::MAX) {
            return Err(CliError::Config("--n0 must be an integer >= 2 for --delta".into()));
        }
        let choice = choose_params_r(n0 as u32, m0, delta, a.c, a.shape.alpha)?;
        println!(
            "relative regime: n={} D={} d={} r={} (δ={:.3e}, ratio {:.3})",
            choice.params.n,
            choice.params.heavy,
            choice.params.gap,
            choice.params.pad,
            choice.delta,
            choice.ratio
        );
        choice.params
    } else {
        return Err(CliError::Config(
            "give an explicit shape (--n --D --d) or a regime (--eps / --delta with --n0 --m0)"
                .into(),
        ));
    };

    let sigma = sample_sigma(&p, &mut trial_rng(a.seed, 0));
    let g = build_instance(&p, &sigma)?;
    fs::write(&a.out, g.serialize())?;
    let meta = GenerateMetadata {
        config: GenerateConfig {
            command: "generate",
            params: &p,
            seed: a.seed,
            out: a.out.display().to_string(),
        },
        split: &sigma.sp,
        multiplicity: g.multiplicity(),
        node_count: g.node_count(),
        edge_count: g.edge_count(),
    };
    let meta_path = PathBuf::from(format!("{}.json", a.out.display()));
    fs::write(&meta_path, format!("{}\n", config_json(&meta)))?;
    println!(
        "generated instance: {} nodes, {} edges, multiplicity {} -> {} (+ {})",
        g.node_count(),
        g.edge_count(),
        g.multiplicity(),
        a.out.display(),
        meta_path.display()
    );
    Ok(())
}

fn regime_budgets(a: &GenerateArgs) -> Result<(f64, f64), CliError> {
    match (a.n0, a.m0) {
        (Some(n0), Some(m0)) => Ok((n0, m0)),
        _ => Err(CliError::Config(
            "the derived regimes need both --n0 and --m0".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// ppr
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PprConfig<'a> {
    command: &'a str,
    graph: Option<String>,
    params: Option<&'a InstanceParams>,
    source: u32,
    alpha: f64,
    tol: f64,
    seed: u64,
    format: Format,
}

fn cmd_ppr(a: &PprArgs) -> Result<(), CliError> {
    let src = load_source(&a.graph, &a.shape, a.seed)?;
    let pi = exact_ppr(&src.graph, NodeId(a.source), src.alpha, a.tol)?;
    let cfg = PprConfig {
        command: "ppr",
        graph: a.graph.as_ref().map(|p| p.display().to_string()),
        params: src.params.as_ref(),
        source: a.source,
        alpha: src.alpha,
        tol: a.tol,
        seed: a.seed,
        format: a.format,
    };
    let content = match a.format {
        Format::Csv => format!("# {}\n{}", config_json(&cfg), pi.to_csv()),
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                config: &'a PprConfig<'a>,
                values: &'a [f64],
            }
            format!("{}\n", config_json(&Out { config: &cfg, values: &pi.values }))
        }
    };
    emit(&a.out, &content)
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EstimateConfig<'a> {
    command: &'a str,
    graph: Option<String>,
    params: Option<&'a InstanceParams>,
    method: Method,
    source: u32,
    target: Option<u32>,
    walks: u64,
    r_max: f64,
    budget: Option<u64>,
    seed: u64,
    format: Format,
}

#[derive(Serialize)]
struct EstimateSummary {
    queries: u64,
    walks: u64,
    complete: bool,
}

fn cmd_estimate(a: &EstimateArgs) -> Result<(), CliError> {
    let src = load_source(&a.graph, &a.shape, a.seed)?;
    let budget = match a.budget {
        Some(b) => Budget::queries(b),
        None => Budget::unlimited(),
    };
    let mut oracle = ArcOracle::new(
        &src.graph,
        budget,
        InitialCoverage::All,
        child_seed(a.seed, 1),
    );
    let alpha = src.alpha;
    let (estimate, summary) = match a.method {
        Method::Mc => {
            let r = mc_estimate(
                &mut oracle,
                NodeId(a.source),
                alpha,
                &McConfig { walks: a.walks, seed: child_seed(a.seed, 2) },
            )?;
            (
                r.estimate,
                EstimateSummary { queries: r.queries, walks: r.walks, complete: r.complete },
            )
        }
        Method::ForwardPush => {
            let before = oracle.query_count();
            let st = forward_push(&mut oracle, NodeId(a.source), alpha, a.r_max)?;
            (
                st.estimates,
                EstimateSummary {
                    queries: oracle.query_count() - before,
                    walks: 0,
                    complete: true,
                },
            )
        }
        Method::BackwardPush => {
            let target = a.target.ok_or_else(|| {
                CliError::Config("backward-push needs --target".into())
            })?;
            let before = oracle.query_count();
            let st = backward_push(&mut oracle, NodeId(target), alpha, a.r_max)?;
            (
                st.estimates,
                EstimateSummary {
                    queries: oracle.query_count() - before,
                    walks: 0,
                    complete: true,
                },
            )
        }
        Method::Fora => {
            let r = fora(
                &mut oracle,
                NodeId(a.source),
                alpha,
                a.r_max,
                a.walks,
                child_seed(a.seed, 2),
            )?;
            (
                r.estimate,
                EstimateSummary { queries: r.queries, walks: r.walks, complete: r.complete },
            )
        }
    };
    let cfg = EstimateConfig {
        command: "estimate",
        graph: a.graph.as_ref().map(|p| p.display().to_string()),
        params: src.params.as_ref(),
        method: a.method,
        source: a.source,
        target: a.target,
        walks: a.walks,
        r_max: a.r_max,
        budget: a.budget,
        seed: a.seed,
        format: a.format,
    };
    let rows: Vec<(u32, f64)> = estimate.iter().map(|(&v, &x)| (v.0, x)).collect();
    let content = match a.format {
        Format::Csv => {
            let mut s = format!(
                "# {}\n# result {}\nnode,value\n",
                config_json(&cfg),
                config_json(&summary)
            );
            for (v, x) in &rows {
                let _ = writeln!(s, "{v},{x}");
            }
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                config: &'a EstimateConfig<'a>,
                result: &'a EstimateSummary,
                estimate: &'a [(u32, f64)],
            }
            format!(
                "{}\n",
                config_json(&Out { config: &cfg, result: &summary, estimate: &rows })
            )
        }
    };
    emit(&a.out, &content)
}

// ---------------------------------------------------------------------------
// lift-check
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct LiftCheckConfig<'a> {
    command: &'a str,
    graph: Option<String>,
    params: Option<&'a InstanceParams>,
    lift_l: u32,
    tol: f64,
    seed: u64,
}

#[derive(Serialize)]
struct LiftReport<'a> {
    config: LiftCheckConfig<'a>,
    multiplicity: u32,
    lift_nodes: u32,
    lift_edges: u64,
    simple: bool,
    transform_deviation: f64,
    ok: bool,
}

fn cmd_lift_check(a: &LiftCheckArgs) -> Result<(), CliError> {
    let src = load_source(&a.graph, &a.shape, a.seed)?;
    let mu = src.graph.multiplicity();
    let l = a.lift_l.unwrap_or(mu.max(1));
    let spec = LiftSpec::sample(&src.graph, l, &mut trial_rng(a.seed, 3))?;
    let lifted = build_lift(&src.graph, &spec)?;
    let simple = lifted.multiplicity() <= 1;
    let deviation = lift_transform_deviation(&src.graph, &spec, src.alpha)?;
    let ok = simple && deviation <= a.tol;
    let report = LiftReport {
        config: LiftCheckConfig {
            command: "lift-check",
            graph: a.graph.as_ref().map(|p| p.display().to_string()),
            params: src.params.as_ref(),
            lift_l: l,
            tol: a.tol,
            seed: a.seed,
        },
        multiplicity: mu,
        lift_nodes: lifted.node_count(),
        lift_edges: lifted.edge_count(),
        simple,
        transform_deviation: deviation,
        ok,
    };
    if let Some(out) = &a.out {
        fs::write(out, format!("{}\n", config_json(&report)))?;
        println!("wrote {}", out.display());
    }
    println!(
        "lift-check: multiplicity {mu}, order {l}, lift {}x{} — simple: {}, transform deviation {:.3e} (tol {:.1e})",
        report.lift_nodes, report.lift_edges, simple, deviation, a.tol
    );
    if ok {
        println!("lift-check: ok");
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "lift not simple or transform deviation {deviation:.3e} above tol {:.1e}",
            a.tol
        )))
    }
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

fn cmd_experiment(a: &ExperimentArgs) -> Result<(), CliError> {
    match a.mode {
        Mode::SuccessCurve => experiment_success_curve(a),
        Mode::Multiplicity => experiment_multiplicity(a),
        Mode::Posterior => experiment_posterior(a),
    }
}

fn experiment_success_curve(a: &ExperimentArgs) -> Result<(), CliError> {
    let params = a.shape.params()?;
    let gammas = parse_gamma_grid(&a.gamma_grid)?;
    let cfg = SuccessCurveConfig {
        params,
        gammas,
        trials: a.trials,
        strategy: a.strategy.into(),
        walk_cap: a.walk_cap,
        seed: a.seed,
    };
    let points = success_curve(&cfg)?;
    for p in &points {
        println!(
            "gamma={} successes={}/{} mean_queries={:.1}",
            p.gamma, p.successes, p.trials, p.mean_queries
        );
    }
    let content = match a.format {
        Format::Csv => success_curve_csv(&cfg, &points),
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                config: &'a SuccessCurveConfig,
                points: &'a [pprlab::experiments::SuccessPoint],
            }
            format!("{}\n", config_json(&Out { config: &cfg, points: &points }))
        }
    };
    emit(&a.out, &content)
}

#[derive(Serialize)]
struct MultiplicityConfig<'a> {
    command: &'a str,
    params: &'a InstanceParams,
    lift_l: u32,
    trials: u64,
    seed: u64,
}

#[derive(Serialize)]
struct MultiplicityReport<'a> {
    config: MultiplicityConfig<'a>,
    exceeded: u64,
    empirical: f64,
    bound: f64,
}

fn experiment_multiplicity(a: &ExperimentArgs) -> Result<(), CliError> {
    use rayon::prelude::*;
    let params = a.shape.params()?;
    if a.trials == 0 {
        return Err(CliError::Config("--trials must be >= 1".into()));
    }
    let bound = multiplicity_tail(params.n, params.heavy, a.lift_l)?;
    let exceeded = (0..a.trials)
        .into_par_iter()
        .map(|t| {
            let sigma = sample_sigma(&params, &mut trial_rng(a.seed, t));
            let g = build_instance(&params, &sigma).expect("validated shape");
            u64::from(g.multiplicity() >= a.lift_l)
        })
        .sum::<u64>();
    let empirical = exceeded as f64 / a.trials as f64;
    let report = MultiplicityReport {
        config: MultiplicityConfig {
            command: "experiment:multiplicity",
            params: &params,
            lift_l: a.lift_l,
            trials: a.trials,
            seed: a.seed,
        },
        exceeded,
        empirical,
        bound,
    };
    println!(
        "multiplicity tail: {}/{} samples at multiplicity >= {} (empirical {:.3e}, bound {:.3e})",
        exceeded, a.trials, a.lift_l, empirical, bound
    );
    let content = match a.format {
        Format::Csv => format!(
            "# {}\nn,heavy,gap,pad,l,trials,exceeded,empirical,bound\n{},{},{},{},{},{},{},{},{}\n",
            config_json(&report.config),
            params.n,
            params.heavy,
            params.gap,
            params.pad,
            a.lift_l,
            a.trials,
            exceeded,
            empirical,
            bound
        ),
        Format::Json => format!("{}\n", config_json(&report)),
    };
    emit(&a.out, &content)
}

#[derive(Serialize)]
struct PosteriorConfig<'a> {
    command: &'a str,
    params: &'a InstanceParams,
    probes: u32,
    seed: u64,
}

fn experiment_posterior(a: &ExperimentArgs) -> Result<(), CliError> {
    let params = a.shape.params()?;
    let sigma = sample_sigma(&params, &mut trial_rng(a.seed, 0));
    let g = build_instance(&params, &sigma)?;
    let mut oracle = ArcOracle::new(
        &g,
        Budget::unlimited(),
        InitialCoverage::All,
        child_seed(a.seed, 1),
    );
    let probes = a.probes.min(params.port_span());
    for i in 1..=2 * params.n {
        for k in 1..=probes {
            oracle.issue(Query::AdjIn { v: params.x_label(i), k })?;
        }
    }
    let posterior = posterior_splits(&params, oracle.transcript())?;
    let cfg = PosteriorConfig {
        command: "experiment:posterior",
        params: &params,
        probes: a.probes,
        seed: a.seed,
    };
    let truth_prob = posterior.prob_of(&sigma.sp).unwrap_or(0.0);
    println!(
        "posterior over {} splits after {} reveals: true split mass {:.4}",
        posterior.splits.len(),
        oracle.query_count(),
        truth_prob
    );
    let content = match a.format {
        Format::Csv => {
            let mut s = format!("# {}\nsplit,prob\n", config_json(&cfg));
            for (split, prob) in posterior.splits.iter().zip(&posterior.probs) {
                let labels: Vec<String> = split.iter().map(u32::to_string).collect();
                let _ = writeln!(s, "{},{}", labels.join(" "), prob);
            }
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                config: &'a PosteriorConfig<'a>,
                splits: &'a [Vec<u32>],
                probs: &'a [f64],
                true_split: &'a [u32],
                true_split_prob: f64,
            }
            format!(
                "{}\n",
                config_json(&Out {
                    config: &cfg,
                    splits: &posterior.splits,
                    probs: &posterior.probs,
                    true_split: &sigma.sp,
                    true_split_prob: truth_prob,
                })
            )
        }
    };
    emit(&a.out, &content)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct CheckLog {
    failures: u32,
    total: u32,
}

impl CheckLog {
    fn new() -> Self {
        CheckLog { failures: 0, total: 0 }
    }
    fn record(&mut self, name: &str, detail: &str, pass: bool) {
        self.total += 1;
        if pass {
            println!("check {name}: {detail} — ok");
        } else {
            self.failures += 1;
            println!("check {name}: {detail} — FAIL");
        }
    }
    fn finish(self) -> Result<(), CliError> {
        if self.failures == 0 {
            println!("verify: {}/{} checks passed", self.total, self.total);
            Ok(())
        } else {
            Err(CliError::Check(format!(
                "{}/{} checks failed",
                self.failures, self.total
            )))
        }
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), CliError> {
    match &a.graph {
        Some(path) => verify_graph_file(a, path),
        None => verify_desk_suite(a),
    }
}

fn verify_graph_file(a: &VerifyArgs, path: &PathBuf) -> Result<(), CliError> {
    let mut log = CheckLog::new();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            log.record("graph-read", &format!("cannot read {}: {e}", path.display()), false);
            return log.finish();
        }
    };
    // Deserialization re-validates every port-table invariant, so a corrupted
    // file (port clash, hole, dangling reference) fails here.
    let g = match LabeledMultigraph::deserialize(&text) {
        Ok(g) => g,
        Err(e) => {
            log.record("graph-format", &format!("port consistency: {e}"), false);
            return log.finish();
        }
    };
    log.record(
        "graph-format",
        &format!("{} nodes, {} edges parse and validate", g.node_count(), g.edge_count()),
        true,
    );
    let round_trip = LabeledMultigraph::deserialize(&g.serialize())
        .map(|h| h.serialize() == g.serialize())
        .unwrap_or(false);
    log.record("round-trip", "serialize∘deserialize is the identity", round_trip);
    match exact_ppr(&g, NodeId(1), a.alpha, DEFAULT_TOL) {
        Ok(pi) => {
            let dev = (pi.sum() - 1.0).abs();
            log.record(
                "normalization",
                &format!("|Σπ − 1| = {dev:.3e} (tol {:.1e})", a.tol),
                dev <= a.tol,
            );
        }
        Err(e) => log.record("normalization", &format!("solver failed: {e}"), false),
    }
    log.finish()
}

fn verify_desk_suite(a: &VerifyArgs) -> Result<(), CliError> {
    let mut log = CheckLog::new();

    // Closed-form agreement, normalization, and class ratio across shapes,
    // decays, and paddings.
    let mut max_closed = 0.0f64;
    let mut max_norm = 0.0f64;
    let mut solves = 0u32;
    for &(n, heavy, gap) in &[(3u32, 2u32, 1u32), (50, 8, 3)] {
        for &alpha in &[0.2, 0.5, 0.8] {
            for &pad in &[0, heavy] {
                let p = InstanceParams::new(n, heavy, gap, pad, alpha)?;
                let sigma = sample_sigma(&p, &mut trial_rng(a.seed, u64::from(solves)));
                let g = build_instance(&p, &sigma)?;
                let pi = exact_ppr(&g, p.s_label(), alpha, DEFAULT_TOL)?;
                let closed = closed_form_vector(&p, &sigma.sp);
                max_closed = max_closed.max(pi.linf_distance(&closed));
                max_norm = max_norm.max((pi.sum() - 1.0).abs());
                solves += 1;
            }
        }
    }
    log.record(
        "closed-form",
        &format!("max |exact − closed| = {max_closed:.3e} over {solves} instances (tol {:.1e})", a.tol),
        max_closed <= a.tol,
    );

    // Normalization on random dangling digraphs.
    for i in 0..50u64 {
        let g = random_digraph(&mut trial_rng(a.seed, 1000 + i));
        let pi = exact_ppr(&g, NodeId(1), 0.3, DEFAULT_TOL)?;
        max_norm = max_norm.max((pi.sum() - 1.0).abs());
    }
    log.record(
        "normalization",
        &format!("max |Σπ − 1| = {max_norm:.3e} over instances + 50 digraphs (tol {:.1e})", a.tol),
        max_norm <= a.tol,
    );

    // Lift transform identity on a padded instance.
    let p = InstanceParams::new(3, 2, 1, 3, 0.5)?;
    let sigma = sample_sigma(&p, &mut trial_rng(a.seed, 2000));
    let g = build_instance(&p, &sigma)?;
    let l = g.multiplicity().max(2);
    let spec = LiftSpec::sample(&g, l, &mut trial_rng(a.seed, 2001))?;
    let lifted = build_lift(&g, &spec)?;
    let deviation = lift_transform_deviation(&g, &spec, 0.5)?;
    log.record(
        "lift-transform",
        &format!(
            "order {l}: simple {}, max transform deviation {deviation:.3e} (tol {:.1e})",
            lifted.multiplicity() <= 1,
            a.tol
        ),
        lifted.multiplicity() <= 1 && deviation <= a.tol,
    );

    // Response frequencies against the conditional-probability formula:
    // aggregate by (response class, touched-node class); each cell's
    // frequency must sit within 3 standard errors of the formula's mass.
    let p = InstanceParams::new(3, 2, 1, 0, 0.5)?;
    let script = [Query::AdjIn { v: p.x_label(1), k: 1 }];
    if a.trials == 0 {
        return Err(CliError::Config("--trials must be >= 1".into()));
    }
    let report = frequency_vs_formula(&p, &script, a.trials, child_seed(a.seed, 3))?;
    let mut worst: f64 = 0.0;
    for y_class in 1..=2u8 {
        for pattern in 1..=2u8 {
            let (mut observed, mut expected) = (0u64, 0.0f64);
            for bin in &report.bins {
                let is_y1 = matches!(
                    bin.responses[0],
                    pprlab::oracle::Response::Port { v, .. }
                        if p.kind_of(v) == Some(LabelKind::Y1)
                );
                let class = if is_y1 { 1 } else { 2 };
                if class == y_class && bin.pattern == [pattern] {
                    observed += bin.observed;
                    expected += bin.expected_joint;
                }
            }
            let se = (expected * (1.0 - expected) / a.trials as f64).sqrt();
            let z = (observed as f64 / a.trials as f64 - expected) / se;
            worst = worst.max(z.abs());
        }
    }
    log.record(
        "frequency",
        &format!(
            "worst aggregate |z| = {worst:.2} over 4 class cells at {} trials (limit 3)",
            a.trials
        ),
        worst <= 3.0,
    );

    log.finish()
}

/// Small random digraph with at least one dangling node (the verify suite's
/// normalization fodder).
fn random_digraph(rng: &mut rand_chacha::ChaCha8Rng) -> LabeledMultigraph {
    let n = rng.random_range(2..=40u32);
    let source_pool = rng.random_range(1..n);
    let m = rng.random_range(0..=3 * n);
    let mut b = GraphBuilder::new(n);
    for _ in 0..m {
        let src = NodeId(rng.random_range(1..=source_pool));
        let dst = loop {
            let d = NodeId(rng.random_range(1..=n));
            if d != src {
                break d;
            }
        };
        b.push_edge(src, dst).expect("labels in range");
    }
    b.freeze().expect("builder graphs are consistent")
}
