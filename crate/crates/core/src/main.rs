use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use telab::harness::{calibrate_capacities, evaluate_point, rows_to_csv, run_experiment, ExperimentConfig};
use telab::lp::backend_by_name;
use telab::temodels::SolutionDump;
use telab::{
    build_ffc_lp, build_te_lp, build_tunnel_sets, enumerate_single_link_scenarios, fit_lognormal,
    generate_lognormal_tm, parse_tm, parse_topology, verify_congestion_free, CapacityMode, Error, LognormalFit,
    ModelKind, Topology, TrafficMatrix, TunnelPolicy,
};

#[derive(Parser)]
#[command(name = "telab", version, about = "Tunnel-based traffic engineering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one TE or FFC instance and print its metrics.
    Solve(SolveArgs),
    /// Run a sweep over demand scales, models, and tunnel policies.
    Sweep(SweepArgs),
    /// Find the capacity factor at which TE routes the whole matrix.
    Calibrate(CalibrateArgs),
    /// Check a saved solution against every single-link failure.
    Verify(VerifyArgs),
    /// Generate a lognormal traffic matrix.
    GenTm(GenTmArgs),
    /// Fit a lognormal distribution to a traffic matrix.
    FitTm(FitTmArgs),
}

#[derive(Args)]
struct Instance {
    /// Topology JSON file.
    #[arg(long)]
    topo: PathBuf,
    /// Traffic matrix (JSON or CSV).
    #[arg(long)]
    tm: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long, default_value = "te")]
    model: ModelKind,
    /// `fixed:K`, `adaptive`, or `adaptive:A/B/C`.
    #[arg(long, default_value = "fixed:5")]
    tunnels: TunnelPolicy,
    #[arg(long, default_value = "all")]
    capacity_mode: CapacityMode,
    #[arg(long, default_value = "simplex")]
    backend: String,
    /// Demand multiplier.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Rescale capacities first so that TE routes the base matrix.
    #[arg(long)]
    calibrate: bool,
    /// Write the solution dump to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the LP in CPLEX LP format to this file.
    #[arg(long)]
    export_lp: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config JSON. Flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, requires = "tm")]
    topo: Option<PathBuf>,
    #[arg(long)]
    tm: Option<PathBuf>,
    /// Comma-separated demand multipliers.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    /// Repeatable tunnel policy.
    #[arg(long)]
    tunnels: Vec<TunnelPolicy>,
    #[arg(long)]
    capacity_mode: Option<CapacityMode>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    calibrate: bool,
    /// Output directory for results, manifest, and solutions.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    instance: Instance,
    /// Repeatable; the largest factor over all policies is reported.
    #[arg(long)]
    tunnels: Vec<TunnelPolicy>,
    #[arg(long, default_value = "simplex")]
    backend: String,
    /// Write the rescaled topology here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Solution dump written by `solve` or `sweep`.
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    topo: PathBuf,
}

#[derive(Args)]
struct GenTmArgs {
    #[arg(long)]
    topo: PathBuf,
    #[arg(long, requires = "sigma", conflicts_with = "fit")]
    mu: Option<f64>,
    #[arg(long, requires = "mu")]
    sigma: Option<f64>,
    /// Fit parameters JSON as written by `fit-tm`.
    #[arg(long, required_unless_present = "mu")]
    fit: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitTmArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit codes: 0 success, 1 verification failure, 2 usage, 3 I/O,
/// 4 parse or schema error, 5 solver failure.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) => 2,
        Error::Io { .. } => 3,
        Error::Parse(_) | Error::Validation(_) => 4,
        Error::NotOptimal { .. } => 5,
    }
}

fn read(path: &Path) -> telab::Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn write(path: &Path, text: &str) -> telab::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn emit(out: Option<&Path>, text: &str) -> telab::Result<()> {
    match out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

fn load(instance: &Instance) -> telab::Result<(Topology, TrafficMatrix)> {
    let topo = parse_topology(&read(&instance.topo)?)?;
    let tm = parse_tm(&read(&instance.tm)?, &topo)?;
    Ok((topo, tm))
}

fn solve_cmd(args: SolveArgs) -> telab::Result<u8> {
    let (topo, tm) = load(&args.instance)?;
    let backend = backend_by_name(&args.backend)?;
    let ts = build_tunnel_sets(&topo, &tm, &args.tunnels)?;
    let topo = if args.calibrate {
        let cal = calibrate_capacities(&topo, &tm, &ts, backend.as_ref())?;
        eprintln!("capacity factor {}", cal.factor);
        topo.scale_capacities(cal.factor)?
    } else {
        topo
    };
    let scen = enumerate_single_link_scenarios(&topo);
    if let Some(path) = &args.export_lp {
        let scaled = tm.scale(args.scale)?;
        let model = match args.model {
            ModelKind::Te => build_te_lp(&topo, &scaled, &ts)?,
            ModelKind::Ffc => build_ffc_lp(&topo, &scaled, &ts, &scen, args.capacity_mode)?,
        };
        write(path, &model.problem.to_lp_format())?;
    }
    let (row, sol, metrics, verification) = evaluate_point(
        &topo,
        &tm,
        &ts,
        &scen,
        args.model,
        args.scale,
        args.capacity_mode,
        backend.as_ref(),
        0,
    );
    let Some(sol) = sol else {
        eprintln!("{}", row.detail.as_deref().unwrap_or("solve failed"));
        return Ok(5);
    };
    if let Some(path) = &args.out {
        write(path, &pretty(&sol.to_dump(&ts, &topo, args.scale)))?;
    }
    print!(
        "{}",
        pretty(&json!({ "result": row, "metrics": metrics, "verification": verification }))
    );
    Ok(match verification {
        Some(v) if !v.passed() => 1,
        _ => 0,
    })
}

fn sweep_cmd(args: SweepArgs) -> telab::Result<u8> {
    let mut cfg = match (&args.config, &args.topo) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(topo)) => ExperimentConfig::new(topo.clone()),
        (None, None) => return Err(Error::InvalidArgument("give --config or --topo/--tm".into())),
    };
    if let Some(topo) = args.topo {
        cfg.topology = topo;
    }
    if let Some(tm) = args.tm {
        cfg.tm = Some(tm);
        cfg.tm_synthesis = None;
    }
    if let Some(scales) = args.scales {
        cfg.scales = scales;
    }
    if let Some(models) = args.models {
        cfg.models = models;
    }
    if !args.tunnels.is_empty() {
        cfg.policies = args.tunnels;
    }
    if let Some(mode) = args.capacity_mode {
        cfg.capacity_mode = mode;
    }
    if let Some(backend) = args.backend {
        cfg.backend = backend;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    cfg.calibrate |= args.calibrate;
    if args.out.is_some() {
        cfg.output_dir = args.out;
    }

    let output = run_experiment(&cfg)?;
    let rows = output.rows();
    if cfg.output_dir.is_none() {
        print!("{}", String::from_utf8_lossy(&rows_to_csv(&rows)?));
    }
    for row in &rows {
        eprintln!(
            "{:>3} {:<14} scale {:<5} {:<10} unmet {:.4} {}",
            row.model,
            row.policy,
            row.scale,
            row.status,
            row.unmet_flow_ratio.unwrap_or(f64::NAN),
            row.congestion_free.as_deref().unwrap_or("")
        );
    }
    if output.points.iter().any(|p| p.solution.is_none()) {
        return Ok(5);
    }
    if rows.iter().any(|r| r.congestion_free.as_deref() == Some("fail")) {
        return Ok(1);
    }
    Ok(0)
}

fn calibrate_cmd(args: CalibrateArgs) -> telab::Result<u8> {
    let (topo, tm) = load(&args.instance)?;
    let backend = backend_by_name(&args.backend)?;
    let policies = if args.tunnels.is_empty() {
        vec![TunnelPolicy::Fixed(5), TunnelPolicy::adaptive()]
    } else {
        args.tunnels
    };
    let mut factor = f64::MIN_POSITIVE;
    let mut per_policy = Vec::new();
    for policy in &policies {
        let ts = build_tunnel_sets(&topo, &tm, policy)?;
        let cal = calibrate_capacities(&topo, &tm, &ts, backend.as_ref())?;
        factor = factor.max(cal.factor);
        per_policy.push(json!({
            "policy": policy.to_string(),
            "factor": cal.factor,
            "unroutable": cal.unroutable.len(),
        }));
    }
    if let Some(path) = &args.out {
        write(path, &topo.scale_capacities(factor)?.to_json())?;
    }
    print!("{}", pretty(&json!({ "factor": factor, "policies": per_policy })));
    Ok(0)
}

fn verify_cmd(args: VerifyArgs) -> telab::Result<u8> {
    let topo = parse_topology(&read(&args.topo)?)?;
    let mut doc: serde_json::Value =
        serde_json::from_str(&read(&args.solution)?).map_err(|e| Error::Parse(e.to_string()))?;
    // Sweep dumps wrap the solution together with its metrics.
    if let Some(inner) = doc.get_mut("solution") {
        doc = inner.take();
    }
    let dump: SolutionDump = serde_json::from_value(doc).map_err(|e| Error::Parse(e.to_string()))?;
    let (sol, ts) = dump.restore(&topo)?;
    let scen = enumerate_single_link_scenarios(&topo);
    let report = verify_congestion_free(&sol, &ts, &scen, &topo)?;
    print!("{}", pretty(&report));
    Ok(if report.passed() { 0 } else { 1 })
}

fn gen_tm_cmd(args: GenTmArgs) -> telab::Result<u8> {
    let topo = parse_topology(&read(&args.topo)?)?;
    let fit = match (args.mu, args.sigma, &args.fit) {
        (Some(mu), Some(sigma), _) => LognormalFit { mu, sigma, n_samples: 0 },
        (_, _, Some(path)) => serde_json::from_str(&read(path)?).map_err(|e| Error::Parse(e.to_string()))?,
        _ => return Err(Error::InvalidArgument("give --mu and --sigma, or --fit".into())),
    };
    let tm = generate_lognormal_tm(&topo, &fit, args.seed)?;
    emit(args.out.as_deref(), &tm.to_json(&topo))?;
    Ok(0)
}

fn fit_tm_cmd(args: FitTmArgs) -> telab::Result<u8> {
    let (_, tm) = load(&args.instance)?;
    let fit = fit_lognormal(&tm)?;
    emit(args.out.as_deref(), &pretty(&fit))?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::GenTm(a) => gen_tm_cmd(a),
        Command::FitTm(a) => fit_tm_cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
