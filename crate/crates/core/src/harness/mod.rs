//! Experiment harness: capacity calibration and sweeps over demand scale,
//! model, and tunnel policy.

mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demands::{generate_lognormal_tm, parse_tm, LognormalFit, TrafficMatrix};
use crate::error::{Error, Result};
use crate::lp::{backend_by_name, solve, LpBackend, LpStatus};
use crate::metrics::{compute_metrics, MetricsReport};
use crate::temodels::{
    build_ffc_lp, build_te_lp, extract_solution, verify_congestion_free, CapacityMode, ModelKind, TeSolution,
    VerificationReport,
};
use crate::topo::{parse_topology, Topology};
use crate::tunnels::{build_tunnel_sets, enumerate_single_link_scenarios, ScenarioSet, TunnelPolicy, TunnelSet};

pub use output::{rows_to_csv, write_outputs, Manifest, CSV_TIMING_COLUMNS};

pub const DEFAULT_SCALES: [f64; 7] = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];

/// Parameters for synthesizing the base traffic matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmSynthesis {
    pub mu: f64,
    pub sigma: f64,
}

fn default_scales() -> Vec<f64> {
    DEFAULT_SCALES.to_vec()
}
fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Te, ModelKind::Ffc]
}
fn default_policies() -> Vec<TunnelPolicy> {
    vec![TunnelPolicy::Fixed(5), TunnelPolicy::adaptive()]
}
fn default_backend() -> String {
    "simplex".to_string()
}
fn default_workers() -> usize {
    1
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tm: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tm_synthesis: Option<TmSynthesis>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default = "default_policies")]
    pub policies: Vec<TunnelPolicy>,
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default)]
    pub capacity_mode: CapacityMode,
    /// Rescale capacities so that the base matrix is fully routable by TE.
    #[serde(default)]
    pub calibrate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_true")]
    pub write_solutions: bool,
}

impl ExperimentConfig {
    pub fn new(topology: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            topology: topology.into(),
            tm: None,
            tm_synthesis: None,
            seed: 0,
            scales: default_scales(),
            models: default_models(),
            policies: default_policies(),
            backend: default_backend(),
            capacity_mode: CapacityMode::default(),
            calibrate: false,
            output_dir: None,
            workers: 1,
            write_solutions: true,
        }
    }

    /// Reads a JSON config; relative paths resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.topology);
        if let Some(tm) = cfg.tm.as_mut() {
            resolve(tm);
        }
        if let Some(out) = cfg.output_dir.as_mut() {
            resolve(out);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Validation("scales must be a nonempty list of positive numbers".into()));
        }
        if self.models.is_empty() || self.policies.is_empty() {
            return Err(Error::Validation("models and policies must be nonempty".into()));
        }
        if self.tm.is_some() == self.tm_synthesis.is_some() {
            return Err(Error::Validation("exactly one of 'tm' and 'tm_synthesis' must be given".into()));
        }
        if self.workers == 0 {
            return Err(Error::Validation("workers must be at least 1".into()));
        }
        backend_by_name(&self.backend)?;
        Ok(())
    }
}

/// One sweep point. Optional metric fields are empty for failed points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: ModelKind,
    pub policy: String,
    pub scale: f64,
    pub seed: u64,
    pub backend: String,
    pub capacity_mode: Option<CapacityMode>,
    pub status: String,
    pub objective: Option<f64>,
    pub total_demand: f64,
    pub variables: usize,
    pub constraints: usize,
    pub tunnel_slots: usize,
    pub build_time_s: f64,
    pub solver_time_s: f64,
    pub mean_utility: Option<f64>,
    pub overprovisioning_ratio: Option<f64>,
    pub unmet_flow_ratio: Option<f64>,
    pub unmet_demands_ratio: Option<f64>,
    pub used_tunnel_ratio: Option<f64>,
    pub critical_link_fraction: Option<f64>,
    pub network_criticality: Option<f64>,
    /// `pass` / `fail` for FFC rows, empty for TE rows.
    pub congestion_free: Option<String>,
    pub violations: Option<usize>,
    pub detail: Option<String>,
}

/// Full outcome of one sweep point, including what is needed for dumps.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub row: ResultRow,
    pub policy_index: usize,
    pub solution: Option<TeSolution>,
    pub metrics: Option<MetricsReport>,
    pub verification: Option<VerificationReport>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub points: Vec<PointResult>,
    pub capacity_factor: f64,
    pub topology: Topology,
    pub tm: TrafficMatrix,
    pub tunnel_sets: Vec<TunnelSet>,
}

impl ExperimentOutput {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.points.iter().map(|p| p.row.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub factor: f64,
    /// Demands without any tunnel; excluded from the routability target.
    pub unroutable: Vec<usize>,
}

/// TE unmet-flow ratio over routable demands after scaling capacities by
/// `factor`.
fn routable_unmet_ratio(
    topo: &Topology,
    tm: &TrafficMatrix,
    ts: &TunnelSet,
    factor: f64,
    backend: &dyn LpBackend,
) -> Result<f64> {
    let scaled = topo.scale_capacities(factor)?;
    let model = build_te_lp(&scaled, tm, ts)?;
    let lp = solve(&model.problem, backend)?;
    let sol = extract_solution(&lp, &model, ts, &scaled)?;
    let routable: f64 = tm
        .demands()
        .iter()
        .filter(|d| !ts.for_demand(d.id).is_empty())
        .map(|d| d.volume)
        .sum();
    Ok(if routable > 0.0 {
        (routable - sol.objective).max(0.0) / routable
    } else {
        0.0
    })
}

/// Smallest uniform capacity factor, to relative precision 1e-3, at which TE
/// routes every routable demand of `tm` (unmet ratio ≤ 1e-6).
pub fn calibrate_capacities(
    topo: &Topology,
    tm: &TrafficMatrix,
    ts: &TunnelSet,
    backend: &dyn LpBackend,
) -> Result<Calibration> {
    let unroutable = ts.unroutable();
    let fits = |factor: f64| -> Result<bool> { Ok(routable_unmet_ratio(topo, tm, ts, factor, backend)? <= 1e-6) };

    let routable_total: f64 = tm
        .demands()
        .iter()
        .filter(|d| !ts.for_demand(d.id).is_empty())
        .map(|d| d.volume)
        .sum();
    if routable_total <= 0.0 {
        return Ok(Calibration { factor: 1.0, unroutable });
    }

    let (mut lo, mut hi);
    if fits(1.0)? {
        hi = 1.0;
        lo = 0.5;
        while fits(lo)? {
            hi = lo;
            lo /= 2.0;
        }
    } else {
        lo = 1.0;
        hi = 2.0;
        while !fits(hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > 1e15 {
                return Err(Error::InvalidArgument(
                    "calibration diverged: demand cannot be routed at any capacity".into(),
                ));
            }
        }
    }
    while hi - lo > 1e-3 * lo {
        let mid = 0.5 * (lo + hi);
        if fits(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Calibration { factor: hi, unroutable })
}

/// Topology and base traffic matrix named by `cfg`.
pub fn load_instance(cfg: &ExperimentConfig) -> Result<(Topology, TrafficMatrix)> {
    let text = std::fs::read_to_string(&cfg.topology).map_err(|e| Error::io(&cfg.topology, e))?;
    let topo = parse_topology(&text)?;
    let tm = match (&cfg.tm, &cfg.tm_synthesis) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_tm(&text, &topo)?
        }
        (None, Some(syn)) => {
            let fit = LognormalFit {
                mu: syn.mu,
                sigma: syn.sigma,
                n_samples: 0,
            };
            generate_lognormal_tm(&topo, &fit, cfg.seed)?
        }
        (None, None) => return Err(Error::Validation("no traffic matrix configured".into())),
    };
    Ok((topo, tm))
}

struct PointSpec {
    model: ModelKind,
    policy_index: usize,
    scale: f64,
}

/// Builds, solves, extracts, verifies, and measures one (model, tunnels,
/// scale) point. Failures are returned in the row, never as `Err`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_point(
    topo: &Topology,
    base_tm: &TrafficMatrix,
    ts: &TunnelSet,
    scen: &ScenarioSet,
    model: ModelKind,
    scale: f64,
    capacity_mode: CapacityMode,
    backend: &dyn LpBackend,
    seed: u64,
) -> (ResultRow, Option<TeSolution>, Option<MetricsReport>, Option<VerificationReport>) {
    let mut row = ResultRow {
        model,
        policy: ts.policy.as_ref().map(|p| p.to_string()).unwrap_or_else(|| "custom".into()),
        scale,
        seed,
        backend: backend.name().to_string(),
        capacity_mode: (model == ModelKind::Ffc).then_some(capacity_mode),
        status: String::new(),
        objective: None,
        total_demand: base_tm.total_volume() * scale,
        variables: 0,
        constraints: 0,
        tunnel_slots: ts.total_slots(),
        build_time_s: 0.0,
        solver_time_s: 0.0,
        mean_utility: None,
        overprovisioning_ratio: None,
        unmet_flow_ratio: None,
        unmet_demands_ratio: None,
        used_tunnel_ratio: None,
        critical_link_fraction: None,
        network_criticality: None,
        congestion_free: None,
        violations: None,
        detail: None,
    };

    let result = (|| -> Result<_> {
        let tm = base_tm.scale(scale)?;
        row.total_demand = tm.total_volume();
        let start = Instant::now();
        let te_model = match model {
            ModelKind::Te => build_te_lp(topo, &tm, ts)?,
            ModelKind::Ffc => build_ffc_lp(topo, &tm, ts, scen, capacity_mode)?,
        };
        row.build_time_s = start.elapsed().as_secs_f64();
        row.variables = te_model.descriptor.variables;
        row.constraints = te_model.descriptor.constraints;
        let lp = solve(&te_model.problem, backend)?;
        row.solver_time_s = lp.solve_time;
        row.status = lp.status.to_string();
        let sol = extract_solution(&lp, &te_model, ts, topo)?;
        let verification = match model {
            ModelKind::Ffc => Some(verify_congestion_free(&sol, ts, scen, topo)?),
            ModelKind::Te => None,
        };
        let metrics = compute_metrics(&sol, &tm, ts, topo)?;
        Ok((sol, metrics, verification))
    })();

    match result {
        Ok((sol, metrics, verification)) => {
            row.objective = Some(sol.objective);
            row.mean_utility = Some(metrics.mean_utility);
            row.overprovisioning_ratio = Some(metrics.overprovisioning_ratio);
            row.unmet_flow_ratio = Some(metrics.unmet_flow_ratio);
            row.unmet_demands_ratio = Some(metrics.unmet_demands_ratio);
            row.used_tunnel_ratio = Some(metrics.used_tunnel_ratio);
            row.critical_link_fraction = Some(metrics.critical_link_fraction);
            row.network_criticality = Some(metrics.network_criticality);
            if let Some(v) = &verification {
                row.congestion_free = Some(if v.passed() { "pass" } else { "fail" }.to_string());
                row.violations = Some(v.violations.len());
            }
            (row, Some(sol), Some(metrics), verification)
        }
        Err(err) => {
            if row.status.is_empty() || row.status == LpStatus::Optimal.to_string() {
                row.status = "error".to_string();
            }
            row.detail = Some(err.to_string());
            (row, None, None, None)
        }
    }
}

/// Runs every (model, policy, scale) point of `cfg`. Output files are
/// written when `cfg.output_dir` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (topo, tm) = load_instance(cfg)?;
    run_experiment_on(cfg, topo, tm)
}

/// Same as [`run_experiment`] with an already loaded instance.
pub fn run_experiment_on(cfg: &ExperimentConfig, topo: Topology, tm: TrafficMatrix) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let backend = backend_by_name(&cfg.backend)?;

    let tunnel_sets = cfg
        .policies
        .iter()
        .map(|p| build_tunnel_sets(&topo, &tm, p))
        .collect::<Result<Vec<_>>>()?;

    let mut capacity_factor = 1.0;
    let topo = if cfg.calibrate {
        // The largest factor over policies makes every policy fully routable.
        capacity_factor = f64::MIN_POSITIVE;
        for ts in &tunnel_sets {
            let cal = calibrate_capacities(&topo, &tm, ts, backend.as_ref())?;
            capacity_factor = capacity_factor.max(cal.factor);
        }
        topo.scale_capacities(capacity_factor)?
    } else {
        topo
    };
    let scen = enumerate_single_link_scenarios(&topo);

    let mut specs = Vec::new();
    for &model in &cfg.models {
        for policy_index in 0..cfg.policies.len() {
            for &scale in &cfg.scales {
                specs.push(PointSpec {
                    model,
                    policy_index,
                    scale,
                });
            }
        }
    }

    let eval = |spec: &PointSpec| {
        let (row, solution, metrics, verification) = evaluate_point(
            &topo,
            &tm,
            &tunnel_sets[spec.policy_index],
            &scen,
            spec.model,
            spec.scale,
            cfg.capacity_mode,
            backend.as_ref(),
            cfg.seed,
        );
        PointResult {
            row,
            policy_index: spec.policy_index,
            solution,
            metrics,
            verification,
        }
    };
    let mut points: Vec<PointResult> = if cfg.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
        pool.install(|| specs.par_iter().map(eval).collect())
    } else {
        specs.iter().map(eval).collect()
    };
    points.sort_by(|a, b| {
        (a.row.model, a.policy_index)
            .cmp(&(b.row.model, b.policy_index))
            .then(a.row.scale.total_cmp(&b.row.scale))
    });

    let output = ExperimentOutput {
        points,
        capacity_factor,
        topology: topo,
        tm,
        tunnel_sets,
    };
    if let Some(dir) = &cfg.output_dir {
        write_outputs(cfg, &output, dir)?;
    }
    Ok(output)
}
