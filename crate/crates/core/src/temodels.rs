//! Tunnel-based TE and FFC (forward fault correction) linear programs.
//!
//! Both models maximize total admitted flow `Σ b_f` over tunnel rates
//! `a_{f,t}`. FFC shares one set of rates across all failure scenarios: a
//! failed link drops the tunnels crossing it, and the surviving tunnels of
//! every demand must still carry its admitted flow `b_f`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::demands::TrafficMatrix;
use crate::error::{Error, Result};
use crate::lp::{LpProblem, LpSolution, LpStatus, RowSense, SolutionKind, VarId};
use crate::topo::Topology;
use crate::tunnels::{ScenarioSet, TunnelDumpEntry, TunnelSet};

/// Slack allowed when checking capacities and deliveries.
pub const CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Te,
    Ffc,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Te => "te",
            ModelKind::Ffc => "ffc",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "te" => Ok(ModelKind::Te),
            "ffc" => Ok(ModelKind::Ffc),
            _ => Err(Error::InvalidArgument(format!("unknown model '{s}' (expected te or ffc)"))),
        }
    }
}

/// Which scenarios get per-arc capacity rows in the FFC model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityMode {
    /// One capacity row per (arc, scenario).
    #[default]
    All,
    /// Capacity rows for the normal condition only. Failures only remove
    /// load, so the optimum is unchanged.
    NormalOnly,
}

impl fmt::Display for CapacityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CapacityMode::All => "all",
            CapacityMode::NormalOnly => "normal-only",
        })
    }
}

impl FromStr for CapacityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(CapacityMode::All),
            "normal-only" | "normal_only" => Ok(CapacityMode::NormalOnly),
            _ => Err(Error::InvalidArgument(format!(
                "unknown capacity mode '{s}' (expected all or normal-only)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub kind: ModelKind,
    pub policy: Option<String>,
    pub scenarios: usize,
    pub capacity_mode: Option<CapacityMode>,
    pub variables: usize,
    pub constraints: usize,
    /// FFC rows identical to an already emitted row and therefore omitted.
    pub duplicate_rows_skipped: usize,
}

/// Column indices of `a_{f,t}` (by global tunnel id) and `b_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMap {
    pub tunnel_var: Vec<VarId>,
    pub demand_var: Vec<VarId>,
}

#[derive(Debug, Clone)]
pub struct TeModel {
    pub problem: LpProblem,
    pub vars: VariableMap,
    pub descriptor: ModelDescriptor,
}

fn check_inputs(topo: &Topology, tm: &TrafficMatrix, ts: &TunnelSet) -> Result<()> {
    if ts.demand_count() != tm.len() {
        return Err(Error::InvalidArgument(format!(
            "tunnel set covers {} demands, traffic matrix has {}",
            ts.demand_count(),
            tm.len()
        )));
    }
    for t in ts.tunnels() {
        let d = &tm.demands()[t.demand_id];
        let nodes = &t.path.nodes;
        if nodes.first() != Some(&d.src) || nodes.last() != Some(&d.dst) {
            return Err(Error::InvalidArgument(format!("tunnel {} does not serve demand {}", t.id, d.id)));
        }
        if t.arcs().iter().any(|&a| a >= topo.arc_count()) {
            return Err(Error::InvalidArgument(format!("tunnel {} uses an unknown arc", t.id)));
        }
    }
    Ok(())
}

/// Shared columns: `a_{f,t} ≥ 0` per tunnel and `b_f ∈ [0, d_f]` per demand,
/// objective `Σ b_f`. Demands without tunnels get `b_f` fixed at zero.
fn add_columns(p: &mut LpProblem, tm: &TrafficMatrix, ts: &TunnelSet) -> VariableMap {
    let tunnel_var = ts
        .tunnels()
        .iter()
        .map(|t| p.add_var(format!("a[{},{}]", t.demand_id, t.id), 0.0, f64::INFINITY, 0.0))
        .collect();
    let demand_var = tm
        .demands()
        .iter()
        .map(|d| {
            let cap = if ts.for_demand(d.id).is_empty() { 0.0 } else { d.volume };
            p.add_var(format!("b[{}]", d.id), 0.0, cap, 1.0)
        })
        .collect();
    VariableMap { tunnel_var, demand_var }
}

fn tunnels_by_arc(topo: &Topology, ts: &TunnelSet) -> Vec<Vec<usize>> {
    let mut by_arc = vec![Vec::new(); topo.arc_count()];
    for t in ts.tunnels() {
        for &a in t.arcs() {
            by_arc[a].push(t.id);
        }
    }
    by_arc
}

/// Base tunnel TE model: per-arc capacity rows and per-demand delivery rows
/// `Σ_t a_{f,t} ≥ b_f`.
pub fn build_te_lp(topo: &Topology, tm: &TrafficMatrix, ts: &TunnelSet) -> Result<TeModel> {
    check_inputs(topo, tm, ts)?;
    let mut p = LpProblem::new("te");
    let vars = add_columns(&mut p, tm, ts);
    for (arc, tunnels) in tunnels_by_arc(topo, ts).into_iter().enumerate() {
        let coeffs = tunnels.iter().map(|&t| (vars.tunnel_var[t], 1.0)).collect();
        p.add_constraint(format!("cap[{arc}]"), coeffs, RowSense::Le, topo.arc(arc).capacity);
    }
    for d in tm.demands() {
        let tunnels = ts.for_demand(d.id);
        if tunnels.is_empty() {
            continue;
        }
        let mut coeffs: Vec<_> = tunnels.iter().map(|&t| (vars.tunnel_var[t], 1.0)).collect();
        coeffs.push((vars.demand_var[d.id], -1.0));
        p.add_constraint(format!("deliver[{}]", d.id), coeffs, RowSense::Ge, 0.0);
    }
    let descriptor = ModelDescriptor {
        kind: ModelKind::Te,
        policy: ts.policy.as_ref().map(|p| p.to_string()),
        scenarios: 1,
        capacity_mode: None,
        variables: p.num_vars(),
        constraints: p.num_constraints(),
        duplicate_rows_skipped: 0,
    };
    Ok(TeModel {
        problem: p,
        vars,
        descriptor,
    })
}

/// FFC model over every scenario of `scen`.
///
/// Delivery rows `Σ_{t ∈ T_f^q} a_{f,t} ≥ b_f` for each (f, q); an empty
/// `T_f^q` pins `b_f` to zero. Capacity rows cover the alive tunnels of each
/// alive arc, per scenario or for the normal condition only. Rows that
/// repeat an earlier row of the same demand or arc are skipped.
pub fn build_ffc_lp(
    topo: &Topology,
    tm: &TrafficMatrix,
    ts: &TunnelSet,
    scen: &ScenarioSet,
    capacity_mode: CapacityMode,
) -> Result<TeModel> {
    check_inputs(topo, tm, ts)?;
    match scen.get(0) {
        Some(s) if s.failed_link.is_none() => {}
        _ => {
            return Err(Error::InvalidArgument(
                "scenario set must start with the normal condition".into(),
            ))
        }
    }
    let mut p = LpProblem::new("ffc");
    let vars = add_columns(&mut p, tm, ts);
    let mut skipped = 0;

    let by_arc = tunnels_by_arc(topo, ts);
    let mut emitted: Vec<HashSet<Vec<usize>>> = vec![HashSet::new(); topo.arc_count()];
    for scenario in scen.scenarios() {
        if capacity_mode == CapacityMode::NormalOnly && scenario.id != 0 {
            break;
        }
        for arc in 0..topo.arc_count() {
            if scenario.is_dead(arc) {
                continue;
            }
            let alive: Vec<usize> = by_arc[arc]
                .iter()
                .copied()
                .filter(|&t| scenario.tunnel_alive(ts.tunnel(t)))
                .collect();
            if alive.is_empty() && scenario.id != 0 {
                continue;
            }
            if !emitted[arc].insert(alive.clone()) {
                skipped += 1;
                continue;
            }
            let coeffs = alive.iter().map(|&t| (vars.tunnel_var[t], 1.0)).collect();
            p.add_constraint(
                format!("cap[{arc},{}]", scenario.id),
                coeffs,
                RowSense::Le,
                topo.arc(arc).capacity,
            );
        }
    }

    for d in tm.demands() {
        let tunnels = ts.for_demand(d.id);
        if tunnels.is_empty() {
            continue;
        }
        let mut seen = HashSet::new();
        for scenario in scen.scenarios() {
            let alive: Vec<usize> = tunnels
                .iter()
                .copied()
                .filter(|&t| scenario.tunnel_alive(ts.tunnel(t)))
                .collect();
            if alive.is_empty() {
                p.var_mut(vars.demand_var[d.id]).upper = 0.0;
                continue;
            }
            if !seen.insert(alive.clone()) {
                skipped += 1;
                continue;
            }
            let mut coeffs: Vec<_> = alive.iter().map(|&t| (vars.tunnel_var[t], 1.0)).collect();
            coeffs.push((vars.demand_var[d.id], -1.0));
            p.add_constraint(format!("deliver[{},{}]", d.id, scenario.id), coeffs, RowSense::Ge, 0.0);
        }
    }

    let descriptor = ModelDescriptor {
        kind: ModelKind::Ffc,
        policy: ts.policy.as_ref().map(|p| p.to_string()),
        scenarios: scen.len(),
        capacity_mode: Some(capacity_mode),
        variables: p.num_vars(),
        constraints: p.num_constraints(),
        duplicate_rows_skipped: skipped,
    };
    Ok(TeModel {
        problem: p,
        vars,
        descriptor,
    })
}

/// A solved TE or FFC model in structured form.
#[derive(Debug, Clone, PartialEq)]
pub struct TeSolution {
    pub objective: f64,
    /// `b_f` per demand.
    pub delivered: Vec<f64>,
    /// `a_{f,t}` per global tunnel id.
    pub allocation: Vec<f64>,
    /// Normal-condition load per arc.
    pub loads: Vec<f64>,
    pub solve_time: f64,
    pub kind: SolutionKind,
    pub descriptor: ModelDescriptor,
}

/// Per-arc load `Σ a_{f,t}` over the tunnels crossing each arc, optionally
/// restricted to tunnels alive in a scenario.
pub fn arc_loads(
    topo: &Topology,
    ts: &TunnelSet,
    allocation: &[f64],
    scenario: Option<&crate::tunnels::Scenario>,
) -> Vec<f64> {
    let mut loads = vec![0.0; topo.arc_count()];
    for t in ts.tunnels() {
        if scenario.is_some_and(|s| !s.tunnel_alive(t)) {
            continue;
        }
        for &a in t.arcs() {
            loads[a] += allocation[t.id];
        }
    }
    loads
}

/// Removes tunnel rate in excess of `b_f`, last tunnel first, so that
/// `Σ_t a_{f,t} = b_f`. Loads only decrease and the objective is unchanged.
/// FFC excess is what buys failure coverage and is never trimmed.
fn trim_to_delivered(ts: &TunnelSet, delivered: &[f64], allocation: &mut [f64]) {
    for (f, &b) in delivered.iter().enumerate() {
        let ids = ts.for_demand(f);
        let mut excess = ids.iter().map(|&t| allocation[t]).sum::<f64>() - b;
        for &t in ids.iter().rev() {
            if excess <= 0.0 {
                break;
            }
            let cut = allocation[t].min(excess);
            allocation[t] -= cut;
            excess -= cut;
        }
    }
}

/// Reads `b`, `a` out of an optimal LP solution and recomputes arc loads
/// from the tunnel incidence. TE allocations are trimmed to `b`.
pub fn extract_solution(lp: &LpSolution, model: &TeModel, ts: &TunnelSet, topo: &Topology) -> Result<TeSolution> {
    if lp.status != LpStatus::Optimal {
        return Err(Error::NotOptimal {
            status: lp.status,
            detail: lp.diagnostics.clone().unwrap_or_default(),
        });
    }
    if model.vars.tunnel_var.len() != ts.total_slots() {
        return Err(Error::InvalidArgument("model and tunnel set disagree".into()));
    }
    let clean = |x: f64| if x.abs() < 1e-12 { 0.0 } else { x };
    let mut allocation: Vec<f64> = model.vars.tunnel_var.iter().map(|&v| clean(lp.values[v]).max(0.0)).collect();
    let delivered: Vec<f64> = model.vars.demand_var.iter().map(|&v| clean(lp.values[v]).max(0.0)).collect();
    if model.descriptor.kind == ModelKind::Te {
        trim_to_delivered(ts, &delivered, &mut allocation);
    }
    let loads = arc_loads(topo, ts, &allocation, None);
    Ok(TeSolution {
        objective: delivered.iter().sum(),
        delivered,
        allocation,
        loads,
        solve_time: lp.solve_time,
        kind: lp.kind,
        descriptor: model.descriptor.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    /// Residual load on an alive arc exceeds its capacity.
    Capacity { arc: usize, load: f64, capacity: f64 },
    /// Surviving tunnels of a demand carry less than its admitted flow.
    Delivery { demand: usize, carried: f64, admitted: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub scenario: usize,
    #[serde(flatten)]
    pub kind: ViolationKind,
    /// Negative: by how much the check is missed.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenarios_checked: usize,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `sol` stays within capacity and keeps delivering every
/// admitted `b_f` under each scenario of `scen`.
pub fn verify_congestion_free(
    sol: &TeSolution,
    ts: &TunnelSet,
    scen: &ScenarioSet,
    topo: &Topology,
) -> Result<VerificationReport> {
    if sol.allocation.len() != ts.total_slots() || sol.delivered.len() != ts.demand_count() {
        return Err(Error::InvalidArgument("solution does not match the tunnel set".into()));
    }
    let mut violations = Vec::new();
    for scenario in scen.scenarios() {
        let loads = arc_loads(topo, ts, &sol.allocation, Some(scenario));
        for (arc, &load) in loads.iter().enumerate() {
            if scenario.is_dead(arc) {
                continue;
            }
            let capacity = topo.arc(arc).capacity;
            if load > capacity + CHECK_TOL {
                violations.push(Violation {
                    scenario: scenario.id,
                    kind: ViolationKind::Capacity { arc, load, capacity },
                    slack: capacity - load,
                });
            }
        }
        for (demand, &admitted) in sol.delivered.iter().enumerate() {
            let carried: f64 = ts
                .for_demand(demand)
                .iter()
                .filter(|&&t| scenario.tunnel_alive(ts.tunnel(t)))
                .map(|&t| sol.allocation[t])
                .sum();
            if carried < admitted - CHECK_TOL {
                violations.push(Violation {
                    scenario: scenario.id,
                    kind: ViolationKind::Delivery {
                        demand,
                        carried,
                        admitted,
                    },
                    slack: carried - admitted,
                });
            }
        }
    }
    Ok(VerificationReport {
        scenarios_checked: scen.len(),
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationEntry {
    pub demand: usize,
    pub tunnel: usize,
    pub value: f64,
}

/// On-disk solution format, self-contained enough for `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDump {
    pub model: ModelKind,
    pub policy: Option<String>,
    pub scale: f64,
    pub objective: f64,
    pub b: Vec<f64>,
    pub a: Vec<AllocationEntry>,
    pub loads: Vec<f64>,
    pub tunnels: Vec<TunnelDumpEntry>,
}

impl TeSolution {
    pub fn to_dump(&self, ts: &TunnelSet, topo: &Topology, scale: f64) -> SolutionDump {
        SolutionDump {
            model: self.descriptor.kind,
            policy: self.descriptor.policy.clone(),
            scale,
            objective: self.objective,
            b: self.delivered.clone(),
            a: ts
                .tunnels()
                .iter()
                .map(|t| AllocationEntry {
                    demand: t.demand_id,
                    tunnel: t.id,
                    value: self.allocation[t.id],
                })
                .collect(),
            loads: self.loads.clone(),
            tunnels: ts.to_dump(topo),
        }
    }
}

impl SolutionDump {
    /// Rebuilds the solution and its tunnel set against `topo`. Loads are
    /// recomputed rather than trusted.
    pub fn restore(&self, topo: &Topology) -> Result<(TeSolution, TunnelSet)> {
        let ts = TunnelSet::from_dump(topo, &self.tunnels)?;
        if self.b.len() != ts.demand_count() {
            return Err(Error::Validation("solution b does not match its tunnel list".into()));
        }
        let mut allocation = vec![0.0; ts.total_slots()];
        for entry in &self.a {
            let t = ts
                .tunnels()
                .get(entry.tunnel)
                .filter(|t| t.demand_id == entry.demand)
                .ok_or_else(|| Error::Validation(format!("allocation entry {entry:?} names an unknown tunnel")))?;
            allocation[t.id] = entry.value;
        }
        let loads = arc_loads(topo, &ts, &allocation, None);
        let descriptor = ModelDescriptor {
            kind: self.model,
            policy: self.policy.clone(),
            scenarios: 0,
            capacity_mode: None,
            variables: 0,
            constraints: 0,
            duplicate_rows_skipped: 0,
        };
        let sol = TeSolution {
            objective: self.b.iter().sum(),
            delivered: self.b.clone(),
            allocation,
            loads,
            solve_time: 0.0,
            kind: SolutionKind::Vertex,
            descriptor,
        };
        Ok((sol, ts))
    }
}
