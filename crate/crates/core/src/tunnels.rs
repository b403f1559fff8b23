//! Tunnel precomputation and single-link failure scenarios.
//!
//! Tunnels are loopless paths produced by Yen's algorithm. Ties in path cost
//! are broken by comparing node-index sequences, so the column set handed to
//! the LP is reproducible run to run.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demands::TrafficMatrix;
use crate::error::{Error, Result};
use crate::topo::{ArcId, NodeIdx, Topology};

/// A loopless path, stored both as nodes and as the arcs joining them.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<NodeIdx>,
    pub arcs: Vec<ArcId>,
    pub cost: f64,
}

impl Path {
    /// Resolves a node sequence into arcs. `None` if two consecutive nodes
    /// are not adjacent or a node repeats.
    pub fn from_nodes(topo: &Topology, nodes: Vec<NodeIdx>) -> Option<Path> {
        if nodes.len() < 2 {
            return None;
        }
        let mut seen = HashSet::with_capacity(nodes.len());
        if !nodes.iter().all(|n| seen.insert(*n)) {
            return None;
        }
        let mut arcs = Vec::with_capacity(nodes.len() - 1);
        let mut cost = 0.0;
        for hop in nodes.windows(2) {
            let arc = topo.find_arc(hop[0], hop[1])?;
            cost += topo.arc(arc).weight;
            arcs.push(arc);
        }
        Some(Path { nodes, arcs, cost })
    }

    fn cmp_rank(&self, other: &Path) -> Ordering {
        self.cost.total_cmp(&other.cost).then_with(|| self.nodes.cmp(&other.nodes))
    }
}

/// Min-heap entry keyed by (cost, node sequence).
struct Candidate(Path);

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.cmp_rank(&self.0)
    }
}

/// Shortest distance from every node to `to` over usable arcs, walking arcs
/// backwards. Every incoming arc of v is the reverse of an outgoing arc.
fn distances_to(topo: &Topology, to: NodeIdx, blocked_node: &[bool], blocked_arc: &[bool]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; topo.node_count()];
    if blocked_node[to] {
        return dist;
    }
    let mut done = vec![false; topo.node_count()];
    let mut heap = BinaryHeap::new();
    dist[to] = 0.0;
    heap.push(HeapItem(0.0, to));
    while let Some(HeapItem(d, v)) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        for &out in topo.out_arcs(v) {
            let incoming = topo.reverse_arc(out);
            let a = topo.arc(incoming);
            if blocked_arc[incoming] || blocked_node[a.src] {
                continue;
            }
            let cand = d + a.weight;
            if cand < dist[a.src] {
                dist[a.src] = cand;
                heap.push(HeapItem(cand, a.src));
            }
        }
    }
    dist
}

/// Among all shortest simple `from -> to` paths avoiding the blocked nodes
/// and arcs, the one with the lexicographically smallest node sequence.
///
/// The path is walked forward taking the smallest-index neighbor that stays
/// on a shortest route. With zero-weight arcs a shortest route may revisit a
/// node, so distances are then recomputed with the walked prefix blocked.
fn lexmin_shortest_path(
    topo: &Topology,
    from: NodeIdx,
    to: NodeIdx,
    blocked_node: &[bool],
    blocked_arc: &[bool],
) -> Option<Vec<NodeIdx>> {
    if blocked_node[from] {
        return None;
    }
    let zero_weights = topo.arcs().iter().any(|a| a.weight == 0.0);
    let mut mask = blocked_node.to_vec();
    let mut dist = distances_to(topo, to, &mask, blocked_arc);
    let mut remaining = dist[from];
    if !remaining.is_finite() {
        return None;
    }
    let mut path = vec![from];
    let mut u = from;
    while u != to {
        mask[u] = true;
        if zero_weights {
            dist = distances_to(topo, to, &mask, blocked_arc);
        }
        let tol = 1e-12 * remaining.max(1.0);
        let next = topo.out_arcs(u).iter().copied().find(|&arc| {
            let a = topo.arc(arc);
            !blocked_arc[arc] && !mask[a.dst] && (a.weight + dist[a.dst] - remaining).abs() <= tol
        })?;
        remaining -= topo.arc(next).weight;
        u = topo.arc(next).dst;
        path.push(u);
    }
    Some(path)
}

struct HeapItem(f64, NodeIdx);

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Up to `k` loopless `s -> t` paths in nondecreasing cost, ties broken by
/// node-index sequence. A disconnected pair yields an empty list.
pub fn k_shortest_paths(topo: &Topology, s: NodeIdx, t: NodeIdx, k: usize) -> Vec<Path> {
    if s == t || k == 0 {
        return Vec::new();
    }
    let n = topo.node_count();
    let mut blocked_node = vec![false; n];
    let mut blocked_arc = vec![false; topo.arc_count()];

    let Some(first) = lexmin_shortest_path(topo, s, t, &blocked_node, &blocked_arc)
        .and_then(|nodes| Path::from_nodes(topo, nodes))
    else {
        return Vec::new();
    };

    let mut accepted: Vec<Path> = vec![first];
    let mut seen: HashSet<Vec<NodeIdx>> = HashSet::new();
    seen.insert(accepted[0].nodes.clone());
    let mut candidates = BinaryHeap::new();

    while accepted.len() < k {
        let last = accepted.last().expect("nonempty").clone();
        for i in 0..last.nodes.len() - 1 {
            let spur = last.nodes[i];
            let root = &last.nodes[..=i];
            for p in &accepted {
                if p.nodes.len() > i + 1 && &p.nodes[..=i] == root {
                    blocked_arc[p.arcs[i]] = true;
                }
            }
            for &node in &root[..i] {
                blocked_node[node] = true;
            }
            if let Some(tail) = lexmin_shortest_path(topo, spur, t, &blocked_node, &blocked_arc) {
                let mut nodes = root[..i].to_vec();
                nodes.extend(tail);
                if !seen.contains(&nodes) {
                    if let Some(path) = Path::from_nodes(topo, nodes) {
                        seen.insert(path.nodes.clone());
                        candidates.push(Candidate(path));
                    }
                }
            }
            blocked_arc.iter_mut().for_each(|b| *b = false);
            for &node in &root[..i] {
                blocked_node[node] = false;
            }
        }
        match candidates.pop() {
            Some(Candidate(path)) => accepted.push(path),
            None => break,
        }
    }
    accepted
}

/// Tunnel counts per demand group for the adaptive policy. Demands with
/// positive volume are sorted ascending and split into `counts.len()`
/// contiguous groups of near-equal size; group `i` gets `counts[i]` tunnels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptivePolicy {
    pub counts: Vec<usize>,
}

impl Default for AdaptivePolicy {
    fn default() -> Self {
        AdaptivePolicy { counts: vec![3, 4, 5] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TunnelPolicy {
    Fixed(usize),
    Adaptive(AdaptivePolicy),
}

impl TunnelPolicy {
    pub fn adaptive() -> Self {
        TunnelPolicy::Adaptive(AdaptivePolicy::default())
    }

    fn validate(&self) -> Result<()> {
        match self {
            TunnelPolicy::Fixed(0) => Err(Error::InvalidArgument("fixed tunnel count must be at least 1".into())),
            TunnelPolicy::Fixed(_) => Ok(()),
            TunnelPolicy::Adaptive(a) => {
                if a.counts.is_empty() || a.counts[0] == 0 {
                    return Err(Error::InvalidArgument("adaptive policy needs positive group counts".into()));
                }
                if a.counts.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::InvalidArgument("adaptive group counts must be nondecreasing".into()));
                }
                Ok(())
            }
        }
    }

    fn max_count(&self) -> usize {
        match self {
            TunnelPolicy::Fixed(k) => *k,
            TunnelPolicy::Adaptive(a) => a.counts.iter().copied().max().unwrap_or(0),
        }
    }

    /// Requested tunnel count for every demand of `tm`.
    pub fn counts_for(&self, tm: &TrafficMatrix) -> Vec<usize> {
        match self {
            TunnelPolicy::Fixed(k) => vec![*k; tm.len()],
            TunnelPolicy::Adaptive(a) => {
                let groups = a.counts.len();
                let mut counts = vec![a.counts[0]; tm.len()];
                let mut positive: Vec<_> = tm.demands().iter().filter(|d| d.volume > 0.0).collect();
                positive.sort_by(|x, y| {
                    x.volume
                        .total_cmp(&y.volume)
                        .then_with(|| (x.src, x.dst).cmp(&(y.src, y.dst)))
                });
                let base = positive.len() / groups;
                let extra = positive.len() % groups;
                let mut start = 0;
                for (g, &count) in a.counts.iter().enumerate() {
                    let size = base + usize::from(g < extra);
                    for d in &positive[start..start + size] {
                        counts[d.id] = count;
                    }
                    start += size;
                }
                counts
            }
        }
    }
}

impl fmt::Display for TunnelPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TunnelPolicy::Fixed(k) => write!(f, "fixed:{k}"),
            TunnelPolicy::Adaptive(a) if *a == AdaptivePolicy::default() => write!(f, "adaptive"),
            TunnelPolicy::Adaptive(a) => {
                let parts: Vec<String> = a.counts.iter().map(|c| c.to_string()).collect();
                write!(f, "adaptive:{}", parts.join("/"))
            }
        }
    }
}

impl FromStr for TunnelPolicy {
    type Err = Error;

    /// `fixed:K`, `adaptive`, or `adaptive:3/4/5`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown tunnel policy '{s}' (expected fixed:K or adaptive)"));
        let policy = if let Some(k) = s.strip_prefix("fixed:") {
            TunnelPolicy::Fixed(k.parse().map_err(|_| bad())?)
        } else if s == "adaptive" {
            TunnelPolicy::adaptive()
        } else if let Some(groups) = s.strip_prefix("adaptive:") {
            let counts = groups
                .split('/')
                .map(|c| c.parse().map_err(|_| bad()))
                .collect::<Result<Vec<usize>>>()?;
            TunnelPolicy::Adaptive(AdaptivePolicy { counts })
        } else {
            return Err(bad());
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl Serialize for TunnelPolicy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TunnelPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tunnel {
    pub id: usize,
    pub demand_id: usize,
    pub path: Path,
}

impl Tunnel {
    pub fn arcs(&self) -> &[ArcId] {
        &self.path.arcs
    }
}

/// Per-demand tunnel lists `T_f` with globally numbered tunnels.
#[derive(Debug, Clone, PartialEq)]
pub struct TunnelSet {
    pub policy: Option<TunnelPolicy>,
    tunnels: Vec<Tunnel>,
    by_demand: Vec<Vec<usize>>,
    endpoints: Vec<(NodeIdx, NodeIdx)>,
}

impl TunnelSet {
    /// Assembles a tunnel set from explicit paths, one list per demand.
    pub fn from_paths(endpoints: Vec<(NodeIdx, NodeIdx)>, paths: Vec<Vec<Path>>) -> Result<TunnelSet> {
        if endpoints.len() != paths.len() {
            return Err(Error::InvalidArgument("one path list per demand required".into()));
        }
        let mut tunnels = Vec::new();
        let mut by_demand = Vec::with_capacity(paths.len());
        for (demand_id, list) in paths.into_iter().enumerate() {
            let (s, t) = endpoints[demand_id];
            let mut ids = Vec::with_capacity(list.len());
            for path in list {
                if path.nodes.first() != Some(&s) || path.nodes.last() != Some(&t) {
                    return Err(Error::Validation(format!(
                        "tunnel for demand {demand_id} does not join its endpoints"
                    )));
                }
                if tunnels.iter().any(|x: &Tunnel| x.demand_id == demand_id && x.path.nodes == path.nodes) {
                    return Err(Error::Validation(format!("duplicate tunnel for demand {demand_id}")));
                }
                ids.push(tunnels.len());
                tunnels.push(Tunnel {
                    id: tunnels.len(),
                    demand_id,
                    path,
                });
            }
            by_demand.push(ids);
        }
        Ok(TunnelSet {
            policy: None,
            tunnels,
            by_demand,
            endpoints,
        })
    }

    pub fn tunnels(&self) -> &[Tunnel] {
        &self.tunnels
    }

    pub fn tunnel(&self, id: usize) -> &Tunnel {
        &self.tunnels[id]
    }

    /// Tunnel ids of demand `f`.
    pub fn for_demand(&self, f: usize) -> &[usize] {
        &self.by_demand[f]
    }

    pub fn demand_count(&self) -> usize {
        self.by_demand.len()
    }

    /// Σ_f |T_f|.
    pub fn total_slots(&self) -> usize {
        self.tunnels.len()
    }

    /// Demands without any tunnel.
    pub fn unroutable(&self) -> Vec<usize> {
        (0..self.by_demand.len()).filter(|&f| self.by_demand[f].is_empty()).collect()
    }

    /// Audit dump: `[{"demand": [src, dst], "tunnels": [[node ids...]]}]`.
    pub fn to_dump(&self, topo: &Topology) -> Vec<TunnelDumpEntry> {
        self.endpoints
            .iter()
            .zip(&self.by_demand)
            .map(|(&(s, t), ids)| TunnelDumpEntry {
                demand: [topo.node_id(s).to_string(), topo.node_id(t).to_string()],
                tunnels: ids
                    .iter()
                    .map(|&id| {
                        self.tunnels[id]
                            .path
                            .nodes
                            .iter()
                            .map(|&n| topo.node_id(n).to_string())
                            .collect()
                    })
                    .collect(),
            })
            .collect()
    }

    /// Rebuilds a tunnel set from its audit dump.
    pub fn from_dump(topo: &Topology, dump: &[TunnelDumpEntry]) -> Result<TunnelSet> {
        let resolve = |id: &str| {
            topo.node_index(id)
                .ok_or_else(|| Error::Validation(format!("tunnel node '{id}' is not a topology node")))
        };
        let mut endpoints = Vec::with_capacity(dump.len());
        let mut paths = Vec::with_capacity(dump.len());
        for entry in dump {
            endpoints.push((resolve(&entry.demand[0])?, resolve(&entry.demand[1])?));
            let mut list = Vec::with_capacity(entry.tunnels.len());
            for nodes in &entry.tunnels {
                let idx = nodes.iter().map(|n| resolve(n)).collect::<Result<Vec<_>>>()?;
                let path = Path::from_nodes(topo, idx)
                    .ok_or_else(|| Error::Validation(format!("tunnel {nodes:?} is not a simple path")))?;
                list.push(path);
            }
            paths.push(list);
        }
        TunnelSet::from_paths(endpoints, paths)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunnelDumpEntry {
    pub demand: [String; 2],
    pub tunnels: Vec<Vec<String>>,
}

/// Computes `T_f` for every demand of `tm` under `policy`.
///
/// Demands left without any path are kept with an empty list; see
/// [`TunnelSet::unroutable`].
pub fn build_tunnel_sets(topo: &Topology, tm: &TrafficMatrix, policy: &TunnelPolicy) -> Result<TunnelSet> {
    policy.validate()?;
    let counts = policy.counts_for(tm);
    let kmax = policy.max_count();
    let paths: Vec<Vec<Path>> = tm
        .demands()
        .par_iter()
        .map(|d| {
            let mut list = k_shortest_paths(topo, d.src, d.dst, kmax);
            list.truncate(counts[d.id]);
            list
        })
        .collect();
    let endpoints = tm.demands().iter().map(|d| (d.src, d.dst)).collect();
    let mut set = TunnelSet::from_paths(endpoints, paths)?;
    set.policy = Some(policy.clone());
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: usize,
    /// Physical link taken down, `None` for the normal condition.
    pub failed_link: Option<usize>,
    dead: Vec<bool>,
}

impl Scenario {
    pub fn is_dead(&self, arc: ArcId) -> bool {
        self.dead[arc]
    }

    pub fn dead_arcs(&self) -> Vec<ArcId> {
        (0..self.dead.len()).filter(|&a| self.dead[a]).collect()
    }

    pub fn tunnel_alive(&self, tunnel: &Tunnel) -> bool {
        tunnel.arcs().iter().all(|&a| !self.dead[a])
    }
}

/// The normal condition plus one scenario per physical link failure.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn get(&self, q: usize) -> Option<&Scenario> {
        self.scenarios.get(q)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// Scenario 0 is the intact network; scenario `q > 0` removes both arcs of
/// physical link `q - 1`.
pub fn enumerate_single_link_scenarios(topo: &Topology) -> ScenarioSet {
    let arcs = topo.arc_count();
    let mut scenarios = vec![Scenario {
        id: 0,
        failed_link: None,
        dead: vec![false; arcs],
    }];
    for link in 0..topo.link_count() {
        let mut dead = vec![false; arcs];
        for arc in topo.arcs().iter().filter(|a| a.pair_id == link) {
            dead[arc.id] = true;
        }
        scenarios.push(Scenario {
            id: link + 1,
            failed_link: Some(link),
            dead,
        });
    }
    ScenarioSet { scenarios }
}

/// `T_f^q` for every demand: the tunnels of `T_f` with no dead arc in `q`.
pub fn available_tunnels(ts: &TunnelSet, scen: &ScenarioSet, q: usize) -> Result<Vec<Vec<usize>>> {
    let scenario = scen
        .get(q)
        .ok_or_else(|| Error::InvalidArgument(format!("scenario {q} out of range (have {})", scen.len())))?;
    Ok((0..ts.demand_count())
        .map(|f| {
            ts.for_demand(f)
                .iter()
                .copied()
                .filter(|&t| scenario.tunnel_alive(ts.tunnel(t)))
                .collect()
        })
        .collect())
}
