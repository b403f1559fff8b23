//! Solution quality metrics, per-link criticality scores and network
//! criticality.

use serde::{Deserialize, Serialize};

use crate::demands::TrafficMatrix;
use crate::error::{Error, Result};
use crate::temodels::TeSolution;
use crate::topo::Topology;
use crate::tunnels::TunnelSet;

/// A tunnel or demand "carries flow" above this value.
pub const FLOW_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub solver_time: f64,
    pub mean_utility: f64,
    pub overprovisioning_ratio: f64,
    pub unmet_flow_ratio: f64,
    pub unmet_demands_ratio: f64,
    pub used_tunnel_ratio: f64,
    pub critical_link_fraction: f64,
    pub network_criticality: f64,
    pub link_utilizations: Vec<f64>,
    pub criticality_scores: Vec<f64>,
}

/// `U_e = load_e / c_e` on normal-condition loads.
pub fn link_utilization(sol: &TeSolution, topo: &Topology) -> Vec<f64> {
    sol.loads
        .iter()
        .zip(topo.arcs())
        .map(|(load, arc)| load / arc.capacity)
        .collect()
}

/// Per-arc criticality: each demand with positive delivery adds `b_f / |F|`
/// to the most utilized arc among its flow-carrying tunnels (lowest arc id
/// on ties).
pub fn criticality_scores(sol: &TeSolution, ts: &TunnelSet, utilization: &[f64]) -> Vec<f64> {
    let mut scores = vec![0.0; utilization.len()];
    let demands = sol.delivered.len();
    if demands == 0 {
        return scores;
    }
    for (f, &b) in sol.delivered.iter().enumerate() {
        if b <= FLOW_EPS {
            continue;
        }
        let mut hottest: Option<usize> = None;
        for &t in ts.for_demand(f) {
            if sol.allocation[t] <= FLOW_EPS {
                continue;
            }
            for &arc in ts.tunnel(t).arcs() {
                hottest = match hottest {
                    Some(h) if utilization[h] > utilization[arc] => Some(h),
                    Some(h) if utilization[h] == utilization[arc] && h < arc => Some(h),
                    _ => Some(arc),
                };
            }
        }
        if let Some(arc) = hottest {
            scores[arc] += b / demands as f64;
        }
    }
    scores
}

/// `R = Σ S_e / U_e` over arcs with a positive score.
pub fn network_criticality(scores: &[f64], utilization: &[f64]) -> f64 {
    scores
        .iter()
        .zip(utilization)
        .filter(|(s, _)| **s > 0.0)
        .map(|(s, u)| s / u)
        .sum()
}

/// Share of arcs with a positive criticality score.
pub fn critical_link_fraction(scores: &[f64], topo: &Topology) -> f64 {
    if topo.arc_count() == 0 {
        return 0.0;
    }
    scores.iter().filter(|&&s| s > 0.0).count() as f64 / topo.arc_count() as f64
}

/// Arc counts per `[k·w, (k+1)·w)` bin; the last bin is closed at 1 and
/// absorbs anything above it.
pub fn utilization_histogram(utilization: &[f64], bin_width: f64) -> Result<Vec<usize>> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "histogram bin width must lie in (0, 1], got {bin_width}"
        )));
    }
    // Nudge so that 0.3 / 0.1 lands in bin 3, not 2.
    let bins = ((1.0 / bin_width) - 1e-9).ceil().max(1.0) as usize;
    let mut counts = vec![0; bins];
    for &u in utilization {
        let k = ((u.max(0.0) / bin_width) + 1e-9).floor() as usize;
        counts[k.min(bins - 1)] += 1;
    }
    Ok(counts)
}

/// All solution metrics for `sol`.
///
/// Ratios with an empty denominator (no demands, zero total volume, no
/// tunnels) are reported as 0.
pub fn compute_metrics(sol: &TeSolution, tm: &TrafficMatrix, ts: &TunnelSet, topo: &Topology) -> Result<MetricsReport> {
    if sol.delivered.len() != tm.len() || sol.allocation.len() != ts.total_slots() || sol.loads.len() != topo.arc_count()
    {
        return Err(Error::InvalidArgument(
            "solution, traffic matrix and tunnel set are inconsistent".into(),
        ));
    }
    let utilization = link_utilization(sol, topo);
    let mean_utility = if utilization.is_empty() {
        0.0
    } else {
        utilization.iter().sum::<f64>() / utilization.len() as f64
    };

    let total_demand = tm.total_volume();
    let total_delivered: f64 = sol.delivered.iter().sum();
    let total_allocated: f64 = sol.allocation.iter().sum();
    let (overprovisioning_ratio, unmet_flow_ratio) = if total_demand > 0.0 {
        // Ratios below 1e-12 are summation noise.
        let snap = |r: f64| if r <= 1e-12 { 0.0 } else { r };
        (
            snap((total_allocated - total_delivered) / total_demand),
            snap((total_demand - total_delivered) / total_demand).min(1.0),
        )
    } else {
        (0.0, 0.0)
    };

    let unmet_demands_ratio = if tm.is_empty() {
        0.0
    } else {
        let short = tm
            .demands()
            .iter()
            .zip(&sol.delivered)
            .filter(|(d, &b)| b < d.volume - FLOW_EPS * d.volume.max(1.0))
            .count();
        short as f64 / tm.len() as f64
    };

    let used_tunnel_ratio = if ts.total_slots() == 0 {
        0.0
    } else {
        sol.allocation.iter().filter(|&&a| a > FLOW_EPS).count() as f64 / ts.total_slots() as f64
    };

    let scores = criticality_scores(sol, ts, &utilization);
    Ok(MetricsReport {
        solver_time: sol.solve_time,
        mean_utility,
        overprovisioning_ratio,
        unmet_flow_ratio,
        unmet_demands_ratio,
        used_tunnel_ratio,
        critical_link_fraction: critical_link_fraction(&scores, topo),
        network_criticality: network_criticality(&scores, &utilization),
        link_utilizations: utilization,
        criticality_scores: scores,
    })
}

/// Per-physical-link view: the larger utilization of the two directions.
pub fn link_utilization_by_pair(utilization: &[f64], topo: &Topology) -> Vec<f64> {
    let mut out = vec![0.0f64; topo.link_count()];
    for arc in topo.arcs() {
        out[arc.pair_id] = out[arc.pair_id].max(utilization[arc.id]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::SolutionKind;
    use crate::temodels::{arc_loads, ModelDescriptor, ModelKind};
    use crate::topo::LinkSpec;
    use crate::tunnels::{Path, TunnelSet};

    fn descriptor() -> ModelDescriptor {
        ModelDescriptor {
            kind: ModelKind::Te,
            policy: None,
            scenarios: 1,
            capacity_mode: None,
            variables: 0,
            constraints: 0,
            duplicate_rows_skipped: 0,
        }
    }

    fn solution(topo: &Topology, ts: &TunnelSet, b: Vec<f64>, a: Vec<f64>) -> TeSolution {
        TeSolution {
            objective: b.iter().sum(),
            loads: arc_loads(topo, ts, &a, None),
            delivered: b,
            allocation: a,
            solve_time: 0.25,
            kind: SolutionKind::Vertex,
            descriptor: descriptor(),
        }
    }

    /// Line x - y - z with capacities 10 and 20.
    fn line() -> Topology {
        Topology::new(
            "line",
            &["x", "y", "z"],
            &[LinkSpec::new("x", "y", 10.0), LinkSpec::new("y", "z", 20.0)],
        )
        .unwrap()
    }

    #[test]
    fn single_demand_scores() {
        let topo = line();
        let path = Path::from_nodes(&topo, vec![0, 1, 2]).unwrap();
        let ts = TunnelSet::from_paths(vec![(0, 2)], vec![vec![path]]).unwrap();
        let tm = TrafficMatrix::new(&topo, [(0, 2, 5.0)]).unwrap();
        let sol = solution(&topo, &ts, vec![5.0], vec![5.0]);

        let u = link_utilization(&sol, &topo);
        assert_eq!(u, vec![0.5, 0.0, 0.25, 0.0]);
        let s = criticality_scores(&sol, &ts, &u);
        assert_eq!(s, vec![5.0, 0.0, 0.0, 0.0]);
        assert_eq!(network_criticality(&s, &u), 10.0);
        assert_eq!(critical_link_fraction(&s, &topo), 0.25);

        let report = compute_metrics(&sol, &tm, &ts, &topo).unwrap();
        assert_eq!(report.unmet_flow_ratio, 0.0);
        assert_eq!(report.unmet_demands_ratio, 0.0);
        assert_eq!(report.overprovisioning_ratio, 0.0);
        assert_eq!(report.used_tunnel_ratio, 1.0);
        assert_eq!(report.solver_time, 0.25);
        assert!((report.mean_utility - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn shared_saturated_arc() {
        let topo = line();
        let p1 = Path::from_nodes(&topo, vec![0, 1]).unwrap();
        let p2 = Path::from_nodes(&topo, vec![0, 1, 2]).unwrap();
        let ts = TunnelSet::from_paths(vec![(0, 1), (0, 2)], vec![vec![p1], vec![p2]]).unwrap();
        let sol = solution(&topo, &ts, vec![4.0, 6.0], vec![4.0, 6.0]);
        let u = link_utilization(&sol, &topo);
        assert_eq!(u[0], 1.0);
        let s = criticality_scores(&sol, &ts, &u);
        assert_eq!(s, vec![5.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn utilization_ties_pick_lowest_arc() {
        let topo = line();
        let p = Path::from_nodes(&topo, vec![0, 1, 2]).unwrap();
        let ts = TunnelSet::from_paths(vec![(0, 2)], vec![vec![p]]).unwrap();
        let sol = solution(&topo, &ts, vec![1.0], vec![1.0]);
        let s = criticality_scores(&sol, &ts, &[0.3, 0.0, 0.3, 0.0]);
        assert_eq!(s, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_matrix_metrics() {
        let topo = line();
        let p = Path::from_nodes(&topo, vec![0, 1, 2]).unwrap();
        let ts = TunnelSet::from_paths(vec![(0, 2)], vec![vec![p]]).unwrap();
        let tm = TrafficMatrix::new(&topo, [(0, 2, 0.0)]).unwrap();
        let sol = solution(&topo, &ts, vec![0.0], vec![0.0]);
        let r = compute_metrics(&sol, &tm, &ts, &topo).unwrap();
        assert_eq!(r.mean_utility, 0.0);
        assert_eq!(r.overprovisioning_ratio, 0.0);
        assert_eq!(r.unmet_flow_ratio, 0.0);
        assert_eq!(r.unmet_demands_ratio, 0.0);
        assert_eq!(r.used_tunnel_ratio, 0.0);
        assert_eq!(r.network_criticality, 0.0);
        assert_eq!(r.critical_link_fraction, 0.0);
        assert!(r.criticality_scores.iter().all(|&s| s == 0.0));
        assert_eq!(utilization_histogram(&r.link_utilizations, 0.1).unwrap()[0], 4);
    }

    #[test]
    fn histogram_placement() {
        // [0, 0.5) holds 0.1; the closed final bin [0.5, 1] holds 0.5, 0.95.
        assert_eq!(utilization_histogram(&[0.1, 0.5, 0.95], 0.5).unwrap(), vec![1, 2]);
        assert_eq!(utilization_histogram(&[1.0, 1.0000005], 0.25).unwrap(), vec![0, 0, 0, 2]);
        assert_eq!(utilization_histogram(&[0.3], 0.1).unwrap()[3], 1);
        assert_eq!(utilization_histogram(&[0.2], 0.3).unwrap().len(), 4);
        assert!(utilization_histogram(&[0.1], 0.0).is_err());
        assert!(utilization_histogram(&[0.1], 1.5).is_err());
    }

    #[test]
    fn shortfall_and_overprovisioning() {
        let topo = line();
        let p1 = Path::from_nodes(&topo, vec![0, 1]).unwrap();
        let p2 = Path::from_nodes(&topo, vec![1, 2]).unwrap();
        let ts = TunnelSet::from_paths(vec![(0, 1), (1, 2)], vec![vec![p1], vec![p2]]).unwrap();
        let tm = TrafficMatrix::new(&topo, [(0, 1, 8.0), (1, 2, 2.0)]).unwrap();
        // Demand 0 gets 6 of 8 with 8 reserved; demand 1 is fully met.
        let sol = solution(&topo, &ts, vec![6.0, 2.0], vec![8.0, 2.0]);
        let r = compute_metrics(&sol, &tm, &ts, &topo).unwrap();
        assert!((r.unmet_flow_ratio - 0.2).abs() < 1e-15);
        assert_eq!(r.unmet_demands_ratio, 0.5);
        assert!((r.overprovisioning_ratio - 0.2).abs() < 1e-15);
    }

    #[test]
    fn pair_view_takes_max_direction() {
        let topo = line();
        assert_eq!(link_utilization_by_pair(&[0.1, 0.4, 0.3, 0.2], &topo), vec![0.4, 0.3]);
    }
}
