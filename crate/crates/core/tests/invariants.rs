//! Randomized checks of the model, tunnel and metric invariants.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use telab::lp::LpStatus;
use telab::metrics::FLOW_EPS;
use telab::{
    backend_by_name, build_ffc_lp, build_te_lp, build_tunnel_sets, compute_metrics, enumerate_single_link_scenarios,
    extract_solution, generate_lognormal_tm, k_shortest_paths, solve, verify_congestion_free, CapacityMode,
    LognormalFit, TeSolution, Topology, TrafficMatrix, TunnelPolicy, TunnelSet,
};

use common::{all_simple_paths, random_te_instance, random_topology};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

fn te(topo: &Topology, tm: &TrafficMatrix, ts: &TunnelSet, backend: &str) -> TeSolution {
    let model = build_te_lp(topo, tm, ts).unwrap();
    let lp = solve(&model.problem, backend_by_name(backend).unwrap().as_ref()).unwrap();
    assert_eq!(lp.status, LpStatus::Optimal, "{:?}", lp.diagnostics);
    extract_solution(&lp, &model, ts, topo).unwrap()
}

fn ffc(topo: &Topology, tm: &TrafficMatrix, ts: &TunnelSet, mode: CapacityMode, backend: &str) -> TeSolution {
    let scen = enumerate_single_link_scenarios(topo);
    let model = build_ffc_lp(topo, tm, ts, &scen, mode).unwrap();
    let lp = solve(&model.problem, backend_by_name(backend).unwrap().as_ref()).unwrap();
    assert_eq!(lp.status, LpStatus::Optimal, "{:?}", lp.diagnostics);
    extract_solution(&lp, &model, ts, topo).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0)
}

/// Keeps the first `keep[f]` tunnels of each demand.
fn truncate(tm: &TrafficMatrix, ts: &TunnelSet, keep: impl Fn(usize) -> usize) -> TunnelSet {
    let endpoints = tm.demands().iter().map(|d| (d.src, d.dst)).collect();
    let paths = (0..tm.len())
        .map(|f| {
            let ids = ts.for_demand(f);
            ids[..keep(f).min(ids.len())].iter().map(|&t| ts.tunnel(t).path.clone()).collect()
        })
        .collect();
    TunnelSet::from_paths(endpoints, paths).unwrap()
}

fn check_solution_bounds(topo: &Topology, tm: &TrafficMatrix, ts: &TunnelSet, sol: &TeSolution) -> Result<(), TestCaseError> {
    for (d, &b) in tm.demands().iter().zip(&sol.delivered) {
        prop_assert!(b >= -1e-9 && b <= d.volume + 1e-9, "b {b} outside [0, {}]", d.volume);
        let sent: f64 = ts.for_demand(d.id).iter().map(|&t| sol.allocation[t]).sum();
        prop_assert!(sent >= b - 1e-6, "demand {}: tunnels carry {sent} < {b}", d.id);
    }
    prop_assert!(sol.allocation.iter().all(|&a| a >= -1e-9));
    for (load, arc) in sol.loads.iter().zip(topo.arcs()) {
        prop_assert!(*load <= arc.capacity + 1e-6, "arc {} load {load} > {}", arc.id, arc.capacity);
    }
    Ok(())
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn ksp_paths_are_simple_sorted_and_deterministic(seed in any::<u64>(), k in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = random_topology(&mut rng, 6, 0.5, &[0.0, 1.0, 2.5]);
        for s in 0..topo.node_count() {
            for t in 0..topo.node_count() {
                let paths = k_shortest_paths(&topo, s, t, k);
                prop_assert_eq!(&paths, &k_shortest_paths(&topo, s, t, k));
                for p in &paths {
                    let mut nodes = p.nodes.clone();
                    nodes.sort_unstable();
                    nodes.dedup();
                    prop_assert_eq!(nodes.len(), p.nodes.len(), "repeated node in {:?}", p.nodes);
                    prop_assert_eq!((p.nodes[0], *p.nodes.last().unwrap()), (s, t));
                }
                for w in paths.windows(2) {
                    prop_assert!(w[0].cost <= w[1].cost);
                }
            }
        }
    }

    #[test]
    fn adaptive_policy_is_multipath_and_smaller(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = random_topology(&mut rng, 6, 0.5, &[1.0, 2.0]);
        let fit = LognormalFit { mu: 2.0, sigma: 1.0, n_samples: 0 };
        let tm = generate_lognormal_tm(&topo, &fit, seed).unwrap();
        let adaptive = build_tunnel_sets(&topo, &tm, &TunnelPolicy::adaptive()).unwrap();
        let fixed = build_tunnel_sets(&topo, &tm, &TunnelPolicy::Fixed(5)).unwrap();
        prop_assert!(adaptive.total_slots() <= fixed.total_slots());
        prop_assert_eq!(&adaptive, &build_tunnel_sets(&topo, &tm, &TunnelPolicy::adaptive()).unwrap());
        for d in tm.demands() {
            if all_simple_paths(&topo, d.src, d.dst).len() >= 2 {
                prop_assert!(adaptive.for_demand(d.id).len() >= 2, "demand {} has one tunnel", d.id);
            }
        }
    }

    #[test]
    fn lognormal_generation_is_deterministic(seed in any::<u64>(), factor in 0.01f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = random_topology(&mut rng, 5, 0.3, &[1.0]);
        let fit = LognormalFit { mu: 1.0, sigma: 0.7, n_samples: 0 };
        let tm = generate_lognormal_tm(&topo, &fit, seed).unwrap();
        prop_assert_eq!(&tm, &generate_lognormal_tm(&topo, &fit, seed).unwrap());
        let scaled = tm.scale(factor).unwrap();
        prop_assert_eq!(scaled.len(), tm.len());
        for (a, b) in tm.demands().iter().zip(scaled.demands()) {
            prop_assert_eq!((a.id, a.src, a.dst), (b.id, b.src, b.dst));
        }
    }

    #[test]
    fn te_solutions_respect_bounds_and_tunnel_supersets(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (topo, tm, ts) = random_te_instance(&mut rng, 10);
        let full = te(&topo, &tm, &ts, "simplex");
        check_solution_bounds(&topo, &tm, &ts, &full)?;
        let fewer = truncate(&tm, &ts, |f| if f % 2 == 0 { 1 } else { usize::MAX });
        let sub = te(&topo, &tm, &fewer, "simplex");
        prop_assert!(sub.objective <= full.objective + 1e-6 * full.objective.max(1.0));
    }

    #[test]
    fn ffc_is_congestion_free_and_never_beats_te(seed in any::<u64>(), bland in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (topo, tm, ts) = random_te_instance(&mut rng, 10);
        let backend = if bland { "simplex-bland" } else { "simplex" };
        let plain = te(&topo, &tm, &ts, backend);
        let all = ffc(&topo, &tm, &ts, CapacityMode::All, backend);
        let normal = ffc(&topo, &tm, &ts, CapacityMode::NormalOnly, backend);
        check_solution_bounds(&topo, &tm, &ts, &all)?;
        prop_assert!(all.objective <= plain.objective + 1e-6 * plain.objective.max(1.0));
        prop_assert!(close(all.objective, normal.objective), "all {} vs normal-only {}", all.objective, normal.objective);
        let scen = enumerate_single_link_scenarios(&topo);
        for sol in [&all, &normal] {
            let report = verify_congestion_free(sol, &ts, &scen, &topo).unwrap();
            prop_assert!(report.passed(), "{:?}", report.violations);
        }
    }

    #[test]
    fn objective_is_homogeneous(seed in any::<u64>(), lambda in 0.05f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (topo, tm, ts) = random_te_instance(&mut rng, 10);
        let base = te(&topo, &tm, &ts, "simplex").objective;
        let scaled = te(&topo.scale_capacities(lambda).unwrap(), &tm.scale(lambda).unwrap(), &ts, "simplex").objective;
        prop_assert!(close(scaled, lambda * base), "{scaled} vs {lambda} * {base}");
    }

    #[test]
    fn simplex_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (topo, tm, ts) = random_te_instance(&mut rng, 10);
        let a = ffc(&topo, &tm, &ts, CapacityMode::All, "simplex");
        let b = ffc(&topo, &tm, &ts, CapacityMode::All, "simplex");
        prop_assert_eq!(a.allocation, b.allocation);
        prop_assert_eq!(a.delivered, b.delivered);
    }

    #[test]
    fn metric_invariants(seed in any::<u64>(), use_ffc in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (topo, tm, ts) = random_te_instance(&mut rng, 10);
        let sol = if use_ffc {
            ffc(&topo, &tm, &ts, CapacityMode::All, "simplex")
        } else {
            te(&topo, &tm, &ts, "simplex")
        };
        let m = compute_metrics(&sol, &tm, &ts, &topo).unwrap();
        for r in [m.unmet_flow_ratio, m.unmet_demands_ratio, m.used_tunnel_ratio, m.critical_link_fraction] {
            prop_assert!((0.0..=1.0).contains(&r), "fraction {r}");
        }
        prop_assert!(m.overprovisioning_ratio >= 0.0);
        prop_assert!(m.network_criticality >= 0.0);
        prop_assert!(m.link_utilizations.iter().all(|&u| (0.0..=1.0 + 1e-6).contains(&u)));

        let mass: f64 = m.criticality_scores.iter().sum();
        let expected: f64 = sol.delivered.iter().filter(|&&b| b > FLOW_EPS).sum::<f64>() / tm.len() as f64;
        prop_assert!((mass - expected).abs() <= 1e-9 * expected.max(1.0), "score mass {mass} vs {expected}");
        for (s, u) in m.criticality_scores.iter().zip(&m.link_utilizations) {
            prop_assert!(*s >= 0.0);
            if *s > 0.0 {
                prop_assert!(*u > 0.0);
            }
        }
        if sol.objective > 0.0 {
            prop_assert!(m.used_tunnel_ratio > 0.0);
        }
        if m.unmet_flow_ratio == 0.0 {
            prop_assert_eq!(m.unmet_demands_ratio, 0.0);
        }
    }
}
