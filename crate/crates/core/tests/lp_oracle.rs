mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use telab::lp::{LpProblem, RowSense};
use telab::metrics::FLOW_EPS;
use telab::{backend_by_name, build_te_lp, compute_metrics, extract_solution, solve};

#[test]
fn te_optimum_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for backend_name in ["simplex", "simplex-bland"] {
        let backend = backend_by_name(backend_name).unwrap();
        for i in 0..30 {
            let (topo, tm, ts) = common::random_te_instance(&mut rng, 7);
            let model = build_te_lp(&topo, &tm, &ts).unwrap();
            let lp = solve(&model.problem, backend.as_ref()).unwrap();
            let sol = extract_solution(&lp, &model, &ts, &topo).unwrap();
            let oracle = common::te_optimum_by_enumeration(&topo, &tm, &ts);
            assert!(
                (sol.objective - oracle).abs() <= 1e-6 * oracle.abs().max(1.0),
                "{backend_name} instance {i}: {} vs {oracle}",
                sol.objective
            );
        }
    }
}

#[test]
fn homogeneity_of_capacity_and_demand_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let backend = backend_by_name("simplex").unwrap();
    for factor in [0.1, 3.0, 17.5] {
        let (topo, tm, ts) = common::random_te_instance(&mut rng, 8);
        let solve_obj = |topo: &telab::Topology, tm: &telab::TrafficMatrix| {
            let model = build_te_lp(topo, tm, &ts).unwrap();
            let lp = solve(&model.problem, backend.as_ref()).unwrap();
            extract_solution(&lp, &model, &ts, topo).unwrap().objective
        };
        let base = solve_obj(&topo, &tm);
        let scaled = solve_obj(&topo.scale_capacities(factor).unwrap(), &tm.scale(factor).unwrap());
        assert!((scaled - factor * base).abs() <= 1e-6 * (factor * base).max(1.0));
    }
}

/// Reference point in the relative interior of the optimal face: the average
/// of per-tunnel maximizations with the objective pinned at its optimum.
#[test]
fn vertex_support_is_within_maximal_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let backend = backend_by_name("simplex").unwrap();
    for _ in 0..15 {
        let (topo, tm, ts) = common::random_te_instance(&mut rng, 8);
        let model = build_te_lp(&topo, &tm, &ts).unwrap();
        let lp = solve(&model.problem, backend.as_ref()).unwrap();
        let sol = extract_solution(&lp, &model, &ts, &topo).unwrap();
        let vertex_ratio = compute_metrics(&sol, &tm, &ts, &topo).unwrap().used_tunnel_ratio;

        let mut face: LpProblem = model.problem.clone();
        let all_b: Vec<(usize, f64)> = model.vars.demand_var.iter().map(|&v| (v, 1.0)).collect();
        face.add_constraint("optimal_face", all_b, RowSense::Ge, sol.objective * (1.0 - 1e-9));
        let mut average = vec![0.0; ts.total_slots()];
        for &var in &model.vars.tunnel_var {
            let mut p = face.clone();
            for v in 0..p.num_vars() {
                p.var_mut(v).objective = if v == var { 1.0 } else { 0.0 };
            }
            let lp = solve(&p, backend.as_ref()).unwrap();
            for (slot, &v) in model.vars.tunnel_var.iter().enumerate() {
                average[slot] += lp.values[v] / ts.total_slots() as f64;
            }
        }
        let spread = average.iter().filter(|&&a| a > FLOW_EPS).count() as f64 / ts.total_slots() as f64;
        assert!(vertex_ratio <= spread + 1e-12, "{vertex_ratio} > {spread}");
    }
}
