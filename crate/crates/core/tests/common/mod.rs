//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use telab::tunnels::Path;
use telab::{parse_tm, parse_topology, LinkSpec, Topology, TrafficMatrix, TunnelSet};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn b4() -> (Topology, TrafficMatrix) {
    let topo = parse_topology(&std::fs::read_to_string(data_path("b4.json")).unwrap()).unwrap();
    let tm = parse_tm(&std::fs::read_to_string(data_path("b4_tm.json")).unwrap(), &topo).unwrap();
    (topo, tm)
}

pub fn diamond() -> Topology {
    Topology::new(
        "diamond",
        &["s", "a", "b", "t"],
        &[
            LinkSpec::new("s", "a", 10.0),
            LinkSpec::new("a", "t", 10.0),
            LinkSpec::new("s", "b", 10.0),
            LinkSpec::new("b", "t", 10.0),
        ],
    )
    .unwrap()
}

/// Random connected graph: a spanning path plus chords with probability
/// `p`. Capacities are integers in 1..=20, weights drawn from `weights`.
pub fn random_topology(rng: &mut ChaCha8Rng, n: usize, p: f64, weights: &[f64]) -> Topology {
    let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut links = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || rng.random_bool(p) {
                let cap = rng.random_range(1..=20) as f64;
                let w = weights[rng.random_range(0..weights.len())];
                links.push(LinkSpec::new(ids[i].clone(), ids[j].clone(), cap).with_weight(w));
            }
        }
    }
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    Topology::new("random", &refs, &links).unwrap()
}

/// Every simple `s -> t` path, sorted by (cost, node sequence).
pub fn all_simple_paths(topo: &Topology, s: usize, t: usize) -> Vec<(f64, Vec<usize>)> {
    fn dfs(topo: &Topology, t: usize, stack: &mut Vec<usize>, cost: f64, on: &mut [bool], out: &mut Vec<(f64, Vec<usize>)>) {
        let here = *stack.last().unwrap();
        if here == t {
            out.push((cost, stack.clone()));
            return;
        }
        for next in 0..topo.node_count() {
            if on[next] {
                continue;
            }
            if let Some(arc) = topo.find_arc(here, next) {
                on[next] = true;
                stack.push(next);
                dfs(topo, t, stack, cost + topo.arc(arc).weight, on, out);
                stack.pop();
                on[next] = false;
            }
        }
    }
    let mut out = Vec::new();
    let mut on = vec![false; topo.node_count()];
    on[s] = true;
    dfs(topo, t, &mut vec![s], 0.0, &mut on, &mut out);
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    out
}

/// Maximum of `c·x` over `{x ≥ 0 : A x ≤ b}` by enumerating every basic
/// solution. Assumes the polytope is bounded and nonempty.
pub fn vertex_enumeration_max(c: &[f64], rows: &[(Vec<f64>, f64)]) -> f64 {
    let n = c.len();
    // Nonnegativity enters as -x_j ≤ 0.
    let mut all: Vec<(Vec<f64>, f64)> = rows.to_vec();
    for j in 0..n {
        let mut r = vec![0.0; n];
        r[j] = -1.0;
        all.push((r, 0.0));
    }
    let feasible = |x: &[f64]| {
        all.iter().all(|(a, b)| {
            let lhs: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
            lhs <= b + 1e-9 * (1.0 + b.abs())
        })
    };
    let mut best = f64::NEG_INFINITY;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = solve_square(&pick.iter().map(|&i| all[i].clone()).collect::<Vec<_>>()) {
            if feasible(&x) {
                best = best.max(c.iter().zip(&x).map(|(p, q)| p * q).sum());
            }
        }
        // Next n-combination of 0..all.len() in lexicographic order.
        let m = all.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < m - n + i {
                break;
            }
        }
        pick[i] += 1;
        for j in i + 1..n {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_square(rows: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|(a, b)| {
            let mut r = a.clone();
            r.push(*b);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    for (x, p) in m[r][col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * p;
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// TE optimum by vertex enumeration over tunnel rates only:
/// max Σa s.t. Σ_{t∈T_f} a_t ≤ d_f, per-arc capacity, a ≥ 0. Implied rows
/// are dropped first to keep the enumeration small.
pub fn te_optimum_by_enumeration(topo: &Topology, tm: &TrafficMatrix, ts: &TunnelSet) -> f64 {
    let n = ts.total_slots();
    if n == 0 {
        return 0.0;
    }
    let mut rows: Vec<(Vec<bool>, f64)> = Vec::new();
    for d in tm.demands() {
        let mut s = vec![false; n];
        for &t in ts.for_demand(d.id) {
            s[t] = true;
        }
        rows.push((s, d.volume));
    }
    for arc in topo.arcs() {
        let s: Vec<bool> = ts.tunnels().iter().map(|t| t.path.arcs.contains(&arc.id)).collect();
        if s.iter().any(|&x| x) {
            rows.push((s, arc.capacity));
        }
    }
    // Row (S, c) is implied by (S', c') when S ⊆ S' and c' ≤ c.
    let implied = |i: usize, rows: &[(Vec<bool>, f64)]| {
        rows.iter().enumerate().any(|(j, (s2, c2))| {
            let (s1, c1) = &rows[i];
            j != i
                && s1.iter().zip(s2).all(|(a, b)| !a || *b)
                && (*c2 < *c1 || (*c2 == *c1 && (s1 != s2 || j < i)))
        })
    };
    let kept: Vec<(Vec<f64>, f64)> = (0..rows.len())
        .filter(|&i| !implied(i, &rows))
        .map(|i| (rows[i].0.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect(), rows[i].1))
        .collect();
    vertex_enumeration_max(&vec![1.0; n], &kept)
}

/// Random small TE instance with at most `max_columns` tunnels in total.
pub fn random_te_instance(rng: &mut ChaCha8Rng, max_columns: usize) -> (Topology, TrafficMatrix, TunnelSet) {
    loop {
        let n = rng.random_range(3..=6);
        let topo = random_topology(rng, n, 0.4, &[1.0, 2.0, 3.0]);
        let n_demands = rng.random_range(1..=4);
        let mut entries = Vec::new();
        while entries.len() < n_demands {
            let s = rng.random_range(0..n);
            let t = rng.random_range(0..n);
            if s != t && !entries.iter().any(|&(a, b, _)| (a, b) == (s, t)) {
                entries.push((s, t, rng.random_range(1..=25) as f64));
            }
        }
        let tm = TrafficMatrix::new(&topo, entries).unwrap();
        let mut budget = max_columns;
        let mut paths: Vec<Vec<Path>> = Vec::new();
        let mut endpoints = Vec::new();
        for d in tm.demands() {
            let k = rng.random_range(1..=3).min(budget);
            let list = telab::k_shortest_paths(&topo, d.src, d.dst, k);
            budget -= list.len();
            paths.push(list);
            endpoints.push((d.src, d.dst));
        }
        if budget == max_columns {
            continue;
        }
        let ts = TunnelSet::from_paths(endpoints, paths).unwrap();
        return (topo, tm, ts);
    }
}
