//! Tunnel-based traffic engineering: topologies, traffic matrices, tunnel
//! selection, TE and forward-fault-correction LP models, a bundled simplex
//! solver, and metrics for comparing allocations.

pub mod demands;
pub mod error;
pub mod harness;
pub mod lp;
pub mod metrics;
pub mod temodels;
pub mod topo;
pub mod tunnels;

pub use demands::{fit_lognormal, generate_lognormal_tm, parse_tm, Demand, LognormalFit, TrafficMatrix};
pub use error::{Error, Result};
pub use lp::{backend_by_name, solve, LpBackend, LpProblem, LpSolution, LpStatus};
pub use metrics::{compute_metrics, MetricsReport};
pub use temodels::{
    build_ffc_lp, build_te_lp, extract_solution, verify_congestion_free, CapacityMode, ModelKind, TeModel,
    TeSolution, VerificationReport,
};
pub use topo::{parse_topology, LinkSpec, Topology};
pub use tunnels::{
    build_tunnel_sets, enumerate_single_link_scenarios, k_shortest_paths, Path, ScenarioSet, TunnelPolicy, TunnelSet,
};
