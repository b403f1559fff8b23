//! Python bindings for the `telab` traffic engineering library.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

use telab_core::harness::{calibrate_capacities, run_experiment, ExperimentConfig};
use telab_core::lp::backend_by_name;
use telab_core::metrics::compute_metrics;
use telab_core::temodels::{build_ffc_lp, build_te_lp, extract_solution, verify_congestion_free, TeSolution};
use telab_core::{
    build_tunnel_sets, enumerate_single_link_scenarios, fit_lognormal, generate_lognormal_tm, k_shortest_paths,
    parse_tm, parse_topology, solve as lp_solve, CapacityMode, Error, LognormalFit, ModelKind, TunnelPolicy,
};

create_exception!(telab, SolverError, PyException, "The LP solver did not reach an optimum.");

fn py_err(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        Error::NotOptimal { .. } => SolverError::new_err(err.to_string()),
        Error::Parse(_) | Error::Validation(_) | Error::InvalidArgument(_) => PyValueError::new_err(err.to_string()),
    }
}

/// Serializes through JSON into native Python objects.
fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Topology", module = "telab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTopology {
    inner: telab_core::Topology,
}

#[pymethods]
impl PyTopology {
    /// Parses a topology JSON document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyTopology {
            inner: parse_topology(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn node_ids(&self) -> Vec<String> {
        self.inner.nodes().iter().map(|n| n.id.clone()).collect()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn link_count(&self) -> usize {
        self.inner.link_count()
    }

    #[getter]
    fn arc_count(&self) -> usize {
        self.inner.arc_count()
    }

    /// `(src, dst, capacity, weight)` per directed arc, indexed by arc id.
    fn arcs(&self) -> Vec<(String, String, f64, f64)> {
        self.inner
            .arcs()
            .iter()
            .map(|a| {
                (
                    self.inner.node_id(a.src).to_string(),
                    self.inner.node_id(a.dst).to_string(),
                    a.capacity,
                    a.weight,
                )
            })
            .collect()
    }

    fn scale_capacities(&self, factor: f64) -> PyResult<Self> {
        Ok(PyTopology {
            inner: self.inner.scale_capacities(factor).map_err(py_err)?,
        })
    }

    /// Up to `k` loopless paths as `(cost, [node ids])`.
    fn k_shortest_paths(&self, src: &str, dst: &str, k: usize) -> PyResult<Vec<(f64, Vec<String>)>> {
        let index = |id: &str| {
            self.inner
                .node_index(id)
                .ok_or_else(|| PyValueError::new_err(format!("unknown node '{id}'")))
        };
        Ok(k_shortest_paths(&self.inner, index(src)?, index(dst)?, k)
            .into_iter()
            .map(|p| (p.cost, p.nodes.iter().map(|&n| self.inner.node_id(n).to_string()).collect()))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(name={:?}, nodes={}, links={})",
            self.inner.name,
            self.inner.node_count(),
            self.inner.link_count()
        )
    }
}

#[pyclass(name = "TrafficMatrix", module = "telab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTrafficMatrix {
    inner: telab_core::TrafficMatrix,
    topo: telab_core::Topology,
}

#[pymethods]
impl PyTrafficMatrix {
    /// Parses JSON (`{"demands": [...]}`) or `src,dst,volume` CSV.
    #[staticmethod]
    fn parse(text: &str, topo: &PyTopology) -> PyResult<Self> {
        Ok(PyTrafficMatrix {
            inner: parse_tm(text, &topo.inner).map_err(py_err)?,
            topo: topo.inner.clone(),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf, topo: &PyTopology) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text, topo)
    }

    /// One lognormal demand per ordered node pair.
    #[staticmethod]
    #[pyo3(signature = (topo, mu, sigma, seed = 0))]
    fn lognormal(topo: &PyTopology, mu: f64, sigma: f64, seed: u64) -> PyResult<Self> {
        let fit = LognormalFit { mu, sigma, n_samples: 0 };
        Ok(PyTrafficMatrix {
            inner: generate_lognormal_tm(&topo.inner, &fit, seed).map_err(py_err)?,
            topo: topo.inner.clone(),
        })
    }

    /// `(mu, sigma, n_samples)` fitted to the positive volumes.
    fn fit_lognormal(&self) -> PyResult<(f64, f64, usize)> {
        let fit = fit_lognormal(&self.inner).map_err(py_err)?;
        Ok((fit.mu, fit.sigma, fit.n_samples))
    }

    fn scale(&self, factor: f64) -> PyResult<Self> {
        Ok(PyTrafficMatrix {
            inner: self.inner.scale(factor).map_err(py_err)?,
            topo: self.topo.clone(),
        })
    }

    #[getter]
    fn total_volume(&self) -> f64 {
        self.inner.total_volume()
    }

    /// `(src, dst, volume)` per demand, indexed by demand id.
    fn demands(&self) -> Vec<(String, String, f64)> {
        self.inner
            .demands()
            .iter()
            .map(|d| (self.topo.node_id(d.src).to_string(), self.topo.node_id(d.dst).to_string(), d.volume))
            .collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json(&self.topo)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "TunnelSet", module = "telab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTunnelSet {
    inner: telab_core::TunnelSet,
    topo: telab_core::Topology,
}

#[pymethods]
impl PyTunnelSet {
    /// Builds tunnels with a policy string: `fixed:K`, `adaptive`, or
    /// `adaptive:A/B/C`.
    #[staticmethod]
    #[pyo3(signature = (topo, tm, policy = "fixed:5"))]
    fn build(topo: &PyTopology, tm: &PyTrafficMatrix, policy: &str) -> PyResult<Self> {
        let policy: TunnelPolicy = policy.parse().map_err(py_err)?;
        Ok(PyTunnelSet {
            inner: build_tunnel_sets(&topo.inner, &tm.inner, &policy).map_err(py_err)?,
            topo: topo.inner.clone(),
        })
    }

    #[getter]
    fn total_slots(&self) -> usize {
        self.inner.total_slots()
    }

    /// Demand ids with no tunnel.
    fn unroutable(&self) -> Vec<usize> {
        self.inner.unroutable()
    }

    /// Node-id paths of the tunnels of demand `f`.
    fn paths(&self, f: usize) -> PyResult<Vec<Vec<String>>> {
        if f >= self.inner.demand_count() {
            return Err(PyValueError::new_err(format!("demand {f} out of range")));
        }
        Ok(self
            .inner
            .for_demand(f)
            .iter()
            .map(|&t| {
                self.inner
                    .tunnel(t)
                    .path
                    .nodes
                    .iter()
                    .map(|&n| self.topo.node_id(n).to_string())
                    .collect()
            })
            .collect())
    }
}

#[pyclass(name = "Solution", module = "telab", frozen, skip_from_py_object)]
struct PySolution {
    inner: TeSolution,
    tm: telab_core::TrafficMatrix,
    tunnels: telab_core::TunnelSet,
    topo: telab_core::Topology,
    scale: f64,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective
    }

    /// Admitted flow `b_f` per demand.
    #[getter]
    fn delivered(&self) -> Vec<f64> {
        self.inner.delivered.clone()
    }

    /// Rate `a_{f,t}` per tunnel.
    #[getter]
    fn allocation(&self) -> Vec<f64> {
        self.inner.allocation.clone()
    }

    /// Normal-condition load per arc.
    #[getter]
    fn loads(&self) -> Vec<f64> {
        self.inner.loads.clone()
    }

    #[getter]
    fn solve_time(&self) -> f64 {
        self.inner.solve_time
    }

    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let report = compute_metrics(&self.inner, &self.tm, &self.tunnels, &self.topo).map_err(py_err)?;
        to_py(py, &report)
    }

    /// Checks every single-link failure scenario; returns the report.
    fn verify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let scen = enumerate_single_link_scenarios(&self.topo);
        let report = verify_congestion_free(&self.inner, &self.tunnels, &scen, &self.topo).map_err(py_err)?;
        to_py(py, &report)
    }

    /// Solution dump accepted by `telab verify`.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner.to_dump(&self.tunnels, &self.topo, self.scale))
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Builds and solves a TE or FFC model at the given demand scale.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (topo, tm, tunnels, model = "te", capacity_mode = "all", backend = "simplex", scale = 1.0))]
fn solve(
    py: Python<'_>,
    topo: &PyTopology,
    tm: &PyTrafficMatrix,
    tunnels: &PyTunnelSet,
    model: &str,
    capacity_mode: &str,
    backend: &str,
    scale: f64,
) -> PyResult<PySolution> {
    let kind: ModelKind = model.parse().map_err(py_err)?;
    let mode: CapacityMode = capacity_mode.parse().map_err(py_err)?;
    let backend = backend_by_name(backend).map_err(py_err)?;
    let scaled = tm.inner.scale(scale).map_err(py_err)?;
    let sol = py
        .detach(|| {
            let te = match kind {
                ModelKind::Te => build_te_lp(&topo.inner, &scaled, &tunnels.inner)?,
                ModelKind::Ffc => {
                    let scen = enumerate_single_link_scenarios(&topo.inner);
                    build_ffc_lp(&topo.inner, &scaled, &tunnels.inner, &scen, mode)?
                }
            };
            let lp = lp_solve(&te.problem, backend.as_ref())?;
            extract_solution(&lp, &te, &tunnels.inner, &topo.inner)
        })
        .map_err(py_err)?;
    Ok(PySolution {
        inner: sol,
        tm: scaled,
        tunnels: tunnels.inner.clone(),
        topo: topo.inner.clone(),
        scale,
    })
}

/// Smallest capacity factor at which TE routes every routable demand.
#[pyfunction]
#[pyo3(signature = (topo, tm, tunnels, backend = "simplex"))]
fn calibrate(py: Python<'_>, topo: &PyTopology, tm: &PyTrafficMatrix, tunnels: &PyTunnelSet, backend: &str) -> PyResult<f64> {
    let backend = backend_by_name(backend).map_err(py_err)?;
    py.detach(|| calibrate_capacities(&topo.inner, &tm.inner, &tunnels.inner, backend.as_ref()))
        .map(|c| c.factor)
        .map_err(py_err)
}

/// Runs a sweep from a JSON config file and returns its result rows.
#[pyfunction]
fn run_sweep<'py>(py: Python<'py>, config: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::load(&config).map_err(py_err)?;
    let out = py.detach(|| run_experiment(&cfg)).map_err(py_err)?;
    to_py(py, &out.rows())
}

#[pymodule]
fn telab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTopology>()?;
    m.add_class::<PyTrafficMatrix>()?;
    m.add_class::<PyTunnelSet>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
