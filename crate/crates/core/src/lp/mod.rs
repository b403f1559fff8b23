//! Sparse linear programs and the solver backend contract.
//!
//! Backends implement [`LpBackend`]; callers go through [`solve`], which
//! times only the backend call and re-verifies every optimal answer by
//! direct substitution before returning it.

mod lpfile;
mod simplex;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use simplex::{PivotRule, SimplexBackend};

/// Absolute feasibility tolerance on rows normalized by their largest
/// coefficient.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Bound tolerance on returned variable values.
pub const BOUND_TOL: f64 = 1e-9;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Amount by which `values` violate this row, scaled by the row's
    /// largest coefficient magnitude. Zero when satisfied.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        let raw = match self.sense {
            RowSense::Le => lhs - self.rhs,
            RowSense::Ge => self.rhs - lhs,
            RowSense::Eq => (lhs - self.rhs).abs(),
        };
        let scale = self.coeffs.iter().fold(0.0f64, |m, &(_, c)| m.max(c.abs()));
        raw.max(0.0) / if scale > 0.0 { scale } else { 1.0 }
    }
}

/// A maximization LP: `max c·x  s.t.  rows, lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpProblem {
    pub name: String,
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
}

impl LpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        LpProblem {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            objective,
        });
        self.vars.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> usize {
        self.rows.push(Constraint {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var_mut(&mut self, id: VarId) -> &mut Variable {
        &mut self.vars[id]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.objective * x).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(Error::Validation(format!(
                    "variable {} has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY || !v.objective.is_finite() {
                return Err(Error::Validation(format!("variable {} is not well-defined", v.name)));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(Error::Validation(format!("constraint {} has non-finite rhs", row.name)));
            }
            for &(v, c) in &row.coeffs {
                if v >= self.vars.len() {
                    return Err(Error::Validation(format!(
                        "constraint {} references undeclared variable {v}",
                        row.name
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::Validation(format!("constraint {} has a non-finite coefficient", row.name)));
                }
            }
        }
        Ok(())
    }

    /// Largest normalized row violation and bound violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> (f64, f64) {
        let rows = self.rows.iter().map(|r| r.violation(values)).fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        (rows, bounds)
    }

    /// Renders the problem in the CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        lpfile::write(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::NumericalFailure => "numerical_failure",
        })
    }
}

/// Whether a backend returns basic (vertex) optima or interior ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    Vertex,
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    /// Seconds spent inside the backend.
    pub solve_time: f64,
    pub kind: SolutionKind,
    pub iterations: usize,
    pub diagnostics: Option<String>,
}

impl LpSolution {
    pub fn failed(status: LpStatus, kind: SolutionKind, iterations: usize, detail: impl Into<String>) -> Self {
        LpSolution {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            solve_time: 0.0,
            kind,
            iterations,
            diagnostics: Some(detail.into()),
        }
    }
}

pub trait LpBackend: Send + Sync {
    fn name(&self) -> &str;

    fn kind(&self) -> SolutionKind;

    /// Solves `p`, which has already been validated.
    fn solve_problem(&self, p: &LpProblem) -> LpSolution;
}

/// Backend registry: `simplex` (Dantzig pricing with a Bland fallback on
/// stalls) and `simplex-bland` (Bland's rule throughout).
pub fn backend_by_name(name: &str) -> Result<Box<dyn LpBackend>> {
    match name {
        "simplex" => Ok(Box::new(SimplexBackend::new(PivotRule::Dantzig))),
        "simplex-bland" => Ok(Box::new(SimplexBackend::new(PivotRule::Bland))),
        other => Err(Error::InvalidArgument(format!(
            "unknown backend '{other}' (available: simplex, simplex-bland)"
        ))),
    }
}

/// Solves `p` with `backend`.
///
/// An optimal answer whose substitution check fails is downgraded to
/// [`LpStatus::NumericalFailure`] with the offending residuals attached.
pub fn solve(p: &LpProblem, backend: &dyn LpBackend) -> Result<LpSolution> {
    p.validate()?;
    let start = Instant::now();
    let mut sol = backend.solve_problem(p);
    sol.solve_time = start.elapsed().as_secs_f64();
    if sol.status == LpStatus::Optimal {
        // Values inside the bound tolerance are snapped onto the bound.
        for (x, v) in sol.values.iter_mut().zip(p.vars()) {
            if *x < v.lower && v.lower - *x <= BOUND_TOL * (1.0 + v.lower.abs()) {
                *x = v.lower;
            }
            if *x > v.upper && *x - v.upper <= BOUND_TOL * (1.0 + v.upper.abs()) {
                *x = v.upper;
            }
        }
        let (row_err, bound_err) = if sol.values.len() == p.num_vars() {
            p.max_violation(&sol.values)
        } else {
            (f64::INFINITY, f64::INFINITY)
        };
        if row_err > FEASIBILITY_TOL || bound_err > BOUND_TOL {
            sol.status = LpStatus::NumericalFailure;
            sol.diagnostics = Some(format!(
                "returned point fails substitution check: row violation {row_err:e}, bound violation {bound_err:e}"
            ));
        } else {
            sol.objective = p.objective_value(&sol.values);
        }
    }
    Ok(sol)
}
