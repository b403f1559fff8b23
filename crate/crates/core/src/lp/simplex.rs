//! Two-phase bounded-variable primal simplex on a dense tableau.
//!
//! Every structural variable is shifted onto `[0, u]` (free variables are
//! split), rows are scaled by their largest coefficient, and a slack or
//! artificial column forms the starting basis. Upper bounds are handled
//! implicitly by bound flips rather than extra rows. Pivots only touch the
//! nonzeros of the pivot row and column, which keeps the network-shaped TE
//! models cheap despite the dense storage.
//!
//! When phase two stalls on degenerate pivots, the basic values are
//! perturbed. After the perturbed optimum is found the exact values are
//! recomputed from `B⁻¹b` and any residual infeasibility is removed with a
//! bounded dual simplex, which keeps the basis dual feasible.

use super::{LpBackend, LpProblem, LpSolution, LpStatus, RowSense, SolutionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Largest reduced cost, Harris ratio test; falls back to Bland's rule
    /// after a run of degenerate pivots.
    Dantzig,
    /// Smallest eligible index for both entering and leaving choices.
    Bland,
}

#[derive(Debug, Clone)]
pub struct SimplexBackend {
    rule: PivotRule,
    max_iterations: Option<usize>,
    stall_limit: usize,
}

impl SimplexBackend {
    pub fn new(rule: PivotRule) -> Self {
        SimplexBackend {
            rule,
            max_iterations: None,
            stall_limit: STALL_LIMIT,
        }
    }

    pub fn with_max_iterations(mut self, cap: usize) -> Self {
        self.max_iterations = Some(cap);
        self
    }

    /// Degenerate pivots in a row before perturbing (or switching to Bland).
    #[cfg(test)]
    pub(crate) fn with_stall_limit(mut self, pivots: usize) -> Self {
        self.stall_limit = pivots;
        self
    }
}

impl LpBackend for SimplexBackend {
    fn name(&self) -> &str {
        match self.rule {
            PivotRule::Dantzig => "simplex",
            PivotRule::Bland => "simplex-bland",
        }
    }

    fn kind(&self) -> SolutionKind {
        SolutionKind::Vertex
    }

    fn solve_problem(&self, p: &LpProblem) -> LpSolution {
        let (mut tab, map) = Tableau::build(p);
        let cap = self
            .max_iterations
            .unwrap_or(10_000 + 20 * (tab.m + tab.n));
        let mut run = Run {
            rule: self.rule,
            cap,
            iterations: 0,
            degenerate_streak: 0,
            stall_limit: self.stall_limit,
            may_perturb: false,
            perturbed: false,
        };

        if tab.has_artificials {
            if let Err(stop) = run.optimize(&mut tab, Phase::One) {
                return stop.into_solution(run.iterations);
            }
            let infeasibility: f64 = (0..tab.m)
                .filter(|&i| tab.artificial[tab.basis[i]])
                .map(|i| tab.beta[i].max(0.0))
                .sum();
            if infeasibility > 1e-9 * (1.0 + tab.rhs_scale) {
                return LpSolution::failed(
                    LpStatus::Infeasible,
                    SolutionKind::Vertex,
                    run.iterations,
                    format!("phase one ended with artificial mass {infeasibility:e}"),
                );
            }
            tab.retire_artificials();
        }
        run.may_perturb = self.rule == PivotRule::Dantzig;
        if let Err(stop) = run.optimize(&mut tab, Phase::Two) {
            return stop.into_solution(run.iterations);
        }
        if run.perturbed {
            run.may_perturb = false;
            tab.recompute_beta();
            let polished = run.dual_cleanup(&mut tab).and_then(|_| run.optimize(&mut tab, Phase::Two));
            if let Err(stop) = polished {
                return stop.into_solution(run.iterations);
            }
        }

        match map.extract(&tab) {
            Some(values) => LpSolution {
                status: LpStatus::Optimal,
                objective: p.objective_value(&values),
                values,
                solve_time: 0.0,
                kind: SolutionKind::Vertex,
                iterations: run.iterations,
                diagnostics: run
                    .perturbed
                    .then(|| "degenerate stall: solved a perturbed problem, then restored exact values".to_string()),
            },
            None => LpSolution::failed(
                LpStatus::NumericalFailure,
                SolutionKind::Vertex,
                run.iterations,
                "basic solution drifted outside its bounds",
            ),
        }
    }
}

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-10;
const DROP_TOL: f64 = 1e-12;
const STALL_LIMIT: usize = 50;
const PERTURBATION: f64 = 1e-7;
/// Basic values this far outside their bounds are repaired after a
/// perturbed solve.
const CLEANUP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum ColState {
    Basic,
    Lower,
    Upper,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

/// How an original variable is expressed in tableau columns:
/// `x = offset + Σ sign · y_col`.
struct VarMap {
    offset: f64,
    terms: Vec<(usize, f64)>,
}

struct ColumnMap {
    vars: Vec<VarMap>,
}

impl ColumnMap {
    fn extract(&self, tab: &Tableau) -> Option<Vec<f64>> {
        let mut y = vec![0.0; tab.n];
        for (j, state) in tab.state.iter().enumerate() {
            y[j] = match state {
                ColState::Lower => 0.0,
                ColState::Upper => tab.upper[j],
                ColState::Basic => f64::NAN,
            };
        }
        for (i, &col) in tab.basis.iter().enumerate() {
            let mut v = tab.beta[i];
            let ub = tab.upper[col];
            let slack = 1e-7 * (1.0 + v.abs());
            if v < -slack || v > ub + slack {
                return None;
            }
            v = v.clamp(0.0, ub);
            y[col] = v;
        }
        Some(
            self.vars
                .iter()
                .map(|m| m.offset + m.terms.iter().map(|&(c, s)| s * y[c]).sum::<f64>())
                .collect(),
        )
    }
}

struct Tableau {
    m: usize,
    n: usize,
    /// Row-major `m × n` coefficients of `B⁻¹A`.
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    upper: Vec<f64>,
    artificial: Vec<bool>,
    has_artificials: bool,
    /// Reduced costs for phase one (maximize −Σ artificials) and phase two.
    d1: Vec<f64>,
    d2: Vec<f64>,
    rhs_scale: f64,
    /// Initial right-hand side and, per row, the column that started as the
    /// unit vector `e_i`; that column of `t` is `B⁻¹e_i`.
    b0: Vec<f64>,
    unit_col: Vec<usize>,
}

impl Tableau {
    fn build(p: &LpProblem) -> (Tableau, ColumnMap) {
        // Structural columns after shifting bounds onto [0, u].
        let mut upper = Vec::new();
        let mut cost = Vec::new();
        let mut vars = Vec::with_capacity(p.num_vars());
        for v in p.vars() {
            let (lo, hi) = (v.lower, v.upper);
            let map = if lo.is_finite() {
                upper.push(hi - lo);
                cost.push(v.objective);
                VarMap {
                    offset: lo,
                    terms: vec![(upper.len() - 1, 1.0)],
                }
            } else if hi.is_finite() {
                upper.push(f64::INFINITY);
                cost.push(-v.objective);
                VarMap {
                    offset: hi,
                    terms: vec![(upper.len() - 1, -1.0)],
                }
            } else {
                upper.push(f64::INFINITY);
                cost.push(v.objective);
                upper.push(f64::INFINITY);
                cost.push(-v.objective);
                VarMap {
                    offset: 0.0,
                    terms: vec![(upper.len() - 2, 1.0), (upper.len() - 1, -1.0)],
                }
            };
            vars.push(map);
        }
        let n_struct = upper.len();

        // Rows in terms of the shifted columns, as `Σ a y (≤ | =) b`.
        struct Row {
            coeffs: Vec<(usize, f64)>,
            rhs: f64,
            equality: bool,
        }
        let mut rows = Vec::with_capacity(p.num_constraints());
        for c in p.constraints() {
            let mut dense: Vec<(usize, f64)> = Vec::with_capacity(c.coeffs.len());
            let mut rhs = c.rhs;
            for &(v, a) in &c.coeffs {
                let map = &vars[v];
                rhs -= a * map.offset;
                for &(col, sign) in &map.terms {
                    dense.push((col, a * sign));
                }
            }
            let flip = if c.sense == RowSense::Ge { -1.0 } else { 1.0 };
            let scale = dense.iter().fold(0.0f64, |s, &(_, a)| s.max(a.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            rows.push(Row {
                coeffs: dense.into_iter().map(|(col, a)| (col, flip * a / scale)).collect(),
                rhs: flip * rhs / scale,
                equality: c.sense == RowSense::Eq,
            });
        }

        let m = rows.len();
        let n_slack = rows.iter().filter(|r| !r.equality).count();
        let n_art = rows.iter().filter(|r| r.equality || r.rhs < 0.0).count();
        let n = n_struct + n_slack + n_art;

        let mut t = vec![0.0; m * n];
        let mut beta = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut artificial = vec![false; n];
        upper.resize(n, f64::INFINITY);
        cost.resize(n, 0.0);

        let mut unit_col = vec![0; m];
        let mut next_slack = n_struct;
        let mut next_art = n_struct + n_slack;
        let mut rhs_scale: f64 = 0.0;
        for (i, row) in rows.iter().enumerate() {
            // Negate rows with negative rhs so the basis starts at b ≥ 0.
            let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
            let base = i * n;
            for &(col, a) in &row.coeffs {
                t[base + col] += sign * a;
            }
            beta[i] = sign * row.rhs;
            rhs_scale = rhs_scale.max(beta[i]);
            if !row.equality {
                t[base + next_slack] = sign;
                if sign > 0.0 {
                    basis[i] = next_slack;
                }
                next_slack += 1;
            }
            if row.equality || sign < 0.0 {
                t[base + next_art] = 1.0;
                artificial[next_art] = true;
                basis[i] = next_art;
                next_art += 1;
            }
            unit_col[i] = basis[i];
        }

        let mut state = vec![ColState::Lower; n];
        for &b in &basis {
            state[b] = ColState::Basic;
        }
        let mut d1 = vec![0.0; n];
        for i in 0..m {
            if artificial[basis[i]] {
                for j in 0..n {
                    if !artificial[j] {
                        d1[j] += t[i * n + j];
                    }
                }
            }
        }

        let tab = Tableau {
            m,
            n,
            t,
            b0: beta.clone(),
            unit_col,
            beta,
            basis,
            state,
            upper,
            artificial,
            has_artificials: n_art > 0,
            d1,
            d2: cost,
            rhs_scale,
        };
        (tab, ColumnMap { vars })
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.n + j]
    }

    /// Pins artificials at zero once a feasible basis is found.
    fn retire_artificials(&mut self) {
        for j in 0..self.n {
            if self.artificial[j] {
                self.upper[j] = 0.0;
            }
        }
        for i in 0..self.m {
            if self.artificial[self.basis[i]] {
                self.beta[i] = 0.0;
            }
        }
    }

    /// `β = B⁻¹(b − Σ_{j at upper} A_j u_j)` from the current tableau.
    fn recompute_beta(&mut self) {
        let n = self.n;
        for i in 0..self.m {
            let row = &self.t[i * n..(i + 1) * n];
            let mut v: f64 = self.unit_col.iter().zip(&self.b0).map(|(&c, &b)| row[c] * b).sum();
            for ((&r, state), &u) in row.iter().zip(&self.state).zip(&self.upper) {
                if *state == ColState::Upper && r != 0.0 {
                    v -= r * u;
                }
            }
            self.beta[i] = v;
        }
    }

    /// Moves every basic value into the interior of its bounds by a small
    /// deterministic pseudo-random amount.
    fn perturb(&mut self) {
        let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
        for i in 0..self.m {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let unit = (state >> 11) as f64 / (1u64 << 53) as f64;
            let ub = self.upper[self.basis[i]];
            let delta = PERTURBATION * (1.0 + unit) * (1.0 + self.beta[i].abs());
            if ub.is_finite() {
                let room = 0.5 * ub;
                if self.beta[i] > room {
                    self.beta[i] -= delta.min(room);
                } else {
                    self.beta[i] += delta.min(room);
                }
            } else {
                self.beta[i] += delta;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, row_buf: &mut Vec<(usize, f64)>) {
        let n = self.n;
        let piv = self.t[r * n + q];
        row_buf.clear();
        for j in 0..n {
            let cell = &mut self.t[r * n + j];
            if *cell != 0.0 {
                *cell /= piv;
                if cell.abs() < DROP_TOL {
                    *cell = 0.0;
                } else {
                    row_buf.push((j, *cell));
                }
            }
        }
        self.t[r * n + q] = 1.0;

        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * n..(i + 1) * n];
            for &(j, a) in row_buf.iter() {
                let v = row[j] - f * a;
                row[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[q] = 0.0;
        }
        for d in [&mut self.d1, &mut self.d2] {
            let f = d[q];
            if f != 0.0 {
                for &(j, a) in row_buf.iter() {
                    d[j] -= f * a;
                }
                d[q] = 0.0;
            }
        }
    }
}

enum Stop {
    Unbounded,
    IterationCap,
    Numerical(&'static str),
}

impl Stop {
    fn into_solution(self, iterations: usize) -> LpSolution {
        let (status, detail) = match self {
            Stop::Unbounded => (LpStatus::Unbounded, "objective unbounded along an improving ray".to_string()),
            Stop::IterationCap => (
                LpStatus::NumericalFailure,
                format!("iteration cap reached after {iterations} pivots (possible cycling)"),
            ),
            Stop::Numerical(msg) => (LpStatus::NumericalFailure, msg.to_string()),
        };
        LpSolution::failed(status, SolutionKind::Vertex, iterations, detail)
    }
}

struct Run {
    rule: PivotRule,
    cap: usize,
    iterations: usize,
    degenerate_streak: usize,
    stall_limit: usize,
    may_perturb: bool,
    perturbed: bool,
}

impl Run {
    fn optimize(&mut self, tab: &mut Tableau, phase: Phase) -> Result<(), Stop> {
        let mut row_buf = Vec::new();
        self.degenerate_streak = 0;
        loop {
            if self.degenerate_streak >= self.stall_limit && phase == Phase::Two && self.may_perturb && !self.perturbed {
                tab.perturb();
                self.perturbed = true;
                self.degenerate_streak = 0;
            }
            let bland = self.rule == PivotRule::Bland || self.degenerate_streak >= self.stall_limit;
            let Some(q) = Self::entering(tab, phase, bland) else {
                return Ok(());
            };
            if self.iterations >= self.cap {
                return Err(Stop::IterationCap);
            }
            self.iterations += 1;

            let dir = if tab.state[q] == ColState::Lower { 1.0 } else { -1.0 };
            let leave = Self::ratio_test(tab, q, dir, bland);
            let flip_at = tab.upper[q];
            let (theta, pivot_row) = match leave {
                Some((r, ratio)) if ratio < flip_at => (ratio, Some(r)),
                _ if flip_at.is_finite() => (flip_at, None),
                Some((r, ratio)) => (ratio, Some(r)),
                None => {
                    return Err(match phase {
                        Phase::Two => Stop::Unbounded,
                        Phase::One => Stop::Numerical("phase one objective unbounded"),
                    })
                }
            };
            if !theta.is_finite() {
                return Err(Stop::Numerical("non-finite step length"));
            }
            if theta <= 1e-12 {
                self.degenerate_streak += 1;
            } else {
                self.degenerate_streak = 0;
            }

            if theta != 0.0 {
                for i in 0..tab.m {
                    let a = tab.at(i, q);
                    if a != 0.0 {
                        tab.beta[i] -= dir * a * theta;
                    }
                }
            }
            let start = if tab.state[q] == ColState::Lower { 0.0 } else { tab.upper[q] };
            match pivot_row {
                None => {
                    tab.state[q] = if dir > 0.0 { ColState::Upper } else { ColState::Lower };
                }
                Some(r) => {
                    let leaving = tab.basis[r];
                    let alpha = dir * tab.at(r, q);
                    // A basic variable decreasing lands on its lower bound.
                    tab.state[leaving] = if alpha > 0.0 { ColState::Lower } else { ColState::Upper };
                    tab.beta[r] = start + dir * theta;
                    tab.basis[r] = q;
                    tab.state[q] = ColState::Basic;
                    tab.pivot(r, q, &mut row_buf);
                }
            }
        }
    }

    /// Bounded dual simplex from a dual feasible basis: drives every basic
    /// value back inside its bounds.
    fn dual_cleanup(&mut self, tab: &mut Tableau) -> Result<(), Stop> {
        let mut row_buf = Vec::new();
        loop {
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..tab.m {
                let ub = tab.upper[tab.basis[i]];
                let v = tab.beta[i];
                let excess = if v < 0.0 { -v } else if v > ub { v - ub } else { 0.0 };
                let scale = 1.0 + if v < 0.0 { 0.0 } else { ub.abs() };
                if excess > CLEANUP_TOL * scale && worst.is_none_or(|(_, w)| excess > w) {
                    worst = Some((i, excess));
                }
            }
            let Some((r, _)) = worst else {
                return Ok(());
            };
            if self.iterations >= self.cap {
                return Err(Stop::IterationCap);
            }
            self.iterations += 1;

            let below = tab.beta[r] < 0.0;
            let target = if below { 0.0 } else { tab.upper[tab.basis[r]] };
            // Entering j must move x_r towards `target` while its reduced
            // cost keeps the sign required for optimality.
            let mut best: Option<(usize, f64, f64)> = None;
            for j in 0..tab.n {
                let a = tab.at(r, j);
                if tab.state[j] == ColState::Basic || tab.upper[j] == 0.0 || a.abs() <= PIVOT_TOL {
                    continue;
                }
                let helps = match tab.state[j] {
                    ColState::Lower => (a < 0.0) == below,
                    ColState::Upper => (a > 0.0) == below,
                    ColState::Basic => false,
                };
                if !helps {
                    continue;
                }
                let ratio = tab.d2[j].abs() / a.abs();
                let better = match best {
                    None => true,
                    Some((_, br, ba)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && a.abs() > ba),
                };
                if better {
                    best = Some((j, ratio, a.abs()));
                }
            }
            let Some((q, _, _)) = best else {
                return Err(Stop::Numerical("no entering column while restoring feasibility"));
            };

            let step = (tab.beta[r] - target) / tab.at(r, q);
            for i in 0..tab.m {
                let a = tab.at(i, q);
                if a != 0.0 {
                    tab.beta[i] -= a * step;
                }
            }
            let start = if tab.state[q] == ColState::Upper { tab.upper[q] } else { 0.0 };
            let leaving = tab.basis[r];
            tab.state[leaving] = if below { ColState::Lower } else { ColState::Upper };
            tab.beta[r] = start + step;
            tab.basis[r] = q;
            tab.state[q] = ColState::Basic;
            tab.pivot(r, q, &mut row_buf);
        }
    }

    fn eligible(tab: &Tableau, phase: Phase, j: usize) -> Option<f64> {
        if tab.artificial[j] {
            return None;
        }
        let d = match phase {
            Phase::One => tab.d1[j],
            Phase::Two => tab.d2[j],
        };
        match tab.state[j] {
            ColState::Lower if d > OPT_TOL && tab.upper[j] > 0.0 => Some(d),
            ColState::Upper if d < -OPT_TOL => Some(-d),
            _ => None,
        }
    }

    fn entering(tab: &Tableau, phase: Phase, bland: bool) -> Option<usize> {
        if bland {
            return (0..tab.n).find(|&j| Self::eligible(tab, phase, j).is_some());
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..tab.n {
            if let Some(score) = Self::eligible(tab, phase, j) {
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((j, score));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    /// Leaving row and step length for entering column `q` moving in
    /// direction `dir`, ignoring the entering variable's own bound.
    fn ratio_test(tab: &Tableau, q: usize, dir: f64, bland: bool) -> Option<(usize, f64)> {
        let limit = |i: usize, slack: f64| -> Option<(f64, f64)> {
            let alpha = dir * tab.at(i, q);
            let col = tab.basis[i];
            if alpha > PIVOT_TOL {
                Some(((tab.beta[i] + slack) / alpha, alpha))
            } else if alpha < -PIVOT_TOL && tab.upper[col].is_finite() {
                Some(((tab.upper[col] - tab.beta[i] + slack) / -alpha, alpha))
            } else {
                None
            }
        };

        if bland {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..tab.m {
                if let Some((ratio, _)) = limit(i, 0.0) {
                    let ratio = ratio.max(0.0);
                    let better = match best {
                        None => true,
                        Some((b, r)) => {
                            ratio < r - 1e-12 * (1.0 + r)
                                || (ratio <= r + 1e-12 * (1.0 + r) && tab.basis[i] < tab.basis[b])
                        }
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            return best;
        }

        // Harris: relax every bound slightly, then among rows that block
        // within the relaxed step take the largest pivot element.
        let mut relaxed = f64::INFINITY;
        for i in 0..tab.m {
            if let Some((ratio, _)) = limit(i, HARRIS_TOL) {
                relaxed = relaxed.min(ratio);
            }
        }
        if !relaxed.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..tab.m {
            if let Some((ratio, alpha)) = limit(i, 0.0) {
                if ratio <= relaxed && best.is_none_or(|(_, _, a)| alpha.abs() > a) {
                    best = Some((i, ratio.max(0.0), alpha.abs()));
                }
            }
        }
        best.map(|(i, ratio, _)| (i, ratio))
    }
}
