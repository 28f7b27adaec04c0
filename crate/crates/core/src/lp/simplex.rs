//! Bounded-variable primal revised simplex.
//!
//! Every row `r` gets a logical variable `s_r = a_r . x` whose bounds encode
//! the relation, so the working system is `[A | -I] (x, s) = 0` with bounds on
//! all columns and the all-logical basis as a starting point. Nonbasic
//! variables sit at a finite bound, or at zero when free. Phase 1 minimizes
//! the sum of bound infeasibilities of the basic variables; phase 2 the true
//! objective. Pricing is Dantzig (largest reduced cost, lowest index on
//! ties) with a switch to Bland's rule after a run of degenerate pivots. The
//! ratio test is Harris' two-pass test with bound flips.

use std::time::Instant;

use super::lu::LuFactors;
use super::{LpProblem, LpSolution, LpStatus, Relation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Iteration cap (basis changes and bound flips).
    pub max_pivots: usize,
    /// Switch to Bland's rule after `degenerate_stall` degenerate pivots.
    pub anti_cycling: bool,
    pub degenerate_stall: usize,
    pub refactor_interval: usize,
    /// Wall-clock cutoff; reaching it reports `IterLimit`.
    pub deadline: Option<Instant>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-7,
            max_pivots: 200_000,
            anti_cycling: true,
            degenerate_stall: 50,
            refactor_interval: 100,
            deadline: None,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.feasibility_tol > 0.0 && self.optimality_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.refactor_interval == 0 {
            return Err(Error::Config("refactor interval must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    Lower,
    Upper,
    /// Nonbasic at value zero (free, or boxed around zero).
    Zero,
}

/// Statuses of structural and logical variables at the end of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    num_vars: usize,
    num_rows: usize,
    states: Vec<VarState>,
}

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const DRIFT_CHECK_EVERY: usize = 25;
const DRIFT_TOL: f64 = 1e-9;

struct Eta {
    pos: usize,
    pivot: f64,
    col: Vec<(usize, f64)>,
}

struct Simplex<'a> {
    lp: &'a LpProblem,
    cfg: &'a SolverConfig,
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    state: Vec<VarState>,
    x: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    lu: LuFactors,
    etas: Vec<Eta>,
    scratch: Vec<f64>,
    pivots: usize,
    phase1_pivots: usize,
    degenerate_run: usize,
    bland: bool,
    since_drift_check: usize,
    in_phase1: Option<bool>,
    unbounded_dir: Option<(usize, f64, Vec<f64>)>,
}

/// Solves `lp` from the all-logical basis.
pub fn solve(lp: &LpProblem, cfg: &SolverConfig) -> Result<LpSolution> {
    solve_warm(lp, cfg, None)
}

/// Solves `lp`, starting from `warm` when it fits the problem's shape.
///
/// A basis left by a previous solve of a problem with the same rows and
/// bounds is primal feasible, so a new objective goes straight to phase 2.
pub fn solve_warm(lp: &LpProblem, cfg: &SolverConfig, warm: Option<&Basis>) -> Result<LpSolution> {
    lp.validate()?;
    cfg.validate()?;

    // rows without coefficients either hold trivially or make the LP infeasible
    for (r, row) in lp.rows.iter().enumerate() {
        if row.coeffs.iter().all(|&(_, a)| a == 0.0)
            && row.violation(&vec![0.0; lp.num_vars]) > cfg.feasibility_tol
        {
            log::debug!("row {} is empty and unsatisfiable", row.name);
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective_value: f64::NAN,
                x: vec![0.0; lp.num_vars],
                active_trust_bounds: 0,
                pivots: 0,
                phase1_pivots: 0,
                ray: None,
                infeasible_row: Some(r),
                basis: None,
            });
        }
    }

    let mut s = Simplex::new(lp, cfg);
    let warm_ok = warm.is_some_and(|b| s.apply_basis(b));
    if !warm_ok {
        s.cold_start();
    }
    s.refactor();
    let status = s.run();
    Ok(s.finish(status))
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LpProblem, cfg: &'a SolverConfig) -> Self {
        let n = lp.num_vars;
        let m = lp.rows.len();

        // column-major copy of the structural part, duplicates merged
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a == 0.0 {
                    continue;
                }
                match per_col[j].last_mut() {
                    Some(last) if last.0 == r => last.1 += a,
                    _ => per_col[j].push((r, a)),
                }
            }
        }
        let mut col_start = Vec::with_capacity(n + 1);
        let mut col_row = Vec::new();
        let mut col_val = Vec::new();
        col_start.push(0);
        for col in &per_col {
            for &(r, a) in col {
                if a != 0.0 {
                    col_row.push(r);
                    col_val.push(a);
                }
            }
            col_start.push(col_row.len());
        }

        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        for row in &lp.rows {
            let (l, u) = match row.relation {
                Relation::Le => (f64::NEG_INFINITY, row.rhs),
                Relation::Ge => (row.rhs, f64::INFINITY),
                Relation::Eq => (row.rhs, row.rhs),
            };
            lower.push(l);
            upper.push(u);
        }
        let mut cost = lp.objective.clone();
        cost.resize(n + m, 0.0);

        Simplex {
            lp,
            cfg,
            n,
            m,
            col_start,
            col_row,
            col_val,
            lower,
            upper,
            cost,
            state: vec![VarState::Zero; n + m],
            x: vec![0.0; n + m],
            basis: Vec::with_capacity(m),
            pos: vec![usize::MAX; n + m],
            lu: LuFactors::default(),
            etas: Vec::new(),
            scratch: Vec::new(),
            pivots: 0,
            phase1_pivots: 0,
            degenerate_run: 0,
            bland: false,
            since_drift_check: 0,
            in_phase1: None,
            unbounded_dir: None,
        }
    }

    fn default_state(&self, j: usize) -> VarState {
        let (l, u) = (self.lower[j], self.upper[j]);
        match (l.is_finite(), u.is_finite()) {
            (false, false) => VarState::Zero,
            (true, false) => VarState::Lower,
            (false, true) => VarState::Upper,
            (true, true) if l < 0.0 && 0.0 < u => VarState::Zero,
            (true, true) if l.abs() <= u.abs() => VarState::Lower,
            _ => VarState::Upper,
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Lower => self.lower[j],
            VarState::Upper => self.upper[j],
            _ => 0.0,
        }
    }

    fn set_basis_from_states(&mut self) {
        self.basis.clear();
        self.pos.iter_mut().for_each(|p| *p = usize::MAX);
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                self.pos[j] = self.basis.len();
                self.basis.push(j);
            } else {
                self.x[j] = self.nonbasic_value(j);
            }
        }
    }

    fn cold_start(&mut self) {
        for j in 0..self.n {
            self.state[j] = self.default_state(j);
        }
        for r in 0..self.m {
            self.state[self.n + r] = VarState::Basic;
        }
        self.set_basis_from_states();
    }

    fn apply_basis(&mut self, b: &Basis) -> bool {
        if b.num_vars != self.n || b.num_rows != self.m || b.states.len() != self.n + self.m {
            return false;
        }
        let basic = b.states.iter().filter(|s| **s == VarState::Basic).count();
        if basic != self.m {
            return false;
        }
        for (j, &s) in b.states.iter().enumerate() {
            let ok = match s {
                VarState::Basic => true,
                VarState::Lower => self.lower[j].is_finite(),
                VarState::Upper => self.upper[j].is_finite(),
                VarState::Zero => self.lower[j] <= 0.0 && 0.0 <= self.upper[j],
            };
            self.state[j] = if ok { s } else { self.default_state(j) };
        }
        self.set_basis_from_states();
        true
    }

    fn for_each_in_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                f(self.col_row[k], self.col_val[k]);
            }
        } else {
            f(j - self.n, -1.0);
        }
    }

    fn dot_col(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|k| y[self.col_row[k]] * self.col_val[k])
                .sum()
        } else {
            -y[j - self.n]
        }
    }

    fn refactor(&mut self) {
        for _attempt in 0..=self.m {
            let cols: Vec<Vec<(usize, f64)>> = self
                .basis
                .iter()
                .map(|&j| {
                    let mut c = Vec::new();
                    self.for_each_in_col(j, |r, a| c.push((r, a)));
                    c
                })
                .collect();
            match LuFactors::factorize(self.m, &cols) {
                Ok(f) => {
                    self.lu = f;
                    self.etas.clear();
                    self.recompute_basic_values();
                    return;
                }
                Err(sing) => {
                    log::debug!(
                        "singular basis: replacing {} columns with logicals",
                        sing.cols.len()
                    );
                    for (&r, &p) in sing.rows.iter().zip(&sing.cols) {
                        let out = self.basis[p];
                        let v = self.x[out];
                        let st = if !self.lower[out].is_finite() && !self.upper[out].is_finite() {
                            VarState::Zero
                        } else if !self.upper[out].is_finite()
                            || (self.lower[out].is_finite()
                                && (v - self.lower[out]).abs() <= (self.upper[out] - v).abs())
                        {
                            VarState::Lower
                        } else {
                            VarState::Upper
                        };
                        self.state[out] = st;
                        self.pos[out] = usize::MAX;
                        self.x[out] = self.nonbasic_value(out);
                        let inn = self.n + r;
                        self.state[inn] = VarState::Basic;
                        self.basis[p] = inn;
                        self.pos[inn] = p;
                    }
                }
            }
        }
        unreachable!("all-logical basis is always nonsingular");
    }

    fn recompute_basic_values(&mut self) {
        let mut b = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.x[j];
            if v != 0.0 {
                self.for_each_in_col(j, |r, a| b[r] -= a * v);
            }
        }
        self.ftran(&mut b);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = b[p];
        }
        self.since_drift_check = 0;
    }

    fn ftran(&mut self, b: &mut [f64]) {
        self.lu.ftran(b, &mut self.scratch);
        for e in &self.etas {
            let xp = b[e.pos] / e.pivot;
            if xp != 0.0 {
                for &(i, a) in &e.col {
                    b[i] -= a * xp;
                }
            }
            b[e.pos] = xp;
        }
    }

    fn btran(&mut self, c: &mut [f64]) {
        for e in self.etas.iter().rev() {
            let mut v = c[e.pos];
            for &(i, a) in &e.col {
                v -= a * c[i];
            }
            c[e.pos] = v / e.pivot;
        }
        self.lu.btran(c, &mut self.scratch);
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let tol = self.cfg.feasibility_tol;
        let v = self.x[j];
        if v < self.lower[j] - tol {
            -1.0
        } else if v > self.upper[j] + tol {
            1.0
        } else {
            0.0
        }
    }

    fn primal_infeasible(&self) -> bool {
        self.basis.iter().any(|&j| self.infeasibility(j) != 0.0)
    }

    fn max_residual(&self) -> f64 {
        let mut res = vec![0.0; self.m];
        for j in 0..self.n {
            let v = self.x[j];
            if v != 0.0 {
                for k in self.col_start[j]..self.col_start[j + 1] {
                    res[self.col_row[k]] += self.col_val[k] * v;
                }
            }
        }
        res.iter()
            .enumerate()
            .map(|(r, a)| (a - self.x[self.n + r]).abs())
            .fold(0.0, f64::max)
    }

    fn run(&mut self) -> LpStatus {
        let tol_d = self.cfg.optimality_tol;
        let tol_p = self.cfg.feasibility_tol;
        loop {
            if self.pivots >= self.cfg.max_pivots {
                log::debug!("pivot limit {} reached", self.cfg.max_pivots);
                return LpStatus::IterLimit;
            }
            if let Some(deadline) = self.cfg.deadline {
                if self.pivots.is_multiple_of(32) && Instant::now() >= deadline {
                    log::debug!("deadline reached after {} pivots", self.pivots);
                    return LpStatus::IterLimit;
                }
            }
            if self.etas.len() >= self.cfg.refactor_interval {
                self.refactor();
            } else if self.since_drift_check >= DRIFT_CHECK_EVERY {
                self.since_drift_check = 0;
                let scale = 1.0 + self.x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if self.max_residual() > DRIFT_TOL * scale {
                    log::trace!("residual drift, refactorizing");
                    self.refactor();
                }
            }

            let phase1 = self.primal_infeasible();
            if self.in_phase1 != Some(phase1) {
                log::debug!(
                    "phase {} after {} pivots",
                    if phase1 { 1 } else { 2 },
                    self.pivots
                );
                self.in_phase1 = Some(phase1);
            }

            let mut y: Vec<f64> = self
                .basis
                .iter()
                .map(|&j| {
                    if phase1 {
                        self.infeasibility(j)
                    } else {
                        self.cost[j]
                    }
                })
                .collect();
            self.btran(&mut y);

            let Some((q, d)) = self.price(&y, phase1, tol_d) else {
                if !self.etas.is_empty() || self.since_drift_check > 0 {
                    // confirm on fresh factors before declaring the end
                    self.refactor();
                    continue;
                }
                return if phase1 {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };

            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            let mut alpha = vec![0.0; self.m];
            self.for_each_in_col(q, |r, a| alpha[r] += a);
            self.ftran(&mut alpha);

            let theta_q = if dir > 0.0 {
                self.upper[q] - self.x[q]
            } else {
                self.x[q] - self.lower[q]
            };

            let leave = self.ratio_test(&alpha, dir, phase1, theta_q, tol_p);
            self.pivots += 1;
            if phase1 {
                self.phase1_pivots += 1;
            }
            self.since_drift_check += 1;

            let flip = match leave {
                None => true,
                Some((_, theta, _)) => theta_q <= theta,
            };
            let step = if flip {
                if !theta_q.is_finite() {
                    if phase1 {
                        // cannot happen for an exact phase-1 objective; recover
                        self.refactor();
                        continue;
                    }
                    self.unbounded_dir = Some((q, dir, alpha));
                    return LpStatus::Unbounded;
                }
                theta_q
            } else {
                leave.expect("checked").1
            };

            self.x[q] += dir * step;
            if step != 0.0 {
                for (p, &a) in alpha.iter().enumerate() {
                    if a != 0.0 {
                        let j = self.basis[p];
                        self.x[j] -= dir * a * step;
                    }
                }
            }

            if step <= DEGENERATE_STEP {
                self.degenerate_run += 1;
                if self.cfg.anti_cycling
                    && !self.bland
                    && self.degenerate_run >= self.cfg.degenerate_stall
                {
                    log::trace!("switching to Bland's rule");
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }

            if flip {
                if dir > 0.0 {
                    self.x[q] = self.upper[q];
                    self.state[q] = VarState::Upper;
                } else {
                    self.x[q] = self.lower[q];
                    self.state[q] = VarState::Lower;
                }
                log::trace!("pivot {}: bound flip of {q}", self.pivots);
                continue;
            }

            let (p, _, to_upper) = leave.expect("checked");
            let out = self.basis[p];
            if to_upper {
                self.x[out] = self.upper[out];
                self.state[out] = VarState::Upper;
            } else {
                self.x[out] = self.lower[out];
                self.state[out] = VarState::Lower;
            }
            self.pos[out] = usize::MAX;
            self.basis[p] = q;
            self.pos[q] = p;
            self.state[q] = VarState::Basic;
            log::trace!(
                "pivot {}: {q} enters, {out} leaves, step {step:e}",
                self.pivots
            );

            let pivot = alpha[p];
            let col = alpha
                .iter()
                .enumerate()
                .filter(|&(i, &a)| i != p && a != 0.0)
                .map(|(i, &a)| (i, a))
                .collect();
            self.etas.push(Eta { pos: p, pivot, col });
        }
    }

    fn finish(self, status: LpStatus) -> LpSolution {
        let n = self.n;
        let x = self.x[..n].to_vec();
        let objective_value = self.lp.objective_at(&x);
        let tol = self.cfg.feasibility_tol;
        let at = |v: f64, b: f64| b.is_finite() && (v - b).abs() <= tol * (1.0 + b.abs());
        let active_trust_bounds = self
            .lp
            .trust_vars
            .iter()
            .filter(|&&j| at(x[j], self.lower[j]) || at(x[j], self.upper[j]))
            .count();

        let ray = match (&self.unbounded_dir, status) {
            (Some((q, dir, alpha)), LpStatus::Unbounded) => {
                let mut ray = vec![0.0; n];
                if *q < n {
                    ray[*q] = *dir;
                }
                for (p, &j) in self.basis.iter().enumerate() {
                    if j < n {
                        ray[j] = -dir * alpha[p];
                    }
                }
                Some(ray)
            }
            _ => None,
        };
        let infeasible_row = (status == LpStatus::Infeasible)
            .then(|| {
                self.basis
                    .iter()
                    .filter(|&&j| j >= n)
                    .map(|&j| {
                        let v = self.x[j];
                        (j - n, (self.lower[j] - v).max(v - self.upper[j]))
                    })
                    .filter(|&(_, viol)| viol > tol)
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                    .map(|(r, _)| r)
            })
            .flatten();

        log::debug!(
            "simplex finished: {status:?}, {} pivots ({} in phase 1), bump {}",
            self.pivots,
            self.phase1_pivots,
            self.lu.bump_size()
        );
        LpSolution {
            status,
            objective_value,
            x,
            active_trust_bounds,
            pivots: self.pivots,
            phase1_pivots: self.phase1_pivots,
            ray,
            infeasible_row,
            basis: Some(Basis {
                num_vars: n,
                num_rows: self.m,
                states: self.state,
            }),
        }
    }

    /// Entering variable and its reduced cost.
    fn price(&self, y: &[f64], phase1: bool, tol: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if st == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let c = if phase1 { 0.0 } else { self.cost[j] };
            let d = c - self.dot_col(y, j);
            let eligible = match st {
                VarState::Lower => d < -tol,
                VarState::Upper => d > tol,
                VarState::Zero => d.abs() > tol,
                VarState::Basic => false,
            };
            if !eligible {
                continue;
            }
            if self.bland {
                return Some((j, d));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, d));
            }
        }
        best
    }

    /// Leaving basis position, step length and whether it leaves at its
    /// upper bound. `None` when no basic variable blocks.
    fn ratio_test(
        &self,
        alpha: &[f64],
        dir: f64,
        phase1: bool,
        theta_q: f64,
        tol: f64,
    ) -> Option<(usize, f64, bool)> {
        // (position, relaxed limit, exact limit, to_upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.basis[p];
            let rate = -dir * a;
            let (v, l, u) = (self.x[j], self.lower[j], self.upper[j]);
            let lim = if phase1 && v < l - tol {
                (rate > 0.0).then(|| ((l + tol - v) / rate, (l - v) / rate, false))
            } else if phase1 && v > u + tol {
                (rate < 0.0).then(|| ((v - u + tol) / -rate, (v - u) / -rate, true))
            } else if rate < 0.0 && l.is_finite() {
                Some(((v - l + tol) / -rate, ((v - l) / -rate).max(0.0), false))
            } else if rate > 0.0 && u.is_finite() {
                Some(((u + tol - v) / rate, ((u - v) / rate).max(0.0), true))
            } else {
                None
            };
            if let Some((relaxed, exact, to_upper)) = lim {
                cands.push((p, relaxed, exact, to_upper));
            }
        }
        if cands.is_empty() {
            return None;
        }
        if self.bland {
            let (p, _, exact, up) = cands
                .iter()
                .copied()
                .min_by(|x, y| {
                    x.2.total_cmp(&y.2)
                        .then(self.basis[x.0].cmp(&self.basis[y.0]))
                })
                .expect("nonempty");
            return Some((p, exact, up));
        }
        let theta_max = cands.iter().map(|c| c.1).fold(theta_q, f64::min);
        let mut best: Option<(usize, f64, bool)> = None;
        let mut best_abs = 0.0;
        for &(p, _, exact, up) in &cands {
            if exact > theta_max {
                continue;
            }
            let a = alpha[p].abs();
            let better = match best {
                None => true,
                Some((bp, _, _)) => {
                    a > best_abs || (a == best_abs && self.basis[p] < self.basis[bp])
                }
            };
            if better {
                best_abs = a;
                best = Some((p, exact, up));
            }
        }
        best.or_else(|| {
            // entering bound flip is the binding step; report the nearest
            // blocker so the caller can compare
            cands
                .iter()
                .min_by(|x, y| x.2.total_cmp(&y.2))
                .map(|&(p, _, e, up)| (p, e, up))
        })
    }
}
