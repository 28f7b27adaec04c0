//! The DCA driver: linearise `h` at the current weights, minimise the convex
//! surrogate exactly by linear programming, repeat until the objective stops
//! decreasing.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::dataset::Dataset;
use crate::dc::{eval_dc, subgrad_h};
use crate::error::{Error, Result};
use crate::lp::{extract_weights, solve_warm, Basis, LpSolution, LpStatus, SolverConfig, Step2Lp};
use crate::model::{Activation, Norm, Weights};

#[derive(Debug, Clone, PartialEq)]
pub struct DcaConfig {
    pub max_iters: usize,
    pub eps_objective: f64,
    /// Stop on `p_k - p_{k+1} <= eps * max(1, |p_k|)` instead of the
    /// absolute test.
    pub relative_stop: bool,
    pub time_budget_secs: f64,
    pub trust_radius: f64,
    pub seed: u64,
    pub init_scale: f64,
    pub solver: SolverConfig,
}

impl Default for DcaConfig {
    fn default() -> Self {
        DcaConfig {
            max_iters: 200,
            eps_objective: 1e-6,
            relative_stop: false,
            time_budget_secs: 1800.0,
            trust_radius: 1e3,
            seed: 0,
            init_scale: 0.5,
            solver: SolverConfig::default(),
        }
    }
}

impl DcaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_objective >= 0.0) {
            return Err(Error::Config(format!(
                "eps must be >= 0, got {}",
                self.eps_objective
            )));
        }
        if !(self.time_budget_secs > 0.0) {
            return Err(Error::Config(format!(
                "time budget must be positive, got {}",
                self.time_budget_secs
            )));
        }
        if !(self.trust_radius > 0.0) || !self.trust_radius.is_finite() {
            return Err(Error::Config(format!(
                "trust radius must be positive and finite, got {}",
                self.trust_radius
            )));
        }
        if !(self.init_scale >= 0.0) || !self.init_scale.is_finite() {
            return Err(Error::Config(format!("bad init scale {}", self.init_scale)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcaStatus {
    Converged,
    IterLimit,
    TimeBudget,
    LpFailure,
}

impl DcaStatus {
    pub fn label(self) -> &'static str {
        match self {
            DcaStatus::Converged => "converged",
            DcaStatus::IterLimit => "iter_limit",
            DcaStatus::TimeBudget => "time_budget",
            DcaStatus::LpFailure => "lp_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcaRecord {
    pub iter: usize,
    /// Objective at the iterate produced in this iteration.
    pub p: f64,
    /// Optimal surrogate value `g(w_{k+1}) - y_k . w_{k+1}`; NaN for the
    /// initial point.
    pub lp_value: f64,
    pub lp_status: Option<LpStatus>,
    pub wall_ms: f64,
    pub active_trust_bounds: usize,
}

#[derive(Debug, Clone)]
pub struct DcaTrace {
    pub records: Vec<DcaRecord>,
    pub status: DcaStatus,
    pub best_weights: Weights,
    pub best_p: f64,
    pub final_weights: Weights,
}

impl DcaTrace {
    pub fn p_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.p).collect()
    }

    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,p,lp_value,lp_status,wall_ms,active_trust_bounds\n");
        for r in &self.records {
            let status = match r.lp_status {
                None => "-",
                Some(LpStatus::Optimal) => "optimal",
                Some(LpStatus::Unbounded) => "unbounded",
                Some(LpStatus::Infeasible) => "infeasible",
                Some(LpStatus::IterLimit) => "iter_limit",
            };
            writeln!(
                out,
                "{},{:?},{:?},{},{:.3},{}",
                r.iter, r.p, r.lp_value, status, r.wall_ms, r.active_trust_bounds
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Entries uniform on `[-init_scale, init_scale]`, seeded by `cfg.seed`.
pub fn init_weights(n: usize, d: usize, cfg: &DcaConfig) -> Weights {
    Weights::random_uniform(n, d, cfg.init_scale, cfg.seed)
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Runs DCA from [`init_weights`].
pub fn run_dca(
    data: &Dataset,
    n: usize,
    act: Activation,
    norm: Norm,
    cfg: &DcaConfig,
) -> Result<DcaTrace> {
    let w0 = init_weights(n, data.dim(), cfg);
    run_dca_from(data, w0, act, norm, cfg)
}

/// Runs DCA from the given starting weights.
pub fn run_dca_from(
    data: &Dataset,
    w0: Weights,
    act: Activation,
    norm: Norm,
    cfg: &DcaConfig,
) -> Result<DcaTrace> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if w0.pairs() == 0 {
        return Err(Error::Config("need at least one pair".into()));
    }
    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(cfg.time_budget_secs);

    let mut w = w0;
    let mut p = eval_dc(&w, act, norm, data)?.p;
    let mut records = vec![DcaRecord {
        iter: 0,
        p,
        lp_value: f64::NAN,
        lp_status: None,
        wall_ms: ms(start.elapsed()),
        active_trust_bounds: 0,
    }];
    let mut best = (w.clone(), p);

    let mut lp = Step2Lp::new(act, norm, data, w.pairs(), cfg.trust_radius)?;
    log::debug!(
        "step-2 LP: {} variables, {} rows",
        lp.problem.num_vars,
        lp.problem.rows.len()
    );
    let mut basis: Option<Basis> = None;
    let mut status = DcaStatus::IterLimit;

    for k in 1..=cfg.max_iters {
        if Instant::now() >= deadline {
            status = DcaStatus::TimeBudget;
            break;
        }
        let y = subgrad_h(&w, act, norm, data)?;
        lp.set_subgradient(&y)?;
        let mut scfg = cfg.solver.clone();
        scfg.deadline = Some(match scfg.deadline {
            Some(d) => d.min(deadline),
            None => deadline,
        });
        let mut sol = solve_warm(&lp.problem, &scfg, basis.as_ref())?;
        if sol.status == LpStatus::IterLimit && Instant::now() < deadline {
            log::warn!("iteration {k}: LP hit the pivot limit, retrying with twice the limit");
            scfg.max_pivots = scfg.max_pivots.saturating_mul(2);
            sol = solve_warm(&lp.problem, &scfg, sol.basis.as_ref().or(basis.as_ref()))?;
        }
        if sol.status != LpStatus::Optimal {
            records.push(failed_record(k, p, &sol, start));
            status = if Instant::now() >= deadline {
                DcaStatus::TimeBudget
            } else {
                log::error!(
                    "iteration {k}: LP ended {:?} (infeasible row {:?}, {} pivots)",
                    sol.status,
                    sol.infeasible_row,
                    sol.pivots
                );
                DcaStatus::LpFailure
            };
            break;
        }
        let w_next = extract_weights(&sol, w.pairs(), w.dim())?;
        let p_next = eval_dc(&w_next, act, norm, data)?.p;
        records.push(DcaRecord {
            iter: k,
            p: p_next,
            lp_value: sol.objective_value,
            lp_status: Some(sol.status),
            wall_ms: ms(start.elapsed()),
            active_trust_bounds: sol.active_trust_bounds,
        });
        log::debug!(
            "iteration {k}: p = {p_next:.9}, {} pivots, {} trust bounds active",
            sol.pivots,
            sol.active_trust_bounds
        );
        if p_next < best.1 {
            best = (w_next.clone(), p_next);
        }
        let decrease = p - p_next;
        let tol = if cfg.relative_stop {
            cfg.eps_objective * p.abs().max(1.0)
        } else {
            cfg.eps_objective
        };
        w = w_next;
        p = p_next;
        basis = sol.basis;
        if decrease <= tol {
            status = DcaStatus::Converged;
            break;
        }
    }

    log::info!(
        "DCA {}: best p = {:.9} after {} iterations, {:.0} ms",
        status.label(),
        best.1,
        records.len() - 1,
        ms(start.elapsed())
    );
    Ok(DcaTrace {
        records,
        status,
        best_weights: best.0,
        best_p: best.1,
        final_weights: w,
    })
}

fn failed_record(k: usize, p: f64, sol: &LpSolution, start: Instant) -> DcaRecord {
    DcaRecord {
        iter: k,
        p,
        lp_value: f64::NAN,
        lp_status: Some(sol.status),
        wall_ms: ms(start.elapsed()),
        active_trust_bounds: sol.active_trust_bounds,
    }
}
