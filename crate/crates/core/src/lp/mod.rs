//! Linear programs in explicit row form, a bounded-variable simplex solver
//! and the builder for the DCA subproblem.

mod build;
mod lu;
mod simplex;

use std::fmt::Write as _;

pub use build::{build_step2_lp, extract_weights, Step2Layout, Step2Lp};
pub use simplex::{solve, solve_warm, Basis, SolverConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

/// One constraint `sum_k coeffs[k].1 * x[coeffs[k].0]  (rel)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LpRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let v = self.activity(x);
        match self.relation {
            Relation::Le => (v - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - v).max(0.0),
            Relation::Eq => (v - self.rhs).abs(),
        }
    }
}

/// `minimize c^T x` subject to rows and `lower <= x <= upper`. Infinite bounds
/// are allowed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub var_names: Vec<String>,
    /// Variables whose bounds are an artificial trust box; the solver reports
    /// how many of them end at a bound.
    pub trust_vars: Vec<usize>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_names.push(name.into());
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.rows.push(LpRow {
            name: name.into(),
            coeffs,
            relation,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars;
        if self.objective.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Config("LP vectors disagree with num_vars".into()));
        }
        if !self.var_names.is_empty() && self.var_names.len() != n {
            return Err(Error::Config("LP var_names disagree with num_vars".into()));
        }
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::Config(format!("variable {j} has bounds [{l}, {u}]")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("objective must be finite".into()));
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(Error::Config(format!(
                    "row {} has non-finite rhs",
                    row.name
                )));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(Error::Dimension {
                        expected: n,
                        got: j,
                    });
                }
                if !a.is_finite() {
                    return Err(Error::Config(format!(
                        "row {} has a non-finite coefficient",
                        row.name
                    )));
                }
            }
        }
        if self.trust_vars.iter().any(|&j| j >= n) {
            return Err(Error::Config("trust variable index out of range".into()));
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    fn var_name(&self, j: usize) -> String {
        match self.var_names.get(j) {
            Some(s) if !s.is_empty() => s.clone(),
            _ => format!("x{j}"),
        }
    }

    /// Renders the problem in CPLEX LP text format, one constraint per line.
    pub fn to_lp_format(&self) -> String {
        fn term(out: &mut String, first: &mut bool, a: f64, name: &str) {
            if *first {
                write!(out, " {a:?} {name}").unwrap();
            } else if a < 0.0 {
                write!(out, " - {:?} {name}", -a).unwrap();
            } else {
                write!(out, " + {a:?} {name}").unwrap();
            }
            *first = false;
        }
        let mut out = String::from("\\ DCA step-2 subproblem\nMinimize\n obj:");
        let mut first = true;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                term(&mut out, &mut first, c, &self.var_name(j));
            }
        }
        if first {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for (r, row) in self.rows.iter().enumerate() {
            let name = if row.name.is_empty() {
                format!("c{r}")
            } else {
                row.name.clone()
            };
            write!(out, " {name}:").unwrap();
            let mut first = true;
            for &(j, a) in &row.coeffs {
                term(&mut out, &mut first, a, &self.var_name(j));
            }
            if first {
                out.push_str(" 0");
            }
            writeln!(out, " {} {:?}", row.relation.symbol(), row.rhs).unwrap();
        }
        out.push_str("Bounds\n");
        for j in 0..self.num_vars {
            let (l, u) = (self.lower[j], self.upper[j]);
            let name = self.var_name(j);
            match (l.is_finite(), u.is_finite()) {
                (false, false) => writeln!(out, " {name} free").unwrap(),
                (true, true) => writeln!(out, " {l:?} <= {name} <= {u:?}").unwrap(),
                (true, false) => writeln!(out, " {name} >= {l:?}").unwrap(),
                (false, true) => writeln!(out, " -inf <= {name} <= {u:?}").unwrap(),
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
    IterLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    /// Primal point (the last iterate when not optimal).
    pub x: Vec<f64>,
    /// Trust-box variables sitting at one of their bounds.
    pub active_trust_bounds: usize,
    pub pivots: usize,
    pub phase1_pivots: usize,
    /// Direction of unboundedness when `status == Unbounded`.
    pub ray: Option<Vec<f64>>,
    /// A row that could not be satisfied when `status == Infeasible`.
    pub infeasible_row: Option<usize>,
    /// Final basis, reusable as a warm start for a problem with the same rows
    /// and bounds.
    pub basis: Option<Basis>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
