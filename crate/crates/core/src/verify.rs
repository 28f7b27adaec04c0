//! Brute-force reference computations for tests. Everything here is written
//! from the definitions and deliberately shares no helpers with the modules
//! it checks.

use std::fmt;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lp::{LpProblem, Relation};
use crate::model::{Activation, Norm, Weights};

/// One oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle: f64,
    pub candidate: f64,
    /// `|candidate - oracle|`.
    pub abs_gap: f64,
    /// `abs_gap / |oracle|`; 0 when both are 0.
    pub rel_gap: f64,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, oracle: f64, candidate: f64) -> Self {
        let abs_gap = (candidate - oracle).abs();
        let rel_gap = if abs_gap == 0.0 {
            0.0
        } else {
            abs_gap / oracle.abs()
        };
        OracleReport {
            quantity: quantity.into(),
            oracle,
            candidate,
            abs_gap,
            rel_gap,
        }
    }

    pub fn within(&self, abs_tol: f64) -> bool {
        self.abs_gap <= abs_tol
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: oracle={:.12e} candidate={:.12e} abs_gap={:.3e} rel_gap={:.3e}",
            self.quantity, self.oracle, self.candidate, self.abs_gap, self.rel_gap
        )
    }
}

/// Append-only collection of reports.
#[derive(Debug, Clone, Default)]
pub struct OracleLog {
    entries: Vec<OracleReport>,
}

impl OracleLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, report: OracleReport) -> &OracleReport {
        log::debug!("{report}");
        self.entries.push(report);
        self.entries.last().unwrap()
    }

    pub fn entries(&self) -> &[OracleReport] {
        &self.entries
    }

    pub fn worst_abs_gap(&self) -> f64 {
        self.entries.iter().map(|r| r.abs_gap).fold(0.0, f64::max)
    }
}

fn sigma(act: Activation, x: f64) -> f64 {
    match act {
        Activation::Relu => {
            if x > 0.0 {
                x
            } else {
                0.0
            }
        }
        Activation::LeakyRelu { alpha } => {
            if x > 0.0 {
                x
            } else {
                alpha * x
            }
        }
    }
}

fn sigma_slope(act: Activation, x: f64) -> f64 {
    match act {
        Activation::Relu => (x > 0.0) as u8 as f64,
        Activation::LeakyRelu { alpha } => {
            if x > 0.0 {
                1.0
            } else {
                alpha
            }
        }
    }
}

/// Inner product of unit `u` (plus units `0..n`, minus units `n..2n`) with
/// `t`, reading a flat weight vector.
fn unit_input(flat: &[f64], d: usize, u: usize, t: &[f64]) -> f64 {
    let mut s = 0.0;
    for c in 0..d {
        s += flat[u * d + c] * t[c];
    }
    s
}

/// Loss evaluated straight from its definition.
pub fn oracle_loss(w: &Weights, act: Activation, norm: Norm, data: &Dataset) -> f64 {
    let (n, d) = (w.pairs(), w.dim());
    let flat = w.flatten();
    let mut worst: f64 = 0.0;
    let mut total = 0.0;
    for s in data.samples() {
        let mut out = 0.0;
        for j in 0..n {
            out += sigma(act, unit_input(&flat, d, j, &s.features));
            out -= sigma(act, unit_input(&flat, d, n + j, &s.features));
        }
        let r = (s.target - out).abs();
        worst = worst.max(r);
        total += r;
    }
    match norm {
        Norm::Uniform => worst,
        Norm::Manhattan => total,
    }
}

/// `g(w)` and one subgradient of it, from the definition of the convex part.
fn g_and_subgradient(
    flat: &[f64],
    n: usize,
    d: usize,
    act: Activation,
    norm: Norm,
    data: &Dataset,
) -> (f64, Vec<f64>) {
    let k = flat.len();
    // per sample: branch values and their gradients, and h_i with gradient
    let mut per: Vec<(f64, Vec<f64>, f64, Vec<f64>)> = Vec::with_capacity(data.len());
    for s in data.samples() {
        let t = &s.features;
        let mut sp = 0.0;
        let mut sm = 0.0;
        let mut dsp = vec![0.0; k];
        let mut dsm = vec![0.0; k];
        for j in 0..n {
            let zp = unit_input(flat, d, j, t);
            let zm = unit_input(flat, d, n + j, t);
            sp += sigma(act, zp);
            sm += sigma(act, zm);
            let (ap, am) = (sigma_slope(act, zp), sigma_slope(act, zm));
            for c in 0..d {
                dsp[j * d + c] += ap * t[c];
                dsm[(n + j) * d + c] += am * t[c];
            }
        }
        let first = s.target + 2.0 * sm;
        let second = 2.0 * sp - s.target;
        let (gi, dgi) = if first >= second {
            (first, dsm.iter().map(|v| 2.0 * v).collect::<Vec<_>>())
        } else {
            (second, dsp.iter().map(|v| 2.0 * v).collect())
        };
        let hi = sp + sm;
        let dhi: Vec<f64> = dsp.iter().zip(&dsm).map(|(a, b)| a + b).collect();
        per.push((gi, dgi, hi, dhi));
    }
    match norm {
        Norm::Manhattan => {
            let mut g = 0.0;
            let mut dg = vec![0.0; k];
            for (gi, dgi, _, _) in &per {
                g += gi;
                for (a, b) in dg.iter_mut().zip(dgi) {
                    *a += b;
                }
            }
            (g, dg)
        }
        Norm::Uniform => {
            let mut best = (f64::NEG_INFINITY, 0);
            for i in 0..per.len() {
                let mut v = per[i].0;
                for (k2, p) in per.iter().enumerate() {
                    if k2 != i {
                        v += p.2;
                    }
                }
                if v > best.0 {
                    best = (v, i);
                }
            }
            let i = best.1;
            let mut dg = per[i].1.clone();
            for (k2, p) in per.iter().enumerate() {
                if k2 != i {
                    for (a, b) in dg.iter_mut().zip(&p.3) {
                        *a += b;
                    }
                }
            }
            (best.0, dg)
        }
    }
}

/// Result of [`oracle_min_surrogate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateMin {
    pub value: f64,
    /// Certified lower bound on the minimum.
    pub lower_bound: f64,
    pub argmin: Vec<f64>,
}

/// Largest number of weights [`oracle_min_surrogate`] accepts.
pub const SURROGATE_MAX_DIM: usize = 4;

/// Minimises `g(w) - y . w` over `[-radius, radius]^(2nd)` for tiny
/// instances: a dense grid pass followed by the central-cut ellipsoid
/// method, which carries a lower bound and stops once the bracket is below
/// `1e-7`.
pub fn oracle_min_surrogate(
    y: &[f64],
    act: Activation,
    norm: Norm,
    data: &Dataset,
    radius: f64,
) -> Result<SurrogateMin> {
    let d = data.dim();
    let k = y.len();
    if k == 0 || !k.is_multiple_of(2 * d) {
        return Err(Error::Dimension {
            expected: 2 * d,
            got: k,
        });
    }
    if k > SURROGATE_MAX_DIM {
        return Err(Error::OracleTooLarge(format!(
            "{k} weights, at most {SURROGATE_MAX_DIM} supported"
        )));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Config(format!("bad box radius {radius}")));
    }
    let n = k / (2 * d);
    let objective = |w: &[f64]| -> (f64, Vec<f64>) {
        let (g, mut dg) = g_and_subgradient(w, n, d, act, norm, data);
        let mut v = g;
        for c in 0..k {
            v -= y[c] * w[c];
            dg[c] -= y[c];
        }
        (v, dg)
    };

    // grid pass
    let per_dim: usize = if k <= 2 { 201 } else { 25 };
    let step = 2.0 * radius / (per_dim - 1) as f64;
    let mut best_x = vec![0.0; k];
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; k];
    let mut x = vec![0.0; k];
    loop {
        for c in 0..k {
            x[c] = -radius + step * idx[c] as f64;
        }
        let v = objective(&x).0;
        if v < best {
            best = v;
            best_x.copy_from_slice(&x);
        }
        let mut c = 0;
        while c < k {
            idx[c] += 1;
            if idx[c] < per_dim {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
        if c == k {
            break;
        }
    }

    // ellipsoid {x : (x - c)^T P^{-1} (x - c) <= 1} starting at the ball
    // around the box
    let kf = k as f64;
    let mut center = vec![0.0f64; k];
    let mut p = vec![0.0; k * k];
    for c in 0..k {
        p[c * k + c] = radius * radius * kf;
    }
    let mut lower = f64::NEG_INFINITY;
    for _ in 0..100_000 {
        let outside = (0..k)
            .map(|c| (c, center[c].abs() - radius))
            .filter(|&(_, v)| v > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let e: Vec<f64> = match outside {
            Some((c, _)) => {
                let mut e = vec![0.0; k];
                e[c] = center[c].signum();
                e
            }
            None => {
                let (v, g) = objective(&center);
                if v < best {
                    best = v;
                    best_x.copy_from_slice(&center);
                }
                let pg = mat_vec(&p, &g, k);
                let norm_p = dotv(&g, &pg).max(0.0).sqrt();
                lower = lower.max(v - norm_p);
                if norm_p == 0.0 {
                    lower = best;
                }
                g
            }
        };
        if best - lower <= 1e-7 {
            break;
        }
        let pe = mat_vec(&p, &e, k);
        let ee = dotv(&e, &pe);
        if !(ee > 1e-300) {
            break;
        }
        let b: Vec<f64> = pe.iter().map(|v| v / ee.sqrt()).collect();
        for c in 0..k {
            center[c] -= b[c] / (kf + 1.0);
        }
        let scale = kf * kf / (kf * kf - 1.0);
        let shrink = 2.0 / (kf + 1.0);
        for r in 0..k {
            for c in 0..k {
                p[r * k + c] = scale * (p[r * k + c] - shrink * b[r] * b[c]);
            }
        }
        for r in 0..k {
            for c in 0..r {
                let v = 0.5 * (p[r * k + c] + p[c * k + r]);
                p[r * k + c] = v;
                p[c * k + r] = v;
            }
        }
    }
    if best - lower > 1e-6 {
        log::warn!("surrogate oracle bracket stayed at {:.3e}", best - lower);
    }
    Ok(SurrogateMin {
        value: best,
        lower_bound: lower.min(best),
        argmin: best_x,
    })
}

fn mat_vec(p: &[f64], v: &[f64], k: usize) -> Vec<f64> {
    (0..k)
        .map(|r| (0..k).map(|c| p[r * k + c] * v[c]).sum())
        .collect()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Size caps for [`oracle_vertex_lp`].
pub const VERTEX_MAX_VARS: usize = 8;
pub const VERTEX_MAX_CONSTRAINTS: usize = 20;

/// Optimum of a bounded LP by enumerating every basic solution: each choice
/// of `num_vars` constraints (rows or finite bounds, all equalities
/// included) is solved as a square system and kept when feasible.
///
/// Returns `None` when no vertex is feasible. The LP must be bounded with a
/// vertex, which holds whenever every variable has finite bounds.
pub fn oracle_vertex_lp(lp: &LpProblem) -> Result<Option<f64>> {
    let nv = lp.num_vars;
    // inequalities a.x <= b, and equalities a.x = b
    let mut ineq: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut eq: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        let mut a = vec![0.0; nv];
        for &(j, v) in &row.coeffs {
            a[j] += v;
        }
        match row.relation {
            Relation::Le => ineq.push((a, row.rhs)),
            Relation::Ge => ineq.push((a.iter().map(|v| -v).collect(), -row.rhs)),
            Relation::Eq => eq.push((a, row.rhs)),
        }
    }
    for j in 0..nv {
        let mut e = vec![0.0; nv];
        e[j] = 1.0;
        if lp.upper[j].is_finite() {
            ineq.push((e.clone(), lp.upper[j]));
        }
        if lp.lower[j].is_finite() {
            ineq.push((e.iter().map(|v| -v).collect(), -lp.lower[j]));
        }
    }
    if nv > VERTEX_MAX_VARS || ineq.len() + eq.len() > VERTEX_MAX_CONSTRAINTS {
        return Err(Error::OracleTooLarge(format!(
            "{nv} variables and {} constraints",
            ineq.len() + eq.len()
        )));
    }
    if eq.len() > nv {
        // overdetermined equalities: fall back to treating them as pairs
        for (a, b) in eq.drain(..) {
            ineq.push((a.iter().map(|v| -v).collect(), -b));
            ineq.push((a, b));
        }
    }
    let pick = nv - eq.len();
    let feasible = |x: &[f64]| {
        let tol = 1e-9;
        ineq.iter()
            .all(|(a, b)| dotv(a, x) <= b + tol * (1.0 + b.abs()))
            && eq
                .iter()
                .all(|(a, b)| (dotv(a, x) - b).abs() <= tol * (1.0 + b.abs()))
    };
    let mut best: Option<f64> = None;
    let mut chosen: Vec<usize> = (0..pick).collect();
    if pick > ineq.len() {
        return Ok(None);
    }
    loop {
        let mut m = Vec::with_capacity(nv * nv);
        let mut rhs = Vec::with_capacity(nv);
        for (a, b) in eq.iter().chain(chosen.iter().map(|&i| &ineq[i])) {
            m.extend_from_slice(a);
            rhs.push(*b);
        }
        if let Some(x) = gauss_solve(&mut m, &mut rhs, nv) {
            if feasible(&x) {
                let v = dotv(&lp.objective, &x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // next combination in lexicographic order
        let mut i = pick;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            if chosen[i] < ineq.len() - pick + i {
                chosen[i] += 1;
                for t in i + 1..pick {
                    chosen[t] = chosen[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Gaussian elimination with partial pivoting on a row-major `n x n` system;
/// `None` when singular.
fn gauss_solve(m: &mut [f64], rhs: &mut [f64], n: usize) -> Option<Vec<f64>> {
    if n == 0 {
        return Some(Vec::new());
    }
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv =
            (col..n).max_by(|&a, &b| m[a * n + col].abs().total_cmp(&m[b * n + col].abs()))?;
        if m[piv * n + col].abs() <= 1e-11 * scale {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap(piv * n + c, col * n + c);
            }
            rhs.swap(piv, col);
        }
        for r in col + 1..n {
            let f = m[r * n + col] / m[col * n + col];
            if f != 0.0 {
                for c in col..n {
                    m[r * n + c] -= f * m[col * n + c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for c in r + 1..n {
            s -= m[r * n + c] * x[c];
        }
        x[r] = s / m[r * n + r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Sample;

    fn point(t: Vec<f64>, f: f64) -> Sample {
        Sample {
            features: t,
            target: f,
        }
    }

    #[test]
    fn loss_examples() {
        let data = Dataset::new(
            "t",
            vec![point(vec![1.0, 2.0], 0.5), point(vec![-1.0, 0.0], -3.0)],
        )
        .unwrap();
        let z = Weights::zeros(1, 2);
        assert_eq!(oracle_loss(&z, Activation::Relu, Norm::Uniform, &data), 3.0);
        assert_eq!(
            oracle_loss(&z, Activation::Relu, Norm::Manhattan, &data),
            3.5
        );
        let w = Weights::from_rows(vec![vec![2.0]], vec![vec![0.0]]).unwrap();
        let one = Dataset::new("o", vec![point(vec![1.0], 2.0)]).unwrap();
        assert_eq!(oracle_loss(&w, Activation::Relu, Norm::Uniform, &one), 0.0);
    }

    #[test]
    fn report_gaps() {
        let r = OracleReport::new("x", 2.0, 2.5);
        assert_eq!(r.abs_gap, 0.5);
        assert_eq!(r.rel_gap, 0.25);
        assert!(r.within(0.5) && !r.within(0.4));
        assert_eq!(OracleReport::new("z", 0.0, 0.0).rel_gap, 0.0);
        let mut log = OracleLog::new();
        log.record(r);
        log.record(OracleReport::new("y", 1.0, 1.0));
        assert_eq!(log.entries().len(), 2);
        assert_eq!(log.worst_abs_gap(), 0.5);
        assert!(log.entries()[0].to_string().starts_with("x: oracle="));
    }

    #[test]
    fn surrogate_examples() {
        // y = 0 and a zero target: g >= 0 with g(0) = 0
        let data = Dataset::new("z", vec![point(vec![1.0], 0.0)]).unwrap();
        let m =
            oracle_min_surrogate(&[0.0, 0.0], Activation::Relu, Norm::Uniform, &data, 5.0).unwrap();
        assert!(m.value.abs() < 1e-7, "{m:?}");

        // linearised at the exact fit a = 2, b = 0 of T = 1, f = 2: y = (1, 0)
        let data = Dataset::new("o", vec![point(vec![1.0], 2.0)]).unwrap();
        let m = oracle_min_surrogate(&[1.0, 0.0], Activation::Relu, Norm::Uniform, &data, 10.0)
            .unwrap();
        assert!(m.value.abs() < 1e-7 && m.lower_bound <= m.value);

        let big = Dataset::new("b", vec![point(vec![1.0, 1.0, 1.0], 0.0)]).unwrap();
        assert!(matches!(
            oracle_min_surrogate(&[0.0; 6], Activation::Relu, Norm::Uniform, &big, 1.0),
            Err(Error::OracleTooLarge(_))
        ));
    }

    #[test]
    fn vertex_examples() {
        let mut lp = LpProblem::new();
        lp.add_var("x", 1.0, 3.0, 10.0);
        assert_eq!(oracle_vertex_lp(&lp).unwrap(), Some(3.0));

        let mut lp = LpProblem::new();
        let x = lp.add_var("x", -1.0, 0.0, 10.0);
        let y = lp.add_var("y", -2.0, 0.0, 10.0);
        lp.add_row("a", vec![(x, 1.0), (y, 1.0)], Relation::Le, 4.0);
        let plain = oracle_vertex_lp(&lp).unwrap();
        assert_eq!(plain, Some(-8.0));
        lp.add_row("a2", vec![(x, 1.0), (y, 1.0)], Relation::Le, 4.0);
        lp.add_row("a3", vec![(x, 2.0), (y, 2.0)], Relation::Le, 8.0);
        assert_eq!(oracle_vertex_lp(&lp).unwrap(), plain);
        lp.add_row("eq", vec![(x, 1.0)], Relation::Eq, 1.0);
        assert_eq!(oracle_vertex_lp(&lp).unwrap(), Some(-7.0));
        lp.add_row("no", vec![(x, 1.0)], Relation::Ge, 2.0);
        assert_eq!(oracle_vertex_lp(&lp).unwrap(), None);
    }
}
