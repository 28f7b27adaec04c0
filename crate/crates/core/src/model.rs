//! Pair-form single-hidden-layer network, its activations and losses.
//!
//! The network output is `sum_j s(a_j . t) - sum_j s(b_j . t)` with `n`
//! "plus" units `a_j` and `n` "minus" units `b_j`. Output coefficients are
//! absorbed into the weights by positive homogeneity of the activation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    /// `max(alpha * x, x)`.
    LeakyRelu {
        alpha: f64,
    },
}

impl Activation {
    pub fn leaky(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!(
                "leaky slope must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(Activation::LeakyRelu { alpha })
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu { alpha } => (alpha * x).max(x),
        }
    }

    /// Slope used on the branch selected by the strict rule `x > 0`.
    #[inline]
    pub fn slope(self, x: f64) -> f64 {
        match self {
            _ if x > 0.0 => 1.0,
            Activation::Relu => 0.0,
            Activation::LeakyRelu { alpha } => alpha,
        }
    }

    /// Slope on the non-positive side (0 for ReLU).
    pub fn negative_slope(self) -> f64 {
        match self {
            Activation::Relu => 0.0,
            Activation::LeakyRelu { alpha } => alpha,
        }
    }

    pub fn label(self) -> String {
        match self {
            Activation::Relu => "relu".to_string(),
            Activation::LeakyRelu { alpha } => format!("leaky:{alpha}"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// Accepts `relu`, `leaky` (slope 0.01) and `leaky:<alpha>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "relu" => Ok(Activation::Relu),
            "leaky" | "leakyrelu" | "leaky_relu" => Activation::leaky(DEFAULT_LEAKY_ALPHA),
            _ => {
                let alpha = s
                    .strip_prefix("leaky:")
                    .ok_or_else(|| Error::Config(format!("unknown activation {s:?}")))?;
                let alpha: f64 = alpha
                    .parse()
                    .map_err(|_| Error::Config(format!("bad leaky slope {alpha:?}")))?;
                Activation::leaky(alpha)
            }
        }
    }
}

#[inline]
pub fn activate(act: Activation, x: f64) -> f64 {
    act.apply(x)
}

/// Loss aggregation over samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    /// Maximum absolute residual (Chebyshev).
    Uniform,
    /// Sum of absolute residuals (L1).
    Manhattan,
}

impl Norm {
    pub fn label(self) -> &'static str {
        match self {
            Norm::Uniform => "uniform",
            Norm::Manhattan => "l1",
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" | "chebyshev" | "max" => Ok(Norm::Uniform),
            "l1" | "manhattan" => Ok(Norm::Manhattan),
            other => Err(Error::Config(format!("unknown loss {other:?}"))),
        }
    }
}

/// Hidden-layer weights: `n` plus rows `a_j` and `n` minus rows `b_j`, each of
/// length `d`, stored row-major.
///
/// The flattened decision vector is `a_1, ..., a_n, b_1, ..., b_n`; the
/// subgradient produced by [`crate::dc`] uses the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    n: usize,
    d: usize,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl Weights {
    pub fn zeros(n: usize, d: usize) -> Self {
        Weights {
            n,
            d,
            plus: vec![0.0; n * d],
            minus: vec![0.0; n * d],
        }
    }

    pub fn from_rows(plus: Vec<Vec<f64>>, minus: Vec<Vec<f64>>) -> Result<Self> {
        let n = plus.len();
        if n == 0 || minus.len() != n {
            return Err(Error::Config(format!(
                "need the same positive number of plus and minus units, got {} and {}",
                plus.len(),
                minus.len()
            )));
        }
        let d = plus[0].len();
        let mut flat = Vec::with_capacity(2 * n * d);
        for row in plus.iter().chain(minus.iter()) {
            if row.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Weights::from_flat(n, d, &flat)
    }

    /// Inverse of [`Weights::flatten`].
    pub fn from_flat(n: usize, d: usize, w: &[f64]) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Config("weights need n >= 1 and d >= 1".into()));
        }
        if w.len() != 2 * n * d {
            return Err(Error::Dimension {
                expected: 2 * n * d,
                got: w.len(),
            });
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("weights must be finite".into()));
        }
        Ok(Weights {
            n,
            d,
            plus: w[..n * d].to_vec(),
            minus: w[n * d..].to_vec(),
        })
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.len());
        w.extend_from_slice(&self.plus);
        w.extend_from_slice(&self.minus);
        w
    }

    /// Number of pairs.
    pub fn pairs(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Length of the flattened vector, `2 n d`.
    pub fn len(&self) -> usize {
        2 * self.n * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plus_row(&self, j: usize) -> &[f64] {
        &self.plus[j * self.d..(j + 1) * self.d]
    }

    pub fn minus_row(&self, j: usize) -> &[f64] {
        &self.minus[j * self.d..(j + 1) * self.d]
    }

    /// Entries independently uniform on `[-scale, scale]` from a ChaCha8
    /// stream seeded by `seed`.
    pub fn random_uniform(n: usize, d: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Weights::zeros(n, d);
        if scale > 0.0 {
            for v in w.plus.iter_mut().chain(w.minus.iter_mut()) {
                *v = rng.gen_range(-scale..=scale);
            }
        }
        w
    }

    pub fn scaled(&self, factor: f64) -> Weights {
        Weights {
            n: self.n,
            d: self.d,
            plus: self.plus.iter().map(|v| v * factor).collect(),
            minus: self.minus.iter().map(|v| v * factor).collect(),
        }
    }

    /// Pre-activations `(a_j . t, b_j . t)` for every unit.
    pub(crate) fn pre_activations(&self, t: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let plus = (0..self.n).map(|j| dot(self.plus_row(j), t)).collect();
        let minus = (0..self.n).map(|j| dot(self.minus_row(j), t)).collect();
        (plus, minus)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: d,
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Network output at `t`.
pub fn forward(w: &Weights, act: Activation, t: &[f64]) -> Result<f64> {
    w.check_dim(t.len())?;
    Ok(forward_unchecked(w, act, t))
}

pub(crate) fn forward_unchecked(w: &Weights, act: Activation, t: &[f64]) -> f64 {
    let mut out = 0.0;
    for j in 0..w.n {
        out += act.apply(dot(w.plus_row(j), t));
    }
    for j in 0..w.n {
        out -= act.apply(dot(w.minus_row(j), t));
    }
    out
}

/// Residuals `f(T_i) - forward(T_i)` in sample order.
pub fn residuals(w: &Weights, act: Activation, data: &Dataset) -> Result<Vec<f64>> {
    w.check_dim(data.dim())?;
    Ok(data
        .samples()
        .iter()
        .map(|s| s.target - forward_unchecked(w, act, &s.features))
        .collect())
}

/// Uniform: `max_i |r_i|`; Manhattan: `sum_i |r_i|`, reduced in index order.
pub fn loss(w: &Weights, act: Activation, norm: Norm, data: &Dataset) -> Result<f64> {
    let r = residuals(w, act, data)?;
    Ok(match norm {
        Norm::Uniform => r.iter().fold(0.0, |m, v| m.max(v.abs())),
        Norm::Manhattan => r.iter().map(|v| v.abs()).sum(),
    })
}

/// Writes weights as text: a header `n d activation alpha` followed by the
/// `2n` rows (plus rows first), space separated, at full precision.
pub fn format_weights(w: &Weights, act: Activation) -> String {
    let (kind, alpha) = match act {
        Activation::Relu => ("relu", 0.0),
        Activation::LeakyRelu { alpha } => ("leaky", alpha),
    };
    let mut out = format!("{} {} {} {:?}\n", w.n, w.d, kind, alpha);
    let rows = (0..w.n)
        .map(|j| w.plus_row(j))
        .chain((0..w.n).map(|j| w.minus_row(j)));
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v:?}").expect("write to String");
        }
        out.push('\n');
    }
    out
}

pub fn parse_weights(text: &str) -> Result<(Weights, Activation)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty weights file"))?;
    let hline = hline + 1;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::parse(hline, "header must be `n d activation alpha`"));
    }
    let n: usize = fields[0]
        .parse()
        .map_err(|_| Error::parse(hline, "bad pair count"))?;
    let d: usize = fields[1]
        .parse()
        .map_err(|_| Error::parse(hline, "bad dimension"))?;
    let alpha: f64 = fields[3]
        .parse()
        .map_err(|_| Error::parse(hline, "bad alpha"))?;
    let act = match fields[2] {
        "relu" => Activation::Relu,
        "leaky" => Activation::leaky(alpha)?,
        other => return Err(Error::parse(hline, format!("unknown activation {other:?}"))),
    };
    let mut flat = Vec::with_capacity(2 * n * d);
    let mut rows = 0;
    for (idx, line) in lines {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(idx + 1, format!("bad value {f:?}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != d {
            return Err(Error::parse(
                idx + 1,
                format!("expected {d} values, found {}", row.len()),
            ));
        }
        flat.extend(row);
        rows += 1;
    }
    if rows != 2 * n {
        return Err(Error::parse(
            hline,
            format!("expected {} weight rows, found {rows}", 2 * n),
        ));
    }
    Ok((Weights::from_flat(n, d, &flat)?, act))
}

pub fn write_weights(path: &Path, w: &Weights, act: Activation) -> Result<()> {
    fs::write(path, format_weights(w, act)).map_err(|e| Error::io(path, e))
}

pub fn read_weights(path: &Path) -> Result<(Weights, Activation)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_weights(&text)
}
