//! DC decomposition of the training loss, `p = g - h`, and a subgradient of
//! `h` (the linearisation step of DCA).
//!
//! Per sample `i`, with `s` the activation:
//!
//! ```text
//! h_i = sum_j s(a_j . T_i) + sum_j s(b_j . T_i)
//! g_i = max{ f_i + 2 sum_j s(b_j . T_i),  2 sum_j s(a_j . T_i) - f_i }
//! ```
//!
//! so that `g_i - h_i = |f_i - forward(T_i)|`. For the uniform loss
//! `g = max_i (g_i + sum_{k != i} h_k)` and `h = sum_k h_k`; for the L1 loss
//! `g = sum_i g_i` and `h = sum_i h_i`. Both share the same `h`.

use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::model::{dot, Activation, Norm, Weights};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcValue {
    pub g: f64,
    pub h: f64,
    pub p: f64,
}

/// Element of the subdifferential of `h`, laid out like [`Weights::flatten`].
#[derive(Debug, Clone, PartialEq)]
pub struct Subgradient {
    pub y: Vec<f64>,
}

impl Subgradient {
    pub fn as_slice(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `y . w` for a flattened weight vector.
    pub fn dot(&self, w: &[f64]) -> f64 {
        dot(&self.y, w)
    }
}

/// Activated sums `(sum_j s(a_j . t), sum_j s(b_j . t))`.
fn unit_sums(w: &Weights, act: Activation, s: &Sample) -> (f64, f64) {
    let (plus, minus) = w.pre_activations(&s.features);
    let sp = plus.iter().map(|&x| act.apply(x)).sum();
    let sm = minus.iter().map(|&x| act.apply(x)).sum();
    (sp, sm)
}

fn sample_checked<'a>(w: &Weights, data: &'a Dataset, i: usize) -> Result<&'a Sample> {
    if data.dim() != w.dim() {
        return Err(Error::Dimension {
            expected: w.dim(),
            got: data.dim(),
        });
    }
    data.sample(i)
}

fn gi_hi(w: &Weights, act: Activation, s: &Sample) -> (f64, f64) {
    let (sp, sm) = unit_sums(w, act, s);
    let g = (s.target + 2.0 * sm).max(2.0 * sp - s.target);
    (g, sp + sm)
}

pub fn eval_hi(w: &Weights, act: Activation, i: usize, data: &Dataset) -> Result<f64> {
    let s = sample_checked(w, data, i)?;
    let (sp, sm) = unit_sums(w, act, s);
    Ok(sp + sm)
}

pub fn eval_gi(w: &Weights, act: Activation, i: usize, data: &Dataset) -> Result<f64> {
    let s = sample_checked(w, data, i)?;
    Ok(gi_hi(w, act, s).0)
}

/// Evaluates `g`, `h` and `p = g - h` for the chosen loss.
pub fn eval_dc(w: &Weights, act: Activation, norm: Norm, data: &Dataset) -> Result<DcValue> {
    if data.dim() != w.dim() {
        return Err(Error::Dimension {
            expected: w.dim(),
            got: data.dim(),
        });
    }
    let terms: Vec<(f64, f64)> = data.samples().iter().map(|s| gi_hi(w, act, s)).collect();
    let h: f64 = terms.iter().map(|t| t.1).sum();
    let g = match norm {
        Norm::Manhattan => terms.iter().map(|t| t.0).sum(),
        Norm::Uniform => {
            // sum_{k != i} h_k from prefix and suffix sums, no cancellation
            let n = terms.len();
            let mut suffix = vec![0.0; n + 1];
            for k in (0..n).rev() {
                suffix[k] = suffix[k + 1] + terms[k].1;
            }
            let mut prefix = 0.0;
            let mut g = f64::NEG_INFINITY;
            for (i, &(gi, hi)) in terms.iter().enumerate() {
                g = g.max(gi + prefix + suffix[i + 1]);
                prefix += hi;
            }
            g
        }
    };
    Ok(DcValue { g, h, p: g - h })
}

/// `h(w) = sum_i h_i(w)`; identical for both losses.
pub fn eval_h(w: &Weights, act: Activation, data: &Dataset) -> Result<f64> {
    if data.dim() != w.dim() {
        return Err(Error::Dimension {
            expected: w.dim(),
            got: data.dim(),
        });
    }
    Ok(data
        .samples()
        .iter()
        .map(|s| {
            let (sp, sm) = unit_sums(w, act, s);
            sp + sm
        })
        .sum())
}

/// A subgradient of `h` at `w`.
///
/// Block `j` of the plus half is `sum_i s'(a_j . T_i) T_i` where the slope
/// is 1 on `a_j . T_i > 0` and 0 (ReLU) or `alpha` (leaky) otherwise; the
/// minus half is the same with `b_j`. The loss only matters through `h`,
/// which is shared by both norms.
pub fn subgrad_h(w: &Weights, act: Activation, _norm: Norm, data: &Dataset) -> Result<Subgradient> {
    if data.dim() != w.dim() {
        return Err(Error::Dimension {
            expected: w.dim(),
            got: data.dim(),
        });
    }
    let (n, d) = (w.pairs(), w.dim());
    let mut y = vec![0.0; 2 * n * d];
    for s in data.samples() {
        let (plus, minus) = w.pre_activations(&s.features);
        for (block, z) in plus.iter().chain(minus.iter()).enumerate() {
            let slope = act.slope(*z);
            if slope == 0.0 {
                continue;
            }
            let dst = &mut y[block * d..(block + 1) * d];
            for (yc, tc) in dst.iter_mut().zip(&s.features) {
                *yc += slope * tc;
            }
        }
    }
    Ok(Subgradient { y })
}
