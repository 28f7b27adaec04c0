//! The linear program solved in each DCA iteration: minimise the convex
//! surrogate `g(w) - y . w` over the trust box.
//!
//! Variables, in order: the weights `w` (2nd, boxed by the trust radius), the
//! epigraph variable(s) (one for uniform loss, one per sample for L1), then
//! `z+_{ij}` and `z-_{ij}` bounding the activated units from above the
//! activation: `z+_{ij} >= s(a_j . T_i)`, written as one row per affine piece
//! of `s`. The activated sums only ever appear with nonnegative weight in the
//! objective's epigraph, so at an optimum the `z` variables can be pushed
//! down onto the activation and the LP value equals the surrogate minimum.
//!
//! For uniform loss, `g_i + sum_{k != i} h_k = (g_i - h_i) + sum_k h_k`; the
//! common term `sum_k h_k = sum_{ij} (z+_{ij} + z-_{ij})` moves into the
//! objective and each epigraph row carries only `g_i - h_i`, keeping the rows
//! sparse. `y . w` is likewise an objective term, so the constraint matrix
//! does not depend on the iterate and a basis can be reused across
//! iterations.

use super::{LpProblem, LpSolution, LpStatus, Relation};
use crate::dataset::Dataset;
use crate::dc::Subgradient;
use crate::error::{Error, Result};
use crate::model::{Activation, Norm, Weights};

/// Column offsets of the variable blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step2Layout {
    pub pairs: usize,
    pub dim: usize,
    pub samples: usize,
    pub norm: Norm,
}

impl Step2Layout {
    pub fn weight_count(&self) -> usize {
        2 * self.pairs * self.dim
    }

    /// 1 for uniform loss, N for L1.
    pub fn epigraph_count(&self) -> usize {
        match self.norm {
            Norm::Uniform => 1,
            Norm::Manhattan => self.samples,
        }
    }

    pub fn epigraph(&self, i: usize) -> usize {
        self.weight_count()
            + match self.norm {
                Norm::Uniform => 0,
                Norm::Manhattan => i,
            }
    }

    pub fn plus_unit(&self, i: usize, j: usize) -> usize {
        self.weight_count() + self.epigraph_count() + i * self.pairs + j
    }

    pub fn minus_unit(&self, i: usize, j: usize) -> usize {
        self.plus_unit(i, j) + self.samples * self.pairs
    }

    /// `2dn + K + 2Nn`.
    pub fn num_vars(&self) -> usize {
        self.weight_count() + self.epigraph_count() + 2 * self.samples * self.pairs
    }

    fn plus_weight(&self, j: usize, c: usize) -> usize {
        j * self.dim + c
    }

    fn minus_weight(&self, j: usize, c: usize) -> usize {
        (self.pairs + j) * self.dim + c
    }
}

/// A step-2 LP together with its layout.
#[derive(Debug, Clone)]
pub struct Step2Lp {
    pub problem: LpProblem,
    pub layout: Step2Layout,
    act: Activation,
}

impl Step2Lp {
    /// Builds the rows and bounds; the weight costs start at zero until a
    /// subgradient is installed.
    pub fn new(
        act: Activation,
        norm: Norm,
        data: &Dataset,
        pairs: usize,
        trust_radius: f64,
    ) -> Result<Self> {
        if pairs == 0 {
            return Err(Error::Config("need at least one pair".into()));
        }
        if !(trust_radius > 0.0) {
            return Err(Error::Config(format!(
                "trust radius must be positive, got {trust_radius}"
            )));
        }
        let layout = Step2Layout {
            pairs,
            dim: data.dim(),
            samples: data.len(),
            norm,
        };
        let (n, d, big_n) = (pairs, data.dim(), data.len());
        let mut lp = LpProblem::new();

        for (half, name) in [(0, "a"), (1, "b")] {
            for j in 0..n {
                for c in 0..d {
                    let idx =
                        lp.add_var(format!("{name}{j}_{c}"), 0.0, -trust_radius, trust_radius);
                    debug_assert_eq!(
                        idx,
                        if half == 0 {
                            layout.plus_weight(j, c)
                        } else {
                            layout.minus_weight(j, c)
                        }
                    );
                    lp.trust_vars.push(idx);
                }
            }
        }
        match norm {
            Norm::Uniform => {
                lp.add_var("z", 1.0, f64::NEG_INFINITY, f64::INFINITY);
            }
            Norm::Manhattan => {
                for i in 0..big_n {
                    lp.add_var(format!("z{i}"), 1.0, f64::NEG_INFINITY, f64::INFINITY);
                }
            }
        }
        // unit variables carry the shared h term for uniform loss
        let unit_cost = match norm {
            Norm::Uniform => 1.0,
            Norm::Manhattan => 0.0,
        };
        let unit_lower = match act {
            Activation::Relu => 0.0,
            Activation::LeakyRelu { .. } => f64::NEG_INFINITY,
        };
        for (prefix, _) in [("zp", 0), ("zm", 1)] {
            for i in 0..big_n {
                for j in 0..n {
                    lp.add_var(
                        format!("{prefix}{i}_{j}"),
                        unit_cost,
                        unit_lower,
                        f64::INFINITY,
                    );
                }
            }
        }
        debug_assert_eq!(lp.num_vars, layout.num_vars());

        // epigraph rows, by sample
        for (i, s) in data.samples().iter().enumerate() {
            let f = s.target;
            let e = layout.epigraph(i);
            let (wp, wm) = match norm {
                // g_i - h_i: f + sum z- - sum z+ and sum z+ - sum z- - f
                Norm::Uniform => ((-1.0, 1.0), (1.0, -1.0)),
                Norm::Manhattan => ((0.0, 2.0), (2.0, 0.0)),
            };
            // first branch: f + 2 sum z-  (uniform: minus h_i) <= epigraph
            let mut row = vec![(e, -1.0)];
            for j in 0..n {
                if wp.0 != 0.0 {
                    row.push((layout.plus_unit(i, j), wp.0));
                }
                row.push((layout.minus_unit(i, j), wp.1));
            }
            lp.add_row(format!("g{i}_m"), row, Relation::Le, -f);
            // second branch: 2 sum z+ - f (uniform: minus h_i) <= epigraph
            let mut row = vec![(e, -1.0)];
            for j in 0..n {
                row.push((layout.plus_unit(i, j), wm.0));
                if wm.1 != 0.0 {
                    row.push((layout.minus_unit(i, j), wm.1));
                }
            }
            lp.add_row(format!("g{i}_p"), row, Relation::Le, f);
        }

        // unit rows, by (i, j, sign): z >= slope * (w_j . T_i) per affine piece
        let slopes: &[f64] = match act {
            Activation::Relu => &[1.0],
            Activation::LeakyRelu { alpha } => &[1.0, alpha][..],
        };
        let slopes = slopes.to_vec();
        for (i, s) in data.samples().iter().enumerate() {
            for j in 0..n {
                for (sign, unit, wcol) in [
                    ("p", layout.plus_unit(i, j), layout.plus_weight(j, 0)),
                    ("m", layout.minus_unit(i, j), layout.minus_weight(j, 0)),
                ] {
                    for (k, &slope) in slopes.iter().enumerate() {
                        let mut row = vec![(unit, 1.0)];
                        for (c, &t) in s.features.iter().enumerate() {
                            if t != 0.0 {
                                row.push((wcol + c, -slope * t));
                            }
                        }
                        lp.add_row(format!("u{sign}{i}_{j}_{k}"), row, Relation::Ge, 0.0);
                    }
                }
            }
        }

        Ok(Step2Lp {
            problem: lp,
            layout,
            act,
        })
    }

    /// Installs `-y` as the cost of the weight block.
    pub fn set_subgradient(&mut self, y: &Subgradient) -> Result<()> {
        let k = self.layout.weight_count();
        if y.len() != k {
            return Err(Error::Dimension {
                expected: k,
                got: y.len(),
            });
        }
        for (c, &v) in self.problem.objective[..k].iter_mut().zip(&y.y) {
            *c = -v;
        }
        Ok(())
    }

    /// The LP point induced by weights `w`: units at their activation,
    /// epigraph variables at their tightest value. Its objective equals
    /// `g(w) - y . w`.
    pub fn substitution_point(&self, w: &Weights, data: &Dataset) -> Result<Vec<f64>> {
        let l = &self.layout;
        if w.pairs() != l.pairs || w.dim() != l.dim || data.len() != l.samples {
            return Err(Error::Dimension {
                expected: l.weight_count(),
                got: w.len(),
            });
        }
        let mut x = vec![0.0; l.num_vars()];
        x[..l.weight_count()].copy_from_slice(&w.flatten());
        let mut uniform_eps = f64::NEG_INFINITY;
        for (i, s) in data.samples().iter().enumerate() {
            let (plus, minus) = w.pre_activations(&s.features);
            let (mut sp, mut sm) = (0.0, 0.0);
            for j in 0..l.pairs {
                let zp = self.act.apply(plus[j]);
                let zm = self.act.apply(minus[j]);
                x[l.plus_unit(i, j)] = zp;
                x[l.minus_unit(i, j)] = zm;
                sp += zp;
                sm += zm;
            }
            let f = s.target;
            match l.norm {
                Norm::Uniform => {
                    uniform_eps = uniform_eps.max((f + sm - sp).max(sp - sm - f));
                }
                Norm::Manhattan => {
                    x[l.epigraph(i)] = (f + 2.0 * sm).max(2.0 * sp - f);
                }
            }
        }
        if l.norm == Norm::Uniform {
            x[l.epigraph(0)] = uniform_eps;
        }
        Ok(x)
    }
}

/// Builds the step-2 LP at the iterate `w_k` with subgradient `y`.
///
/// `w_k` only fixes the shape: the LP data depend on the dataset, the
/// activation and `y`.
pub fn build_step2_lp(
    w_k: &Weights,
    y: &Subgradient,
    act: Activation,
    norm: Norm,
    data: &Dataset,
    trust_radius: f64,
) -> Result<Step2Lp> {
    if w_k.dim() != data.dim() {
        return Err(Error::Dimension {
            expected: w_k.dim(),
            got: data.dim(),
        });
    }
    let mut lp = Step2Lp::new(act, norm, data, w_k.pairs(), trust_radius)?;
    lp.set_subgradient(y)?;
    Ok(lp)
}

/// Reads the weight block of an optimal solution.
pub fn extract_weights(sol: &LpSolution, n: usize, d: usize) -> Result<Weights> {
    if sol.status != LpStatus::Optimal {
        return Err(Error::LpNotOptimal(sol.status));
    }
    let k = 2 * n * d;
    if sol.x.len() < k {
        return Err(Error::Dimension {
            expected: k,
            got: sol.x.len(),
        });
    }
    Weights::from_flat(n, d, &sol.x[..k])
}
