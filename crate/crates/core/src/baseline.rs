//! Full-batch subgradient training with Adam or Adamax, the comparison
//! baseline for DCA.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{dot, forward_unchecked, loss, Activation, Norm, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Adam,
    Adamax,
}

impl Optimizer {
    /// Adamax for uniform loss, Adam for L1.
    pub fn for_norm(norm: Norm) -> Self {
        match norm {
            Norm::Uniform => Optimizer::Adamax,
            Norm::Manhattan => Optimizer::Adam,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Optimizer::Adam => "adam",
            Optimizer::Adamax => "adamax",
        }
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adam" => Ok(Optimizer::Adam),
            "adamax" => Ok(Optimizer::Adamax),
            other => Err(Error::Config(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub optimizer: Optimizer,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Adam only.
    pub epsilon: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub init_scale: f64,
}

impl BaselineConfig {
    /// Standard hyperparameters for the optimizer.
    pub fn new(optimizer: Optimizer) -> Self {
        BaselineConfig {
            optimizer,
            step_size: match optimizer {
                Optimizer::Adam => 0.001,
                Optimizer::Adamax => 0.002,
            },
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 5000,
            seed: 0,
            init_scale: 0.5,
        }
    }

    pub fn for_norm(norm: Norm) -> Self {
        Self::new(Optimizer::for_norm(norm))
    }

    pub fn validate(&self) -> Result<()> {
        let beta_ok = |b: f64| (0.0..1.0).contains(&b);
        if !beta_ok(self.beta1) || !beta_ok(self.beta2) {
            return Err(Error::Config(format!(
                "betas must lie in [0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::Config(format!("bad step size {}", self.step_size)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!("bad epsilon {}", self.epsilon)));
        }
        if !(self.init_scale >= 0.0) || !self.init_scale.is_finite() {
            return Err(Error::Config(format!("bad init scale {}", self.init_scale)));
        }
        Ok(())
    }
}

/// Adds `coef * dF/dw` at input `t` into `grad` (flattened layout).
fn add_output_gradient(w: &Weights, act: Activation, t: &[f64], coef: f64, grad: &mut [f64]) {
    let (n, d) = (w.pairs(), w.dim());
    for j in 0..n {
        let sp = act.slope(dot(w.plus_row(j), t));
        if sp != 0.0 {
            for (g, x) in grad[j * d..(j + 1) * d].iter_mut().zip(t) {
                *g += coef * sp * x;
            }
        }
        let sm = act.slope(dot(w.minus_row(j), t));
        if sm != 0.0 {
            for (g, x) in grad[(n + j) * d..(n + j + 1) * d].iter_mut().zip(t) {
                *g -= coef * sm * x;
            }
        }
    }
}

fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A subgradient of the loss at `w`.
///
/// Uniform loss differentiates through the lowest-index sample of largest
/// absolute residual; L1 sums every sample. Kinks take the zero side: an
/// exactly zero residual or pre-activation contributes slope 0 (ReLU) or
/// `alpha` (leaky).
pub fn loss_subgradient(
    w: &Weights,
    act: Activation,
    norm: Norm,
    data: &Dataset,
) -> Result<Vec<f64>> {
    if w.dim() != data.dim() {
        return Err(Error::Dimension {
            expected: w.dim(),
            got: data.dim(),
        });
    }
    let mut grad = vec![0.0; w.len()];
    match norm {
        Norm::Uniform => {
            let mut arg: Option<(usize, f64)> = None;
            for (i, s) in data.samples().iter().enumerate() {
                let out = forward_unchecked(w, act, &s.features);
                let r = out - s.target;
                if arg.is_none_or(|(_, best)| r.abs() > best.abs()) {
                    arg = Some((i, r));
                }
            }
            if let Some((i, r)) = arg {
                let t = &data.samples()[i].features;
                add_output_gradient(w, act, t, signum0(r), &mut grad);
            }
        }
        Norm::Manhattan => {
            for s in data.samples() {
                let r = forward_unchecked(w, act, &s.features) - s.target;
                let c = signum0(r);
                if c != 0.0 {
                    add_output_gradient(w, act, &s.features, c, &mut grad);
                }
            }
        }
    }
    Ok(grad)
}

/// Adam or Adamax state; `step` returns the update to add to the weights.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    cfg: BaselineConfig,
    t: u32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(cfg: &BaselineConfig, len: usize) -> Self {
        OptimizerState {
            cfg: cfg.clone(),
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step(&mut self, grad: &[f64]) -> Vec<f64> {
        self.t += 1;
        let c = &self.cfg;
        let (b1, b2, eta) = (c.beta1, c.beta2, c.step_size);
        match c.optimizer {
            Optimizer::Adam => {
                let bc1 = 1.0 - b1.powi(self.t as i32);
                let bc2 = 1.0 - b2.powi(self.t as i32);
                grad.iter()
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                    .map(|(&g, (m, v))| {
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = b2 * *v + (1.0 - b2) * g * g;
                        let mh = *m / bc1;
                        let vh = *v / bc2;
                        -eta * mh / (vh.sqrt() + c.epsilon)
                    })
                    .collect()
            }
            Optimizer::Adamax => {
                // m holds the bias-corrected mean m_t / (1 - b1^t), updated
                // recursively; the first step is exactly -eta * sign(g)
                let gain = (1.0 - b1) / (1.0 - b1.powi(self.t as i32));
                grad.iter()
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                    .map(|(&g, (m, u))| {
                        *m += gain * (g - *m);
                        *u = (b2 * *u).max(g.abs());
                        if *u == 0.0 {
                            0.0
                        } else {
                            -eta * (*m / *u)
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    /// Weights attaining `final_loss`.
    pub final_weights: Weights,
    /// Best loss seen over all epochs.
    pub final_loss: f64,
    /// Loss before each update, then after the last one (`max_epochs + 1`
    /// entries).
    pub loss_curve: Vec<f64>,
    pub last_weights: Weights,
}

impl BaselineRun {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (e, l) in self.loss_curve.iter().enumerate() {
            writeln!(out, "{e},{l:?}").unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Trains from uniform random weights on `[-init_scale, init_scale]`.
pub fn train_baseline(
    data: &Dataset,
    n: usize,
    act: Activation,
    norm: Norm,
    cfg: &BaselineConfig,
) -> Result<BaselineRun> {
    if n == 0 {
        return Err(Error::Config("need at least one pair".into()));
    }
    let w0 = Weights::random_uniform(n, data.dim(), cfg.init_scale, cfg.seed);
    train_baseline_from(data, w0, act, norm, cfg)
}

pub fn train_baseline_from(
    data: &Dataset,
    w0: Weights,
    act: Activation,
    norm: Norm,
    cfg: &BaselineConfig,
) -> Result<BaselineRun> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (n, d) = (w0.pairs(), w0.dim());
    let mut flat = w0.flatten();
    let mut w = w0;
    let mut opt = OptimizerState::new(cfg, flat.len());
    let mut curve = Vec::with_capacity(cfg.max_epochs + 1);
    let mut best = (w.clone(), loss(&w, act, norm, data)?);
    curve.push(best.1);
    for _ in 0..cfg.max_epochs {
        let g = loss_subgradient(&w, act, norm, data)?;
        let delta = opt.step(&g);
        for (x, dx) in flat.iter_mut().zip(&delta) {
            *x += dx;
        }
        w = Weights::from_flat(n, d, &flat)?;
        let l = loss(&w, act, norm, data)?;
        curve.push(l);
        if l < best.1 {
            best = (w.clone(), l);
        }
    }
    log::info!(
        "{} baseline: best loss {:.9} over {} epochs",
        cfg.optimizer.label(),
        best.1,
        cfg.max_epochs
    );
    Ok(BaselineRun {
        final_weights: best.0,
        final_loss: best.1,
        loss_curve: curve,
        last_weights: w,
    })
}
