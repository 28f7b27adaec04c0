//! Fixtures shared by the benchmarks.

use dcrelu::dc::subgrad_h;
use dcrelu::dca::{init_weights, DcaConfig};
use dcrelu::lp::{build_step2_lp, Step2Lp};
use dcrelu::{Activation, Dataset, GridSpec, Norm, Synthetic};

/// `Phi1` sampled on a `k x k` grid over the unit square.
pub fn phi1_grid(k: usize) -> Dataset {
    Synthetic::Phi1
        .dataset(GridSpec::new(k, -1.0, 1.0).expect("valid grid"))
        .expect("grid builds")
}

/// The first DCA subproblem from the default initial weights.
pub fn first_step_lp(data: &Dataset, pairs: usize, act: Activation, norm: Norm) -> Step2Lp {
    let cfg = DcaConfig::default();
    let w = init_weights(pairs, data.dim(), &cfg);
    let y = subgrad_h(&w, act, norm, data).expect("dims match");
    build_step2_lp(&w, &y, act, norm, data, cfg.trust_radius).expect("LP builds")
}
