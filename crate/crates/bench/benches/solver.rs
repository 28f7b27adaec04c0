use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dcrelu::dc::{eval_dc, subgrad_h};
use dcrelu::dca::{init_weights, run_dca, DcaConfig};
use dcrelu::lp::{solve, SolverConfig};
use dcrelu::{Activation, Norm};
use dcrelu_bench::{first_step_lp, phi1_grid};

fn lp_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("step2_lp");
    group.sample_size(10);
    for k in [10, 20] {
        let data = phi1_grid(k);
        for norm in [Norm::Uniform, Norm::Manhattan] {
            let lp = first_step_lp(&data, 2, Activation::Relu, norm);
            let id = BenchmarkId::new(norm.label(), k * k);
            group.bench_with_input(id, &lp, |b, lp| {
                b.iter(|| solve(black_box(&lp.problem), &SolverConfig::default()).unwrap())
            });
        }
    }
    group.finish();
}

fn dc_eval(c: &mut Criterion) {
    let data = phi1_grid(50);
    let w = init_weights(2, 2, &DcaConfig::default());
    let act = Activation::LeakyRelu { alpha: 0.01 };
    c.bench_function("eval_dc_2500", |b| {
        b.iter(|| eval_dc(black_box(&w), act, Norm::Uniform, &data).unwrap())
    });
    c.bench_function("subgrad_h_2500", |b| {
        b.iter(|| subgrad_h(black_box(&w), act, Norm::Uniform, &data).unwrap())
    });
}

fn dca_small(c: &mut Criterion) {
    let data = phi1_grid(10);
    let mut group = c.benchmark_group("dca_10x10");
    group.sample_size(10);
    for norm in [Norm::Uniform, Norm::Manhattan] {
        group.bench_function(norm.label(), |b| {
            b.iter(|| run_dca(&data, 2, Activation::Relu, norm, &DcaConfig::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, lp_solve, dc_eval, dca_small);
criterion_main!(benches);
