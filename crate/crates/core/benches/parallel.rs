//! Parallel-vs-sequential benchmarks for the data-parallel inner loops:
//! kernel-table evaluation, Monte Carlo moments, and the sharp-function
//! sweep.  With the default `parallel` feature the `par::*` entry points fan
//! out over rayon; the `*_seq` twins always run sequentially, so one build
//! measures both paths.

use criterion::{criterion_group, criterion_main, Criterion};
use fracspde_core::analysis::{cube_family, prefix_sums, sharp_at};
use fracspde_core::bernstein::{log_grid, stable};
use fracspde_core::fraccalc::TimeGrid;
use fracspde_core::grid::SpectralGrid;
use fracspde_core::kernel::{FracParams, QKernelEval};
use fracspde_core::noise;
use fracspde_core::par;
use fracspde_core::spde::{trig_basis, ExactSampler, ForcingMode};
use std::f64::consts::PI;
use std::hint::black_box;

fn bench_kernel_eval(c: &mut Criterion) {
    let phi = stable(0.5);
    let params = FracParams::new(0.8, 0.7, 0.0, 0.05).unwrap();
    let ev = QKernelEval::new(params, &phi, 1.0, 1).unwrap();
    let xs = log_grid(1.0e-3, 1.0e3, 64);
    let mut group = c.benchmark_group("kernel_eval_64pts");
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let vals = par::map_slice(&xs, |&x| ev.eval(x, 0).unwrap());
            black_box(vals)
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let vals = par::map_slice_seq(&xs, |&x| ev.eval(x, 0).unwrap());
            black_box(vals)
        })
    });
    group.finish();
}

fn bench_monte_carlo_moment(c: &mut Criterion) {
    let phi = stable(1.0);
    let params = FracParams::new(0.9, 0.8, 0.0, 0.05).unwrap();
    let grid = SpectralGrid::new(1, 2.0 * PI, 64, &phi).unwrap();
    let tgrid = TimeGrid::new(1.0, 32).unwrap();
    let modes: Vec<ForcingMode> =
        (0..4).map(|k| ForcingMode::constant(trig_basis(k), 1.0, 32)).collect();
    let sampler = ExactSampler::new(&modes, &params, &phi, &grid, tgrid).unwrap();
    let n_rep = 512usize;
    let draw = |r: usize| {
        let u = sampler.sample(noise::fold_seed(1, r as u64));
        let last = &u.values[32];
        grid.inner(last, last)
    };
    let mut group = c.benchmark_group("mc_second_moment_512");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par::map_indexed(n_rep, draw).iter().sum::<f64>()))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(par::map_indexed_seq(n_rep, draw).iter().sum::<f64>()))
    });
    group.finish();
}

fn bench_sharp_sweep(c: &mut Criterion) {
    let phi = stable(0.5);
    let (n_t, n_x) = (33usize, 64usize);
    let v: Vec<Vec<f64>> = (0..n_t)
        .map(|t| (0..n_x).map(|x| ((t * 7 + x * 3) % 17) as f64 * 0.1).collect())
        .collect();
    let fam = cube_family(&phi, 0.8, 0.125, 1.0 / 32.0, n_x, n_t).unwrap();
    let pre = prefix_sums(&v);
    let points: Vec<(usize, usize)> =
        (0..60).map(|i| (1 + (i * 11) % (n_t - 1), (i * 7) % n_x)).collect();
    let work = |&(it, ix): &(usize, usize)| sharp_at(&v, &pre, &fam, it, ix, 1).0;
    let mut group = c.benchmark_group("sharp_sweep_60pts");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par::map_slice(&points, work)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(par::map_slice_seq(&points, work)))
    });
    group.finish();
}

criterion_group!(benches, bench_kernel_eval, bench_monte_carlo_moment, bench_sharp_sweep);
criterion_main!(benches);
