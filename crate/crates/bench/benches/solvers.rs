use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use wcsgd_bench::reference_problems;
use wcsgd_core::metrics::trajectory_metrics;
use wcsgd_core::moreau::prox_point;
use wcsgd_core::optim::{run_clipped_ssgd, run_ssgd};
use wcsgd_core::{ClipSchedule, MoreauConfig, NoiseModel, RngStream, RunOptions, StepSchedule};

fn prox(c: &mut Criterion) {
    for p in reference_problems() {
        let cfg = MoreauConfig::scaled(&p, 3.0);
        let x: Vec<f64> = (0..p.dim()).map(|i| 0.3 * (i as f64).sin()).collect();
        c.bench_function(&format!("prox_point/{}", p.name), |b| {
            b.iter(|| prox_point(&p, &cfg, black_box(&x)).unwrap())
        });
    }
}

fn runs(c: &mut Criterion) {
    let p = &reference_problems()[0];
    let noise = NoiseModel::pareto(1.0, 1.5, 1.8).unwrap();
    let step = StepSchedule::InverseSqrt { gamma: 0.1 };
    c.bench_function("run_ssgd/T=1000", |b| {
        b.iter(|| {
            run_ssgd(
                p,
                &noise,
                &step,
                1000,
                RngStream::new(1, 0),
                &RunOptions::default(),
            )
            .unwrap()
        })
    });
    let clip = ClipSchedule::Anytime {
        lam: 1.0,
        p: 1.5,
        g: p.lipschitz_g,
    };
    let coupled = StepSchedule::ClipCoupledAnytime { eta0: 1.0 };
    c.bench_function("run_clipped_ssgd/T=1000,B=4", |b| {
        b.iter(|| {
            run_clipped_ssgd(
                p,
                &noise,
                &coupled,
                &clip,
                4,
                1000,
                RngStream::new(1, 0),
                &RunOptions::default(),
            )
            .unwrap()
        })
    });
    let traj = run_ssgd(
        p,
        &noise,
        &step,
        10_000,
        RngStream::new(2, 0),
        &RunOptions::default(),
    )
    .unwrap();
    let cfg = MoreauConfig::scaled(p, 3.0);
    c.bench_function("trajectory_metrics/T=10000", |b| {
        b.iter(|| trajectory_metrics(black_box(&traj), p, &cfg).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = prox, runs
}
criterion_main!(benches);
