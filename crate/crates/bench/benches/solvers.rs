use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use indnet::benders::{solve_benders, PartialConfig, Stabilization};
use indnet::formulation::build_ind;
use indnet::lp::solve_lp_relaxation;
use indnet::mip::MipLimits;
use indnet::oracle::solve_exact;
use indnet::solve::solve_direct;
use indnet_bench::{tiny, BUSY_SEEDS};

fn lp_relaxation(c: &mut Criterion) {
    let mut g = c.benchmark_group("lp_relaxation");
    for seed in BUSY_SEEDS {
        let m = build_ind(&tiny(seed)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(seed), &m, |b, m| b.iter(|| solve_lp_relaxation(&m.model)));
    }
    g.finish();
}

fn direct(c: &mut Criterion) {
    let mut g = c.benchmark_group("direct");
    for seed in BUSY_SEEDS {
        let inst = tiny(seed);
        g.bench_with_input(BenchmarkId::from_parameter(seed), &inst, |b, inst| {
            b.iter(|| solve_direct(inst, &MipLimits::default()).unwrap())
        });
    }
    g.finish();
}

fn benders(c: &mut Criterion) {
    let mut g = c.benchmark_group("benders");
    g.sample_size(20);
    for pct in [0.0, 50.0] {
        for seed in BUSY_SEEDS {
            let inst = tiny(seed);
            let cfg = PartialConfig {
                percentage: pct,
                ..PartialConfig::default()
            };
            g.bench_with_input(BenchmarkId::new(format!("p{pct}"), seed), &inst, |b, inst| {
                b.iter(|| solve_benders(inst, &cfg, &Stabilization::default(), &MipLimits::default()).unwrap())
            });
        }
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    for seed in BUSY_SEEDS {
        let inst = tiny(seed);
        g.bench_with_input(BenchmarkId::from_parameter(seed), &inst, |b, inst| b.iter(|| solve_exact(inst).unwrap()));
    }
    g.finish();
}

criterion_group!(solvers, lp_relaxation, direct, benders, oracle);
criterion_main!(solvers);
