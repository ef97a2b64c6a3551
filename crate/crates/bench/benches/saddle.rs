use std::hint::black_box;

use banditpath::instanton::{noiseless_field, refine, tilt_toward};
use banditpath::{solve_saddle, BanditSpec, SolveStrategy, SolverOptions, Variant};
use criterion::{criterion_group, criterion_main, Criterion};

fn reference_spec() -> BanditSpec {
    BanditSpec::new(vec![1.0, 2.0, 3.0], vec![1.0; 3], 20, 0.36, 10.0, 0.4).unwrap()
}

fn single_start(c: &mut Criterion) {
    let spec = reference_spec();
    let mut group = c.benchmark_group("refine from tilted noiseless start");
    group.sample_size(10);
    for variant in [Variant::Simplified, Variant::Full] {
        let seed = tilt_toward(&noiseless_field(&spec, variant).unwrap(), &spec, 6.0).unwrap();
        let opts = SolverOptions {
            variant,
            ..SolverOptions::default()
        };
        group.bench_function(format!("{variant:?} r=6"), |b| b.iter(|| black_box(refine(&seed, &spec, 6.0, &opts))));
    }
    group.finish();
}

fn multistart(c: &mut Criterion) {
    let spec = reference_spec();
    let mut group = c.benchmark_group("solve_saddle");
    group.sample_size(10);
    let strategy = SolveStrategy::default();
    let opts = SolverOptions::default();
    for r in [0.0, 12.0] {
        group.bench_function(format!("r={r}"), |b| b.iter(|| black_box(solve_saddle(&spec, r, &strategy, &opts).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, single_start, multistart);
criterion_main!(benches);
