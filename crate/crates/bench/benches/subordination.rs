use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ovfree::subordination::{self, FixedPointConfig, SuiteSpec};
use ovfree::OperatorModel;

fn benchmark_subordination(c: &mut Criterion) {
    let cfg = FixedPointConfig::default();
    for (name, model) in [
        ("rademacher", OperatorModel::rademacher(1).unwrap()),
        ("semicircle-d2", OperatorModel::semicircle_d2().unwrap()),
    ] {
        let b = subordination::imaginary_grid(&[3.0], model.d_b()).remove(0);
        c.bench_function(&format!("omega_fixed_point {name}"), |bn| {
            bn.iter(|| subordination::omega_fixed_point(black_box(&model), 2, black_box(&b), &cfg).unwrap())
        });
    }
    let model = OperatorModel::rademacher(1).unwrap();
    let spec = SuiteSpec {
        x: &model,
        y: &model,
        grid: subordination::imaginary_grid(&[3.0, 4.0, 6.0], 1),
        order: 6,
        n_fold: 2,
        cfg,
    };
    c.bench_function("subordination suite rademacher N=6", |bn| {
        bn.iter(|| subordination::verify_subordination_suite(black_box(&spec)).unwrap())
    });
}

criterion_group!(benches, benchmark_subordination);
criterion_main!(benches);
