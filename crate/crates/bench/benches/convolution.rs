use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ovfree::alg::{Inclusion, LinearMap};
use ovfree::distribution::make_standard;
use ovfree::{convolve, oracle, DistPair, Family, Kind, OVDistribution};

fn inputs(d: usize, order: usize) -> (OVDistribution, OVDistribution) {
    let inc = Inclusion::identity(d);
    let x = make_standard(&Family::Rademacher, &inc, order).unwrap();
    let y = make_standard(&Family::OvSemicircle(LinearMap::identity(d)), &inc, order).unwrap();
    (x, y)
}

fn benchmark_convolution(c: &mut Criterion) {
    for (d, order) in [(1, 8), (2, 6)] {
        let (x, y) = inputs(d, order);
        let (px, py) = (DistPair::diagonal(&x).unwrap(), DistPair::diagonal(&y).unwrap());
        c.bench_function(&format!("free d={d} N={order}"), |b| {
            b.iter(|| convolve::convolve(Kind::Free, black_box(&x), black_box(&y)).unwrap())
        });
        c.bench_function(&format!("boolean d={d} N={order}"), |b| {
            b.iter(|| convolve::convolve(Kind::Boolean, black_box(&x), black_box(&y)).unwrap())
        });
        c.bench_function(&format!("cfree d={d} N={order}"), |b| {
            b.iter(|| convolve::convolve_pairs(Kind::CFree, black_box(&px), black_box(&py)).unwrap())
        });
        c.bench_function(&format!("bp d={d} N={order}"), |b| {
            b.iter(|| convolve::bp_map(black_box(&x)).unwrap())
        });
    }
    let (x, y) = inputs(2, 4);
    c.bench_function("oracle free d=2 N=4", |b| {
        b.iter(|| oracle::oracle_free(black_box(&x), black_box(&y)).unwrap())
    });
    c.bench_function("oracle boolean d=2 N=4", |b| {
        b.iter(|| oracle::oracle_boolean(black_box(&x), black_box(&y)).unwrap())
    });
}

criterion_group!(benches, benchmark_convolution);
criterion_main!(benches);
