use std::f64::consts::FRAC_PI_2;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use varifold_lab_core::*;

fn cross(resolution: usize) -> QuadratureVarifold {
    let spec = SceneSpec::new(
        2,
        1,
        vec![Primitive::new(
            Shape::LineFan {
                angles: vec![0.0, FRAC_PI_2],
                radius: 1.0,
                center: None,
            },
            resolution,
        )],
    );
    build_scene(&spec).unwrap()
}

fn constants(c: &mut Criterion) {
    c.bench_function("constants_table", |b| {
        b.iter(|| ConstantsTable::build(black_box(ConstantParams::new(3, 2, 4.0, 2, 1.0))).unwrap())
    });
}

fn scene(c: &mut Criterion) {
    c.bench_function("build_cross_8192", |b| b.iter(|| cross(black_box(8192))));
}

fn ladder(c: &mut Criterion) {
    let t = ConstantsTable::build(ConstantParams::new(2, 1, 2.0, 2, 1.0)).unwrap();
    let v = cross(4096).with_tangent_field();
    c.bench_function("nested_partition_depth4", |b| {
        b.iter(|| nested_partition(&v, &[0.0, 0.0], 1.0, 0.15, 4, &t).unwrap())
    });
}

fn graph(c: &mut Criterion) {
    let t = ConstantsTable::build(ConstantParams::new(2, 1, 2.0, 2, 1.0)).unwrap();
    let spec = SceneSpec::new(
        2,
        1,
        vec![
            Primitive::new(Shape::Segment { start: vec![-1.0, 0.0], end: vec![1.0, 0.0] }, 1 << 13),
            Primitive::new(Shape::Segment { start: vec![-1.0, 1e-3], end: vec![1.0, 1e-3] }, 1 << 13),
        ],
    );
    let v = build_scene(&spec).unwrap();
    c.bench_function("lipschitz_approximation", |b| {
        b.iter(|| lipschitz_approximation(&v, &[0.0, 0.0], 0.5, 1.0, 8, &t).unwrap())
    });
}

fn counterexample(c: &mut Criterion) {
    c.bench_function("sequence_depth_50", |b| {
        b.iter(|| generate_sequence(0.5, MonotoneFn::Identity, MonotoneFn::Identity, black_box(50)).unwrap())
    });
}

criterion_group!(benches, constants, scene, ladder, graph, counterexample);
criterion_main!(benches);
