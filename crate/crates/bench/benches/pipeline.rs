use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use sigmalab::analysis::{injectivity_check, lewy_verify, LewyOptions};
use sigmalab::fem::{solve_map, StiffnessSystem};
use sigmalab::mesh::generate_disk;
use sigmalab::{CoefficientField, Mesh, Point2};

fn disk(h: f64) -> Arc<Mesh> {
    Arc::new(generate_disk(Point2::ORIGIN, 1.0, h).unwrap())
}

fn assembly_and_solve(c: &mut Criterion) {
    let sigma = CoefficientField::anisotropic(2.0, 0.5, 0.3);
    let mut group = c.benchmark_group("fem");
    for h in [0.05, 0.025] {
        let mesh = disk(h);
        group.bench_function(format!("assemble h={h}"), |b| {
            b.iter(|| StiffnessSystem::assemble(black_box(mesh.clone()), &sigma).unwrap())
        });
        let system = StiffnessSystem::assemble(mesh.clone(), &sigma).unwrap();
        group.bench_function(format!("solve h={h}"), |b| {
            b.iter(|| system.solve(&|p| Ok(p.x1)).unwrap())
        });
    }
    group.finish();
}

fn analysis(c: &mut Criterion) {
    let sigma = CoefficientField::anisotropic(2.0, 0.5, 0.3);
    let (map, _) = solve_map(disk(0.03), &sigma, &|p| Ok(p.x1), &|p| Ok(p.x2)).unwrap();
    let mut group = c.benchmark_group("analysis");
    group.sample_size(10);
    group.bench_function("injectivity h=0.03", |b| {
        b.iter(|| injectivity_check(black_box(&map)))
    });
    group.bench_function("lewy_verify h=0.03", |b| {
        b.iter(|| lewy_verify(black_box(&map), &sigma, &LewyOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, assembly_and_solve, analysis);
criterion_main!(benches);
