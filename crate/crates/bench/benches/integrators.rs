use antireduce::integrators::{step, NewtonSettings};
use antireduce::systems::{heavy_top, kida, rattleback};
use antireduce::{AntiReducedField, LiePoissonField, Method, SystemPreset};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn presets() -> Vec<SystemPreset> {
    vec![
        kida::preset().unwrap(),
        rattleback::preset().unwrap(),
        heavy_top::preset().unwrap(),
    ]
}

fn collective_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("collective_step");
    let newton = NewtonSettings::default();
    for p in presets() {
        let z0 = p.initial_point().unwrap().to_flat();
        let field = AntiReducedField {
            algebra: &p.algebra,
            ham: &p.ham,
            sign: p.sign,
        };
        for method in [Method::Midpoint, Method::Gl4] {
            let tableau = method.tableau();
            group.bench_with_input(BenchmarkId::new(method.to_string(), &p.name), &z0, |b, z| {
                b.iter(|| step(&field, black_box(z), &tableau, p.recommended_dt, &newton).unwrap())
            });
        }
    }
    group.finish();
}

fn baseline_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("lie_poisson_rk4_step");
    let newton = NewtonSettings::default();
    let tableau = Method::Rk4.tableau();
    for p in presets() {
        let field = LiePoissonField {
            algebra: &p.algebra,
            ham: &p.ham,
            sign: p.sign,
        };
        let mu0 = p.mu0.as_slice().to_vec();
        group.bench_with_input(BenchmarkId::from_parameter(&p.name), &mu0, |b, mu| {
            b.iter(|| step(&field, black_box(mu), &tableau, p.recommended_dt, &newton).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, collective_steps, baseline_steps);
criterion_main!(benches);
