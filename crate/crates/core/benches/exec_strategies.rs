use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use delaydense::density::{sample_ensemble, uniform_edges, Density1D};
use delaydense::exec::{with_strategy, Strategy};
use delaydense::transient::{basin_raster, AttractorTemplate, BasinRect};
use delaydense::{DelaySystem, FamilyKind};

const STRATEGIES: [(&str, Strategy); 2] = [
    ("sequential", Strategy::Sequential),
    ("parallel", Strategy::Parallel),
];

fn ensemble(c: &mut Criterion) {
    let sys = DelaySystem::mackey_glass(2.0, 4.0, 10.0).unwrap();
    let rho0 = Density1D::uniform(0.3, 1.3, 1).unwrap();
    let edges = uniform_edges(0.0, 2.0, 100);
    let mut g = c.benchmark_group("ensemble_4k_t20");
    g.sample_size(10);
    for (name, s) in STRATEGIES {
        g.bench_function(name, |b| {
            b.iter(|| {
                with_strategy(s, || {
                    sample_ensemble(
                        &sys,
                        &rho0,
                        FamilyKind::Constant,
                        20.0,
                        4000,
                        1,
                        &edges,
                        256,
                    )
                    .unwrap()
                })
            })
        });
    }
    g.finish();
}

fn basin(c: &mut Criterion) {
    let sys = DelaySystem::mackey_glass(2.0, 4.0, 10.0).unwrap();
    let templates = [AttractorTemplate::fixed_point(0, 1.0, 1.0 / 256.0).unwrap()];
    let rect = BasinRect::new(0.2, 1.8, -0.5, 0.5).unwrap();
    let mut g = c.benchmark_group("basin_16x16");
    g.sample_size(10);
    for (name, s) in STRATEGIES {
        g.bench_function(name, |b| {
            b.iter(|| {
                with_strategy(s, || {
                    basin_raster(&sys, black_box(rect), 16, 16, 60.0, &templates, 256).unwrap()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, ensemble, basin);
criterion_main!(benches);
