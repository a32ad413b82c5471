//! Solver throughput. The `solve` group compares one worker against the
//! default pool, and the active body against dense updates. Run again with
//! `--no-default-features` for the sequential build; its group names carry
//! a `seq` prefix so both builds can share one criterion baseline directory.

use std::hint::black_box;
use std::time::Duration;

use capl::materials::Material;
use capl::meltpool::{idw_raster, idw_sites};
use capl::model::{MeshConfig, Model};
use capl::par;
use capl::solver::{Simulation, SolverConfig};
use capl::toolpath::parse_toolpath;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn track(length: f64, margin: f64) -> Model {
    let text = format!("P p (0,195)\nV 0 0 {length} 0 0.8 p\n");
    let tp = parse_toolpath(text.as_bytes()).unwrap();
    let cfg = MeshConfig {
        fictitious_margin: margin,
        ..Default::default()
    };
    Model::build(&tp, &cfg).unwrap()
}

fn build_label() -> &'static str {
    if par::is_parallel() {
        "par"
    } else {
        "seq"
    }
}

fn solve(c: &mut Criterion) {
    let material = Material::in625();
    let mut group = c.benchmark_group(format!("{}/solve", build_label()));
    group.sample_size(10).measurement_time(Duration::from_secs(8));
    for margin in [0.1e-3, 0.3e-3] {
        let model = track(0.3e-3, margin);
        for (mode, dense) in [("active", false), ("dense", true)] {
            let cfg = SolverConfig {
                dense_mode: dense,
                compute_metrics: false,
                ..Default::default()
            };
            for (pool, threads) in [("1-thread", Some(1)), ("pool", None)] {
                let id = BenchmarkId::new(format!("{mode}/{pool}"), model.mesh.len());
                group.bench_with_input(id, &model, |b, m| {
                    b.iter(|| {
                        par::with_threads(threads, || {
                            let mut sim = Simulation::new(&m.mesh, &m.graph, &material, &cfg).unwrap();
                            black_box(sim.run(&m.toolpath, &m.sub_paths).unwrap().steps.len())
                        })
                    })
                });
            }
        }
    }
    group.finish();
}

fn build(c: &mut Criterion) {
    let text = "P p (0,195)\nV 0 0 0.3e-3 0 0.8 p\n";
    let tp = parse_toolpath(text.as_bytes()).unwrap();
    let mut group = c.benchmark_group(format!("{}/build", build_label()));
    group.sample_size(10);
    for margin in [0.1e-3, 0.3e-3, 0.6e-3] {
        let cfg = MeshConfig {
            fictitious_margin: margin,
            ..Default::default()
        };
        let n = Model::element_count(&tp, &cfg).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &cfg, |b, cfg| {
            b.iter(|| black_box(Model::build(&tp, cfg).unwrap().mesh.len()))
        });
    }
    group.finish();
}

fn reconstruct(c: &mut Criterion) {
    let model = track(0.4e-3, 0.2e-3);
    let material = Material::in625();
    let cfg = SolverConfig {
        compute_metrics: false,
        ..Default::default()
    };
    let mut sim = Simulation::new(&model.mesh, &model.graph, &material, &cfg).unwrap();
    let history = sim.run(&model.toolpath, &model.sub_paths).unwrap();
    let state = history.final_state;
    let active: Vec<usize> = (0..model.mesh.len()).collect();
    let pool = &cfg.pool;
    let sites = idw_sites(&model.mesh, &state.temperatures, &active, state.laser_position, 0.7e-3);
    let mut group = c.benchmark_group(format!("{}/idw", build_label()));
    for (name, radius) in [("local", pool.idw_radius), ("global", None)] {
        group.bench_function(name, |b| {
            b.iter(|| {
                black_box(
                    idw_raster(&sites, state.laser_position, pool.raster_side, pool.raster_pixels, 1.3, radius)
                        .unwrap(),
                )
            })
        });
    }
    group.finish();
}

criterion_group!(benches, solve, build, reconstruct);
criterion_main!(benches);
