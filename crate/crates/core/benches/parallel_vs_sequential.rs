use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use boomclimb::exec::Exec;
use boomclimb::geometry::{Point3, TriMesh};
use boomclimb::grasp::GraspScenario;
use boomclimb::limit_surface::{build_limit_surface, MonteCarloConfig};
use boomclimb::nalgebra::Vector3;
use boomclimb::perception::{estimate_normals, msac_sphere_fit, MsacConfig};
use boomclimb::reach::{reachable_faces, BasePose, FingerCase, ReachConfig};
use boomclimb::synthetic::noisy_sphere_scene;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn limit_surface(c: &mut Criterion) {
    let scn = GraspScenario::field_test();
    let cfg = MonteCarloConfig::new(6, 40, 1);
    let mut g = c.benchmark_group("limit_surface");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| build_limit_surface(&scn, &cfg, exec).unwrap()));
    }
    g.finish();
}

fn perception(c: &mut Criterion) {
    let pc = noisy_sphere_scene(&Point3::new(0.0, 0.0, 1.0), 0.17, 2000, 0.002, 0.3, 5);
    let cfg = MsacConfig { seed: 5, ..Default::default() };
    let mut g = c.benchmark_group("msac");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| msac_sphere_fit(&pc, &cfg, exec).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("normals");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| estimate_normals(&pc, 30, &Point3::zeros(), exec).unwrap()));
    }
    g.finish();
}

fn reach(c: &mut Criterion) {
    let mesh = TriMesh::ledge(0.15, 0.15, 0.01, 20, 8);
    let cfg = ReachConfig::default();
    let base = BasePose::above_patch(&mesh, &Point3::new(-0.003, 0.0, -0.003), 0.03, cfg.standoff, &Vector3::new(1.0, 0.0, -1.0)).unwrap();
    let mut g = c.benchmark_group("reach_case4");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| reachable_faces(FingerCase::SpineRotation, &mesh, &base, &cfg, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, limit_surface, perception, reach);
criterion_main!(benches);
