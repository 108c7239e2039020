use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use dmp_avoid_bench::{fixture, planner, EE_DIMS};
use dmp_avoid_core::costs::ModelFamily;
use dmp_avoid_core::dmp::{Dmp, DmpConfig};
use dmp_avoid_core::perception::{dbscan2d, voxel_downsample, DetectConfig};
use dmp_avoid_core::planner::{plan_rrt_connect, RrtConfig};
use dmp_avoid_core::{Frame, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inference(c: &mut Criterion) {
    let p = planner(ModelFamily::ThreeParam2d);
    let f = fixture(1);
    let frame = Frame::from_endpoints(f.scene.pick, f.goal).unwrap();
    let cand = f.detection.candidates[0].clone();
    c.bench_function("infer_3p2d", |b| b.iter(|| p.net.infer(black_box(&cand.params)).unwrap()));
    c.bench_function("infer_and_rollout_3p2d", |b| b.iter(|| p.rollout(&frame, black_box(&cand)).unwrap()));
}

fn rollout(c: &mut Criterion) {
    let dmp = Dmp::new(DmpConfig::with_basis(25)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let data: Vec<f64> = (0..50).map(|_| rng.random_range(-20.0..20.0)).collect();
    let w = dmp_avoid_core::ForcingWeights::new(2, 25, data).unwrap();
    c.bench_function("rollout_local_k25", |b| b.iter(|| dmp.rollout_local(black_box(&w), 1.0).unwrap()));
}

fn perception(c: &mut Criterion) {
    let f = fixture(2);
    let cfg = DetectConfig::default();
    c.bench_function("voxel_downsample_scene", |b| b.iter(|| voxel_downsample(black_box(&f.scene.cloud), cfg.voxel).unwrap()));
    let down = voxel_downsample(&f.scene.cloud, cfg.voxel).unwrap();
    let xy: Vec<[f64; 2]> = down.points.iter().filter(|p| p.z > 0.01).map(|p| [p.x, p.y]).collect();
    c.bench_function("dbscan2d_scene", |b| b.iter(|| dbscan2d(black_box(&xy), cfg.eps, cfg.min_pts)));
    let w = Vec3::from(EE_DIMS);
    c.bench_function("detect_scene", |b| {
        b.iter(|| dmp_avoid_core::perception::detect(&f.scene.cloud, &f.scene.pick, ModelFamily::ThreeParam2d, &w, 0.02, &cfg).unwrap())
    });
}

fn planning(c: &mut Criterion) {
    let p = planner(ModelFamily::ThreeParam2d);
    let fixtures: Vec<_> = (0..8).map(fixture).collect();
    let w = Vec3::from(EE_DIMS);
    c.bench_function("plan_nn_8_scenes", |b| {
        b.iter(|| {
            for f in &fixtures {
                // Untrained weights may fail the collision check; the cost of
                // trying every candidate is what is measured.
                let _ = black_box(p.plan(&f.scene.pick, &f.goal, &f.detection.candidates, &f.obstacles, &w));
            }
        })
    });
    let f = &fixtures[0];
    let mut seed = 0;
    c.bench_function("plan_rrt_connect", |b| {
        b.iter_batched(
            || {
                seed += 1;
                RrtConfig { seed, ..RrtConfig::default() }
            },
            |cfg| plan_rrt_connect(&f.scene.pick, &f.goal, &f.obstacles, &w, &cfg),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, inference, rollout, perception, planning);
criterion_main!(benches);
