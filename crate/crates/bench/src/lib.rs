//! Fixtures shared by the criterion benches.

use dmp_avoid_core::costs::{ModelConfig, ModelFamily};
use dmp_avoid_core::mlp::MlpModel;
use dmp_avoid_core::perception::{detect, DetectConfig, Detection};
use dmp_avoid_core::planner::scene::{floor_slab, generate, Scene, SceneConfig};
use dmp_avoid_core::planner::{NnPlanner, ObstacleSet};
use dmp_avoid_core::Vec3;

pub const EE_DIMS: [f64; 3] = [0.05, 0.05, 0.05];
pub const OFFSET: f64 = 0.02;

/// A freshly initialized network: timing does not depend on the weights.
pub fn planner(family: ModelFamily) -> NnPlanner {
    let model = ModelConfig::preset(family);
    let net = MlpModel::for_model(&model, 0).expect("preset architecture");
    NnPlanner::new(net, model).expect("matching family")
}

pub struct Fixture {
    pub scene: Scene,
    pub detection: Detection,
    pub goal: Vec3,
    pub obstacles: ObstacleSet,
}

pub fn fixture(seed: u64) -> Fixture {
    let cfg = SceneConfig::default();
    let scene = generate(seed, &cfg);
    let w = Vec3::from(EE_DIMS);
    let detection = detect(&scene.cloud, &scene.pick, ModelFamily::ThreeParam2d, &w, OFFSET, &DetectConfig::default())
        .expect("generated scenes pass detection");
    let goal = detection.goal + Vec3::new(0.0, 0.0, cfg.hover);
    let mut obstacles = ObstacleSet::new(detection.obstacle.iter().copied().collect());
    obstacles.boxes.push(floor_slab());
    Fixture { scene, detection, goal, obstacles }
}
