//! Seeded pick-and-drop scenes: a wall of stacked blocks between two
//! workspaces, a cup at the drop location and a synthetic point cloud.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ObstacleSet;
use crate::geometry::Vec3;
use crate::perception::{Aabb, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Block size along X, Y, Z.
    pub block: [f64; 3],
    pub wall_center_y: f64,
    pub max_blocks_y: usize,
    pub max_blocks_z: usize,
    /// XY rectangles (min x, min y, max x, max y) for pick and drop.
    pub pick_area: [f64; 4],
    pub drop_area: [f64; 4],
    /// End-effector height at the pick pose.
    pub pick_height: f64,
    pub cup_radius: f64,
    pub cup_height: f64,
    /// End-effector height above the cup rim at the drop pose.
    pub hover: f64,
    /// Floor rectangle rendered into the cloud.
    pub floor_area: [f64; 4],
    pub spacing: f64,
    /// Gaussian noise on every cloud coordinate; zero disables.
    pub noise: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            block: [0.1, 0.05, 0.12],
            wall_center_y: 0.5,
            max_blocks_y: 7,
            max_blocks_z: 4,
            pick_area: [-0.55, 0.3, -0.15, 0.7],
            drop_area: [0.15, 0.3, 0.55, 0.7],
            pick_height: 0.08,
            cup_radius: 0.04,
            cup_height: 0.1,
            hover: 0.06,
            floor_area: [-0.7, 0.1, 0.7, 0.9],
            spacing: 0.005,
            noise: 0.002,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub seed: u64,
    pub blocks_y: usize,
    pub blocks_z: usize,
    pub blocks: Vec<Aabb>,
    /// Union of the blocks.
    pub wall: Aabb,
    pub pick: Vec3,
    /// End-effector target above the cup.
    pub drop: Vec3,
    pub cup_base: Vec3,
    pub cloud: PointCloud,
}

/// Thin slab under z = 0 so nothing plans through the table.
pub fn floor_slab() -> Aabb {
    Aabb::new(Vec3::new(-5.0, -5.0, -0.1), Vec3::new(5.0, 5.0, 0.0))
}

impl Scene {
    /// Ground-truth collision geometry: the blocks and the floor.
    pub fn obstacles(&self) -> ObstacleSet {
        let mut boxes = self.blocks.clone();
        boxes.push(floor_slab());
        ObstacleSet::new(boxes)
    }
}

fn grid(a: f64, b: f64, spacing: f64) -> impl Iterator<Item = f64> {
    let n = ((b - a) / spacing).round().max(1.0) as usize;
    (0..=n).map(move |k| a + (b - a) * k as f64 / n as f64)
}

/// Points on the six faces of a box.
pub fn box_surface(b: &Aabb, spacing: f64) -> Vec<Vec3> {
    let mut out = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [b.min[axis], b.max[axis]] {
            for a in grid(b.min[u], b.max[u], spacing) {
                for c in grid(b.min[v], b.max[v], spacing) {
                    let mut p = Vec3::zeros();
                    p[axis] = side;
                    p[u] = a;
                    p[v] = c;
                    out.push(p);
                }
            }
        }
    }
    out
}

fn cup_surface(base: &Vec3, radius: f64, height: f64, spacing: f64) -> Vec<Vec3> {
    let around = ((std::f64::consts::TAU * radius / spacing).ceil() as usize).max(8);
    let mut out = Vec::new();
    for z in grid(0.0, height, spacing) {
        for k in 0..around {
            let a = std::f64::consts::TAU * k as f64 / around as f64;
            out.push(base + Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    out
}

fn uniform_in(rng: &mut ChaCha8Rng, area: &[f64; 4]) -> (f64, f64) {
    (rng.random_range(area[0]..=area[2]), rng.random_range(area[1]..=area[3]))
}

pub fn generate(seed: u64, cfg: &SceneConfig) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks_y = rng.random_range(1..=cfg.max_blocks_y);
    let blocks_z = rng.random_range(1..=cfg.max_blocks_z);
    let [bx, by, bz] = cfg.block;
    let y0 = cfg.wall_center_y - 0.5 * by * blocks_y as f64;
    let mut blocks = Vec::with_capacity(blocks_y * blocks_z);
    for j in 0..blocks_y {
        for k in 0..blocks_z {
            let min = Vec3::new(-0.5 * bx, y0 + by * j as f64, bz * k as f64);
            blocks.push(Aabb::new(min, min + Vec3::new(bx, by, bz)));
        }
    }
    let wall = blocks.iter().skip(1).fold(blocks[0], |a, b| a.union(b));
    let (px, py) = uniform_in(&mut rng, &cfg.pick_area);
    let (dx, dy) = uniform_in(&mut rng, &cfg.drop_area);
    let pick = Vec3::new(px, py, cfg.pick_height);
    let cup_base = Vec3::new(dx, dy, 0.0);
    let drop = Vec3::new(dx, dy, cfg.cup_height + cfg.hover);

    let mut points = box_surface(&wall, cfg.spacing);
    points.extend(cup_surface(&cup_base, cfg.cup_radius, cfg.cup_height, cfg.spacing));
    let [fx0, fy0, fx1, fy1] = cfg.floor_area;
    for x in grid(fx0, fx1, 2.0 * cfg.spacing) {
        for y in grid(fy0, fy1, 2.0 * cfg.spacing) {
            points.push(Vec3::new(x, y, 0.0));
        }
    }
    if cfg.noise > 0.0 {
        let normal = Normal::new(0.0, cfg.noise).expect("finite noise");
        for p in &mut points {
            *p += Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Scene { seed, blocks_y, blocks_z, blocks, wall, pick, drop, cup_base, cloud: PointCloud::new(points) }
}
