//! Bidirectional RRT in the 3-D workspace with shortcut smoothing.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_endpoints, exec, ObstacleSet, PathKind, PlanError, PlanMode, PlanResult, Result};
use crate::geometry::Vec3;
use crate::perception::Aabb;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrtConfig {
    /// Extension step in meters.
    pub step: f64,
    pub max_samples: usize,
    /// Random shortcut attempts after a path is found.
    pub shortcut_attempts: usize,
    pub bounds: Aabb,
    pub seed: u64,
    pub a_max: f64,
}

impl Default for RrtConfig {
    fn default() -> Self {
        RrtConfig {
            step: 0.05,
            max_samples: 50_000,
            shortcut_attempts: 50,
            bounds: Aabb::new(Vec3::new(-0.9, -0.1, 0.0), Vec3::new(0.9, 1.1, 1.0)),
            seed: 0,
            a_max: exec::DEFAULT_A_MAX,
        }
    }
}

struct Tree {
    nodes: Vec<Vec3>,
    parent: Vec<usize>,
}

enum Extend {
    Trapped,
    Advanced(usize),
    Reached(usize),
}

impl Tree {
    fn new(root: Vec3) -> Self {
        Tree { nodes: vec![root], parent: vec![0] }
    }

    fn nearest(&self, q: &Vec3) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n - q).norm_squared();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    fn extend(&mut self, q: &Vec3, step: f64, obstacles: &ObstacleSet, w: &Vec3) -> Extend {
        let near = self.nearest(q);
        let from = self.nodes[near];
        let delta = q - from;
        let dist = delta.norm();
        let (to, reached) = if dist <= step { (*q, true) } else { (from + delta * (step / dist), false) };
        if !obstacles.segment_free(&from, &to, w) {
            return Extend::Trapped;
        }
        self.nodes.push(to);
        self.parent.push(near);
        let id = self.nodes.len() - 1;
        if reached {
            Extend::Reached(id)
        } else {
            Extend::Advanced(id)
        }
    }

    fn connect(&mut self, q: &Vec3, step: f64, obstacles: &ObstacleSet, w: &Vec3) -> Extend {
        loop {
            match self.extend(q, step, obstacles, w) {
                Extend::Advanced(_) => continue,
                other => return other,
            }
        }
    }

    /// Root-to-node path.
    fn branch(&self, mut id: usize) -> Vec<Vec3> {
        let mut out = vec![self.nodes[id]];
        while id != 0 {
            id = self.parent[id];
            out.push(self.nodes[id]);
        }
        out.reverse();
        out
    }
}

fn sample(rng: &mut ChaCha8Rng, b: &Aabb) -> Vec3 {
    Vec3::new(
        rng.random_range(b.min.x..=b.max.x),
        rng.random_range(b.min.y..=b.max.y),
        rng.random_range(b.min.z..=b.max.z),
    )
}

/// Repeatedly replaces the stretch between two random path points by a
/// straight segment when that segment is free.
pub fn shortcut(path: &[Vec3], obstacles: &ObstacleSet, w: &Vec3, attempts: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let mut path = path.to_vec();
    for _ in 0..attempts {
        if path.len() < 3 {
            break;
        }
        let i = rng.random_range(0..path.len() - 2);
        let j = rng.random_range(i + 2..path.len());
        if obstacles.segment_free(&path[i], &path[j], w) {
            path.drain(i + 1..j);
        }
    }
    path
}

/// Returns a shortcut-smoothed polyline timed with minimum-jerk segments.
pub fn plan_rrt_connect(x0: &Vec3, g: &Vec3, obstacles: &ObstacleSet, w: &Vec3, cfg: &RrtConfig) -> Result<PlanResult> {
    let start = Instant::now();
    check_endpoints(x0, g, obstacles, w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let raw = if obstacles.segment_free(x0, g, w) {
        vec![*x0, *g]
    } else {
        search(x0, g, obstacles, w, cfg, &mut rng)?
    };
    let path = shortcut(&raw, obstacles, w, cfg.shortcut_attempts, &mut rng);
    Ok(PlanResult::new(PlanMode::Rrt, PathKind::Polyline, path, start.elapsed().as_secs_f64(), cfg.a_max))
}

fn search(x0: &Vec3, g: &Vec3, obstacles: &ObstacleSet, w: &Vec3, cfg: &RrtConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec3>> {
    let mut a = Tree::new(*x0);
    let mut b = Tree::new(*g);
    // `a` is the start tree when false.
    let mut swapped = false;
    for _ in 0..cfg.max_samples {
        let q = sample(rng, &cfg.bounds);
        let new = match a.extend(&q, cfg.step, obstacles, w) {
            Extend::Trapped => None,
            Extend::Advanced(id) | Extend::Reached(id) => Some(id),
        };
        if let Some(id) = new {
            let target = a.nodes[id];
            if let Extend::Reached(other) = b.connect(&target, cfg.step, obstacles, w) {
                let mut left = a.branch(id);
                let mut right = b.branch(other);
                right.reverse();
                right.remove(0);
                left.extend(right);
                if swapped {
                    left.reverse();
                }
                return Ok(left);
            }
        }
        std::mem::swap(&mut a, &mut b);
        swapped = !swapped;
    }
    Err(PlanError::RrtFailed { samples: cfg.max_samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn gap_wall() -> ObstacleSet {
        // Wall at x ∈ [-0.02, 0.02] with a 0.12 m square window around (y, z) = (0.5, 0.4).
        let (lo, hi) = (v(-0.9, -0.1, 0.0), v(0.9, 1.1, 1.0));
        ObstacleSet::new(vec![
            Aabb::new(v(-0.02, lo.y, lo.z), v(0.02, 0.44, hi.z)),
            Aabb::new(v(-0.02, 0.56, lo.z), v(0.02, hi.y, hi.z)),
            Aabb::new(v(-0.02, 0.44, lo.z), v(0.02, 0.56, 0.34)),
            Aabb::new(v(-0.02, 0.44, 0.46), v(0.02, 0.56, hi.z)),
        ])
    }

    #[test]
    fn direct_connection_without_obstacles() {
        let r = plan_rrt_connect(&v(-0.4, 0.5, 0.1), &v(0.4, 0.5, 0.2), &ObstacleSet::default(), &v(0.02, 0.02, 0.02), &RrtConfig::default()).unwrap();
        assert_eq!(r.path.len(), 2);
        assert!((r.path_length - (0.8f64.powi(2) + 0.01).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn wall_with_gap() {
        let obs = gap_wall();
        let w = v(0.04, 0.04, 0.04);
        let (x0, g) = (v(-0.4, 0.3, 0.2), v(0.4, 0.7, 0.6));
        let mut ok = 0;
        for seed in 0..100 {
            let cfg = RrtConfig { seed, ..RrtConfig::default() };
            if let Ok(r) = plan_rrt_connect(&x0, &g, &obs, &w, &cfg) {
                assert!(obs.path_free(&r.path, &w));
                assert_eq!(r.path[0], x0);
                assert_eq!(*r.path.last().unwrap(), g);
                ok += 1;
            }
        }
        assert!(ok > 95, "{ok}/100");
    }

    #[test]
    fn fixed_seed_repeats() {
        let obs = gap_wall();
        let w = v(0.04, 0.04, 0.04);
        let cfg = RrtConfig { seed: 9, ..RrtConfig::default() };
        let a = plan_rrt_connect(&v(-0.4, 0.3, 0.2), &v(0.4, 0.7, 0.6), &obs, &w, &cfg).unwrap();
        let b = plan_rrt_connect(&v(-0.4, 0.3, 0.2), &v(0.4, 0.7, 0.6), &obs, &w, &cfg).unwrap();
        assert_eq!(a.path, b.path);
    }

    #[test]
    fn blocked_start() {
        let obs = ObstacleSet::new(vec![Aabb::new(v(-1.0, -1.0, -1.0), v(1.0, 1.0, 1.0))]);
        assert!(matches!(
            plan_rrt_connect(&Vec3::zeros(), &v(2.0, 0.0, 0.0), &obs, &Vec3::zeros(), &RrtConfig::default()),
            Err(PlanError::EndpointCollision("start"))
        ));
    }
}
