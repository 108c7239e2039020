//! Online planning: learned primitives with collision checking and a
//! sampling fallback, plus the linear and RRT-Connect baselines.

pub mod bench;
pub mod exec;
pub mod rrt;
pub mod scene;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::{ModelConfig, ModelFamily};
use crate::dmp::{rotate_forcing, Dmp, DmpConfig, DmpError};
use crate::geometry::{Frame, GeometryError, Trajectory, Vec3};
use crate::mlp::{MlpError, MlpModel};
use crate::perception::{Aabb, Candidate, Mode};

pub use exec::{PathKind, TimeLaw};
pub use rrt::{plan_rrt_connect, RrtConfig};

/// Largest gap between consecutive collision-check points.
pub const CHECK_SPACING: f64 = 0.005;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no learned candidate is collision-free: {}", fmt_diags(.0))]
    NnFailed(Vec<CandidateDiagnostic>),
    #[error("no linear candidate is collision-free: {}", fmt_diags(.0))]
    LinearFailed(Vec<CandidateDiagnostic>),
    #[error("RRT-Connect found no path within {samples} samples")]
    RrtFailed { samples: usize },
    #[error("{0} position is in collision")]
    EndpointCollision(&'static str),
    #[error("learned planner failed ({nn}); fallback failed ({rrt})")]
    BothFailed { nn: Box<PlanError>, rrt: Box<PlanError> },
    #[error("the linear baseline needs 3P-2D task parameters, got {0}")]
    Family(ModelFamily),
    #[error(transparent)]
    Dmp(#[from] DmpError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn fmt_diags(d: &[CandidateDiagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = PlanError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDiagnostic {
    pub mode: Mode,
    pub params: Vec<f64>,
    pub length: Option<f64>,
    /// First colliding sample and obstacle index, if any.
    pub collision: Option<(usize, usize)>,
    pub error: Option<String>,
}

impl fmt::Display for CandidateDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?}", self.mode, self.params)?;
        if let Some((i, k)) = self.collision {
            write!(f, " hits obstacle {k} at sample {i}")?;
        }
        if let Some(e) = &self.error {
            write!(f, " {e}")?;
        }
        Ok(())
    }
}

/// Obstacle boxes; touching counts as collision.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSet {
    pub boxes: Vec<Aabb>,
}

impl ObstacleSet {
    pub fn new(boxes: Vec<Aabb>) -> Self {
        ObstacleSet { boxes }
    }

    /// Index of the first box hit by the end-effector box at `p`.
    pub fn hit(&self, p: &Vec3, w: &Vec3) -> Option<usize> {
        let ee = Aabb::centered(*p, *w);
        self.boxes.iter().position(|b| b.intersects(&ee))
    }

    pub fn segment_free(&self, a: &Vec3, b: &Vec3, w: &Vec3) -> bool {
        let n = ((b - a).norm() / CHECK_SPACING).ceil().max(1.0) as usize;
        (0..=n).all(|k| self.hit(&(a + (b - a) * (k as f64 / n as f64)), w).is_none())
    }

    /// First (sample, obstacle) in collision along a path, checking the
    /// segments between samples as well.
    pub fn first_collision(&self, path: &[Vec3], w: &Vec3) -> Option<(usize, usize)> {
        if let Some(p) = path.first() {
            if let Some(k) = self.hit(p, w) {
                return Some((0, k));
            }
        }
        for (i, seg) in path.windows(2).enumerate() {
            let n = ((seg[1] - seg[0]).norm() / CHECK_SPACING).ceil().max(1.0) as usize;
            for s in 1..=n {
                let p = seg[0] + (seg[1] - seg[0]) * (s as f64 / n as f64);
                if let Some(k) = self.hit(&p, w) {
                    return Some((i + 1, k));
                }
            }
        }
        None
    }

    pub fn path_free(&self, path: &[Vec3], w: &Vec3) -> bool {
        self.first_collision(path, w).is_none()
    }
}

pub fn collision_free(traj: &Trajectory, obstacles: &ObstacleSet, w: &Vec3) -> bool {
    obstacles.path_free(&traj.points3(), w)
}

pub fn path_length(path: &[Vec3]) -> f64 {
    path.windows(2).map(|s| (s[1] - s[0]).norm()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanMode {
    Nn(Mode),
    Linear,
    Rrt,
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanMode::Nn(m) => write!(f, "nn-{m}"),
            PlanMode::Linear => f.write_str("linear"),
            PlanMode::Rrt => f.write_str("rrt"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanResult {
    pub mode: PlanMode,
    pub kind: PathKind,
    /// Geometric path in world coordinates.
    pub path: Vec<Vec3>,
    pub planning_time: f64,
    pub detection_time: f64,
    pub path_length: f64,
    pub exec_time: f64,
    /// Execution proxy with centripetal acceleration also bounded.
    pub exec_time_curved: f64,
    pub jerk: f64,
    pub success: bool,
}

/// Time step for the executed-trajectory samples.
pub const EXEC_DT: f64 = 0.01;

impl PlanResult {
    fn new(mode: PlanMode, kind: PathKind, path: Vec<Vec3>, planning_time: f64, a_max: f64) -> Self {
        let law = TimeLaw::new(kind, &path, a_max);
        PlanResult {
            mode,
            kind,
            path_length: path_length(&path),
            exec_time: law.duration(),
            exec_time_curved: TimeLaw::with_curvature(kind, &path, a_max).duration(),
            jerk: law.jerk(EXEC_DT),
            path,
            planning_time,
            detection_time: 0.0,
            success: true,
        }
    }

    pub fn time_law(&self, a_max: f64) -> TimeLaw {
        TimeLaw::new(self.kind, &self.path, a_max)
    }

    /// Time-parameterized trajectory under the execution proxy.
    pub fn executed(&self, a_max: f64, dt: f64) -> Trajectory {
        self.time_law(a_max).sample(dt)
    }
}

fn check_endpoints(x0: &Vec3, g: &Vec3, obstacles: &ObstacleSet, w: &Vec3) -> Result<()> {
    if obstacles.hit(x0, w).is_some() {
        return Err(PlanError::EndpointCollision("start"));
    }
    if obstacles.hit(g, w).is_some() {
        return Err(PlanError::EndpointCollision("goal"));
    }
    Ok(())
}

/// Picks the shortest successful candidate; ties go to the earlier mode in
/// [`Mode::ALL`].
fn shortest<T>(mut ok: Vec<(Mode, f64, T)>) -> Option<(Mode, f64, T)> {
    ok.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    ok.into_iter().next()
}

/// Learned planner: a trained network and its family.
#[derive(Debug, Clone)]
pub struct NnPlanner {
    pub net: MlpModel,
    pub model: ModelConfig,
    dmp: Dmp,
    pub a_max: f64,
}

impl NnPlanner {
    pub fn new(net: MlpModel, model: ModelConfig) -> Result<Self> {
        net.check_compatible(&model)?;
        let dmp = Dmp::new(DmpConfig::with_basis(model.basis))?;
        Ok(NnPlanner { net, model, dmp, a_max: exec::DEFAULT_A_MAX })
    }

    pub fn family(&self) -> ModelFamily {
        self.model.family
    }

    /// World rollout for one candidate.
    pub fn rollout(&self, frame: &Frame, cand: &Candidate) -> Result<Vec<Vec3>> {
        let weights = self.net.infer(&cand.params)?;
        let turned = rotate_forcing(&weights, cand.mode.beta())?;
        Ok(self.dmp.rollout_in_frame(&turned, frame)?.points3())
    }

    /// Rolls out every candidate and keeps the shortest collision-free one.
    pub fn plan(&self, x0: &Vec3, g: &Vec3, candidates: &[Candidate], obstacles: &ObstacleSet, w: &Vec3) -> Result<PlanResult> {
        let start = Instant::now();
        let frame = Frame::from_endpoints(*x0, *g)?;
        let mut diags = Vec::new();
        let mut ok = Vec::new();
        for cand in candidates {
            let mut diag = CandidateDiagnostic {
                mode: cand.mode,
                params: cand.params.clone(),
                length: None,
                collision: None,
                error: None,
            };
            match self.rollout(&frame, cand) {
                Ok(path) => {
                    let len = path_length(&path);
                    diag.length = Some(len);
                    diag.collision = obstacles.first_collision(&path, w);
                    if diag.collision.is_none() {
                        ok.push((cand.mode, len, path));
                    }
                }
                Err(e) => diag.error = Some(e.to_string()),
            }
            diags.push(diag);
        }
        match shortest(ok) {
            Some((mode, _, path)) => Ok(PlanResult::new(
                PlanMode::Nn(mode),
                PathKind::Smooth,
                path,
                start.elapsed().as_secs_f64(),
                self.a_max,
            )),
            None => Err(PlanError::NnFailed(diags)),
        }
    }
}

/// Three straight segments over the box: up to the clearance at `s2`,
/// across to `s3`, down to the goal. The candidates carry the offsets
/// already, so the clearance is the same `s1 L` the network is asked for,
/// along the mode's avoidance axis; without an obstacle the path is the
/// chord.
pub fn plan_linear(
    x0: &Vec3,
    g: &Vec3,
    candidates: &[Candidate],
    obstacles: &ObstacleSet,
    w: &Vec3,
    a_max: f64,
) -> Result<PlanResult> {
    let start = Instant::now();
    check_endpoints(x0, g, obstacles, w)?;
    let frame = Frame::from_endpoints(*x0, *g)?;
    let mut diags = Vec::new();
    let mut ok = Vec::new();
    for cand in candidates {
        if cand.params.len() != 3 {
            return Err(PlanError::Family(ModelFamily::ThreeParam2d));
        }
        let [s1, s2, s3] = [cand.params[0], cand.params[1], cand.params[2]];
        let path = if s1 <= 0.0 {
            vec![*x0, *g]
        } else {
            let l = frame.length;
            let axis = match cand.mode {
                Mode::Up => frame.e3,
                Mode::Right => frame.e2,
                Mode::Left => -frame.e2,
            };
            let lift = axis * (s1 * l);
            vec![*x0, frame.point_to_world(&Vec3::new(s2 * l, 0.0, 0.0)) + lift, frame.point_to_world(&Vec3::new(s3 * l, 0.0, 0.0)) + lift, *g]
        };
        let collision = obstacles.first_collision(&path, w);
        let len = path_length(&path);
        if collision.is_none() {
            ok.push((cand.mode, len, path));
        }
        diags.push(CandidateDiagnostic { mode: cand.mode, params: cand.params.clone(), length: Some(len), collision, error: None });
    }
    match shortest(ok) {
        Some((_, _, path)) => {
            Ok(PlanResult::new(PlanMode::Linear, PathKind::Polyline, path, start.elapsed().as_secs_f64(), a_max))
        }
        None => Err(PlanError::LinearFailed(diags)),
    }
}

/// Learned planner first, RRT-Connect if every candidate collides. The
/// reported planning time includes the failed attempt.
pub fn plan_with_fallback(
    nn: &NnPlanner,
    x0: &Vec3,
    g: &Vec3,
    candidates: &[Candidate],
    obstacles: &ObstacleSet,
    w: &Vec3,
    rrt: &RrtConfig,
) -> Result<PlanResult> {
    let start = Instant::now();
    match nn.plan(x0, g, candidates, obstacles, w) {
        Ok(r) => Ok(r),
        Err(nn_err @ PlanError::NnFailed(_)) => {
            let nn_time = start.elapsed().as_secs_f64();
            match plan_rrt_connect(x0, g, obstacles, w, rrt) {
                Ok(mut r) => {
                    r.planning_time += nn_time;
                    Ok(r)
                }
                Err(rrt_err) => Err(PlanError::BothFailed { nn: Box::new(nn_err), rrt: Box::new(rrt_err) }),
            }
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::derive_task_params;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn collision_cases() {
        let obs = ObstacleSet::new(vec![Aabb::new(v(0.4, -0.1, 0.0), v(0.6, 0.1, 0.3))]);
        let w = v(0.02, 0.02, 0.02);
        let line = [v(0.0, 0.0, 0.1), v(1.0, 0.0, 0.1)];
        assert!(!obs.path_free(&line, &w));
        let above = [v(0.0, 0.0, 0.32), v(1.0, 0.0, 0.32)];
        assert!(obs.path_free(&above, &w));
        // The end-effector's bottom face exactly on the box top.
        let graze = [v(0.0, 0.0, 0.31), v(1.0, 0.0, 0.31)];
        assert!(!obs.path_free(&graze, &w));
        // Sparse samples on both sides of a thin wall still collide.
        let thin = ObstacleSet::new(vec![Aabb::new(v(0.5, -1.0, -1.0), v(0.501, 1.0, 1.0))]);
        assert!(!thin.path_free(&[v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0)], &Vec3::zeros()));
        let traj = Trajectory::from_points(&[above[0], v(0.5, 0.0, 0.32), above[1]], 1.0).unwrap();
        assert!(collision_free(&traj, &obs, &w));
    }

    #[test]
    fn linear_path_geometry() {
        let frame = Frame::from_endpoints(Vec3::zeros(), Vec3::x()).unwrap();
        let bx = Aabb::new(v(0.4, -0.1, -0.1), v(0.6, 0.1, 0.3));
        let obs = ObstacleSet::new(vec![bx]);
        let w = Vec3::zeros();
        let cands = derive_task_params(ModelFamily::ThreeParam2d, Some(&bx), &frame, &w, 0.02).unwrap();
        let r = plan_linear(&Vec3::zeros(), &Vec3::x(), &cands, &obs, &w, 2.0).unwrap();
        // Up: clearance 0.32 over [0.38, 0.62]; right: 0.12 over the same window.
        let right = 2.0 * (0.38f64.powi(2) + 0.12f64.powi(2)).sqrt() + 0.24;
        assert!((r.path_length - right).abs() < 1e-12, "{}", r.path_length);
        let straight = derive_task_params(ModelFamily::ThreeParam2d, None, &frame, &w, 0.0).unwrap();
        let r = plan_linear(&Vec3::zeros(), &Vec3::x(), &straight, &ObstacleSet::default(), &w, 2.0).unwrap();
        assert_eq!(r.path.len(), 2);
        assert!((r.path_length - 1.0).abs() < 1e-12);
        // Clearance below the top fails.
        let low = vec![Candidate { mode: Mode::Up, preliminary: vec![0.1, 0.4, 0.6], params: vec![0.1, 0.4, 0.6] }];
        assert!(matches!(
            plan_linear(&Vec3::zeros(), &Vec3::x(), &low, &obs, &w, 2.0),
            Err(PlanError::LinearFailed(_))
        ));
    }

    #[test]
    fn nn_planner_prefers_shortest_and_reports_failure() {
        let model = ModelConfig::by_name("3P-2D").unwrap();
        let net = MlpModel::for_model(&model, 0).unwrap();
        let nn = NnPlanner::new(net, model).unwrap();
        let x0 = Vec3::zeros();
        let g = v(0.8, 0.0, 0.0);
        let frame = Frame::from_endpoints(x0, g).unwrap();
        let w = v(0.02, 0.02, 0.02);
        let cands = derive_task_params(ModelFamily::ThreeParam2d, None, &frame, &w, 0.0).unwrap();
        let r = nn.plan(&x0, &g, &cands, &ObstacleSet::default(), &w).unwrap();
        let lengths: Vec<f64> = cands.iter().map(|c| path_length(&nn.rollout(&frame, c).unwrap())).collect();
        let best = lengths.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(r.path_length, best);
        let wall = ObstacleSet::new(vec![Aabb::new(v(0.3, -5.0, -5.0), v(0.5, 5.0, 5.0))]);
        assert!(matches!(nn.plan(&x0, &g, &cands, &wall, &w), Err(PlanError::NnFailed(d)) if d.len() == 3));
        let tight = RrtConfig { max_samples: 200, ..RrtConfig::default() };
        assert!(matches!(
            plan_with_fallback(&nn, &x0, &g, &cands, &wall, &w, &tight),
            Err(PlanError::BothFailed { .. })
        ));
    }

    #[test]
    fn tie_break_order() {
        let picked = shortest(vec![(Mode::Left, 1.0, ()), (Mode::Right, 1.0, ()), (Mode::Up, 1.0, ())]).unwrap();
        assert_eq!(picked.0, Mode::Up);
        let picked = shortest(vec![(Mode::Left, 0.9, ()), (Mode::Up, 1.0, ())]).unwrap();
        assert_eq!(picked.0, Mode::Left);
    }
}
