//! Point cloud to goal, obstacle box and candidate task parameters.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::ModelFamily;
use crate::geometry::{Frame, GeometryError, Vec3};
use crate::mlp::{apply_offsets, MlpError};

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("voxel size must be positive, got {0}")]
    Voxel(f64),
    #[error("no cluster matches the goal footprint")]
    NoGoal,
    #[error("{} clusters match the goal footprint: {}", .0.len(), fmt_candidates(.0))]
    AmbiguousGoal(Vec<[f64; 3]>),
    #[error("obstacle box contains the {0} position")]
    Infeasible(&'static str),
    #[error("{0} has no perception parameterization")]
    Family(ModelFamily),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("binary point cloud files are not supported (DATA {0})")]
    Binary(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

fn fmt_candidates(c: &[[f64; 3]]) -> String {
    c.iter().map(|p| format!("({:.3}, {:.3}, {:.3})", p[0], p[1], p[2])).collect::<Vec<_>>().join(", ")
}

pub type Result<T, E = PerceptionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn filtered(&self, keep: impl Fn(&Vec3) -> bool) -> PointCloud {
        PointCloud { points: self.points.iter().copied().filter(|p| keep(p)).collect() }
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::around(&self.points)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,z")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.x, p.y, p.z)?;
        }
        Ok(())
    }
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn around(points: &[Vec3]) -> Option<Aabb> {
        let first = *points.first()?;
        Some(points.iter().fold(Aabb::new(first, first), |b, p| Aabb::new(b.min.inf(p), b.max.sup(p))))
    }

    pub fn centered(center: Vec3, extents: Vec3) -> Self {
        Aabb::new(center - extents / 2.0, center + extents / 2.0)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Touching faces count as intersecting.
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb::new(self.min.inf(&other.min), self.max.sup(&other.max))
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) / 2.0
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    /// Box of the eight corners expressed in `frame` coordinates.
    pub fn to_local(&self, frame: &Frame) -> Aabb {
        let corners: Vec<Vec3> = (0..8)
            .map(|c| {
                let pick = |k: usize| if c >> k & 1 == 0 { self.min[k] } else { self.max[k] };
                frame.point_to_local(&Vec3::new(pick(0), pick(1), pick(2)))
            })
            .collect();
        Aabb::around(&corners).expect("eight corners")
    }
}

/// One point per occupied voxel at the centroid of its members, ordered by
/// voxel index.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> Result<PointCloud> {
    if !(voxel > 0.0 && voxel.is_finite()) {
        return Err(PerceptionError::Voxel(voxel));
    }
    let mut cells: BTreeMap<[i64; 3], (Vec3, usize)> = BTreeMap::new();
    for p in &cloud.points {
        let key = voxel_key(p, voxel);
        let cell = cells.entry(key).or_insert((Vec3::zeros(), 0));
        cell.0 += p;
        cell.1 += 1;
    }
    Ok(PointCloud { points: cells.into_values().map(|(sum, n)| sum / n as f64).collect() })
}

fn voxel_key(p: &Vec3, voxel: f64) -> [i64; 3] {
    [(p.x / voxel).floor() as i64, (p.y / voxel).floor() as i64, (p.z / voxel).floor() as i64]
}

pub fn remove_floor(cloud: &PointCloud, z_floor: f64) -> PointCloud {
    cloud.filtered(|p| p.z > z_floor)
}

/// Drops points within `radius` of `center`; stands in for removing the
/// robot's own links.
pub fn exclude_sphere(cloud: &PointCloud, center: &Vec3, radius: f64) -> PointCloud {
    cloud.filtered(|p| (p - center).norm() > radius)
}

/// Where obstacles and the goal are expected in the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneRegions {
    /// Obstacle region: closed X interval and Y strictly above `y_min`.
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub z_floor: f64,
    /// Radius of the exclusion sphere around the end-effector.
    pub exclusion_radius: f64,
}

impl Default for SceneRegions {
    fn default() -> Self {
        SceneRegions { x_min: -0.1, x_max: 0.1, y_min: 0.25, z_floor: 0.01, exclusion_radius: 0.08 }
    }
}

impl SceneRegions {
    pub fn in_obstacle_region(&self, p: &Vec3) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y > self.y_min
    }

    fn center_x(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }
}

/// Obstacle points and the points on the far side of the obstacle region
/// from the end-effector.
pub fn split_regions(cloud: &PointCloud, regions: &SceneRegions, ee_pos: &Vec3) -> (PointCloud, PointCloud) {
    let side = (ee_pos.x - regions.center_x()).signum();
    let mut obstacle = Vec::new();
    let mut goal = Vec::new();
    for p in &cloud.points {
        if regions.in_obstacle_region(p) {
            obstacle.push(*p);
        } else if side * (p.x - regions.center_x()) < 0.0 || side == 0.0 {
            goal.push(*p);
        }
    }
    (PointCloud::new(obstacle), PointCloud::new(goal))
}

pub const NOISE: i32 = -1;

/// Density clustering of planar points. A point is core when at least
/// `min_pts` points (itself included) lie within `eps`; clusters grow from
/// unlabeled core points in index order, and border points join the first
/// cluster that reaches them.
pub fn dbscan2d(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = points.len();
    let mut labels = vec![None::<i32>; n];
    if n == 0 {
        return Vec::new();
    }
    let cell = |p: &[f64; 2]| ((p[0] / eps).floor() as i64, (p[1] / eps).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        let p = points[i];
        let (cx, cy) = cell(&p);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(cx + dx, cy + dy)) {
                    out.extend(bucket.iter().copied().filter(|&j| {
                        let q = points[j];
                        (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) <= eps2
                    }));
                }
            }
        }
        out.sort_unstable();
        out
    };
    let mut next = 0;
    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        let seeds = neighbors(i);
        if seeds.len() < min_pts {
            labels[i] = Some(NOISE);
            continue;
        }
        let id = next;
        next += 1;
        labels[i] = Some(id);
        let mut queue: VecDeque<usize> = seeds.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                Some(NOISE) => labels[j] = Some(id),
                None => {
                    labels[j] = Some(id);
                    let nb = neighbors(j);
                    if nb.len() >= min_pts {
                        queue.extend(nb.into_iter().filter(|&k| matches!(labels[k], None | Some(NOISE))));
                    }
                }
                Some(_) => {}
            }
        }
    }
    labels.into_iter().map(|l| l.unwrap_or(NOISE)).collect()
}

/// XY centroid and top of the single cluster whose footprint matches
/// `goal_dims_xy` (either orientation) within `tol`.
pub fn match_goal(points: &[Vec3], labels: &[i32], goal_dims_xy: [f64; 2], tol: f64) -> Result<Vec3> {
    let mut clusters: BTreeMap<i32, Vec<Vec3>> = BTreeMap::new();
    for (p, &l) in points.iter().zip(labels) {
        if l != NOISE {
            clusters.entry(l).or_default().push(*p);
        }
    }
    let [dx, dy] = goal_dims_xy;
    let fits = |a: f64, b: f64| (a - dx).abs() <= tol && (b - dy).abs() <= tol;
    let matches: Vec<[f64; 3]> = clusters
        .values()
        .filter_map(|pts| {
            let b = Aabb::around(pts)?;
            let e = b.extents();
            if !(fits(e.x, e.y) || fits(e.y, e.x)) {
                return None;
            }
            let c = pts.iter().sum::<Vec3>() / pts.len() as f64;
            Some([c.x, c.y, b.max.z])
        })
        .collect();
    match matches.len() {
        0 => Err(PerceptionError::NoGoal),
        1 => Ok(Vec3::new(matches[0][0], matches[0][1], matches[0][2])),
        _ => Err(PerceptionError::AmbiguousGoal(matches)),
    }
}

/// Direction in which the planar policy is turned to pass the obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Up,
    Right,
    Left,
}

impl Mode {
    /// Preference order for equal path lengths.
    pub const ALL: [Mode; 3] = [Mode::Up, Mode::Right, Mode::Left];

    /// Rotation about e1 taking the trained e2 avoidance to this side:
    /// up is e3, right is +e2, left is −e2.
    pub fn beta(self) -> f64 {
        match self {
            Mode::Up => std::f64::consts::FRAC_PI_2,
            Mode::Right => 0.0,
            Mode::Left => std::f64::consts::PI,
        }
    }

    /// Frame axis the avoidance happens along and its sign.
    fn axis(self) -> (usize, f64) {
        match self {
            Mode::Up => (2, 1.0),
            Mode::Right => (1, 1.0),
            Mode::Left => (1, -1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Up => "up",
            Mode::Right => "right",
            Mode::Left => "left",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub mode: Mode,
    /// Preliminary parameters straight from the box.
    pub preliminary: Vec<f64>,
    /// After offsets and end-effector size.
    pub params: Vec<f64>,
}

/// End-effector box extents along e1, the avoidance axis and the remaining
/// axis of `mode`.
pub fn projected_extents(frame: &Frame, w: &Vec3, mode: Mode) -> [f64; 3] {
    let axes = frame.axes();
    let ext = |a: &Vec3| a.x.abs() * w.x + a.y.abs() * w.y + a.z.abs() * w.z;
    let (k, _) = mode.axis();
    [ext(&axes[0]), ext(&axes[k]), ext(&axes[3 - k])]
}

/// Multi-modal task parameters for a box.
pub fn derive_task_params(
    family: ModelFamily,
    obstacle: Option<&Aabb>,
    frame: &Frame,
    w: &Vec3,
    o: f64,
) -> Result<Vec<Candidate>> {
    if !matches!(family, ModelFamily::OneParam2d | ModelFamily::TwoParam2d | ModelFamily::ThreeParam2d) {
        return Err(PerceptionError::Family(family));
    }
    let l = frame.length;
    let Some(world_box) = obstacle else {
        return Ok(Mode::ALL
            .iter()
            .map(|&mode| {
                let s = straight_params(family);
                Candidate { mode, preliminary: s.clone(), params: s }
            })
            .collect());
    };
    let local = world_box.to_local(frame);
    let b = Aabb::new(local.min / l, local.max / l);
    if b.contains(&Vec3::zeros()) {
        return Err(PerceptionError::Infeasible("start"));
    }
    if b.contains(&Vec3::x()) {
        return Err(PerceptionError::Infeasible("goal"));
    }
    let s2 = b.min.x.clamp(0.0, 1.0);
    let s3 = b.max.x.clamp(0.0, 1.0);
    Mode::ALL
        .iter()
        .map(|&mode| {
            let (k, sign) = mode.axis();
            let reach = if sign > 0.0 { b.max[k] } else { -b.min[k] }.max(0.0);
            let preliminary = match family {
                // Radius about the chord midpoint that clears the far corners.
                ModelFamily::OneParam2d => {
                    vec![[s2, s3].iter().map(|x| ((x - 0.5).powi(2) + reach * reach).sqrt()).fold(0.0, f64::max)]
                }
                ModelFamily::TwoParam2d => vec![reach, s2],
                _ => vec![reach, s2, s3],
            };
            let params = apply_offsets(family, &preliminary, o, projected_extents(frame, w, mode), l)?;
            Ok(Candidate { mode, preliminary, params })
        })
        .collect()
}

fn straight_params(family: ModelFamily) -> Vec<f64> {
    match family {
        ModelFamily::OneParam2d => vec![0.0],
        ModelFamily::TwoParam2d => vec![0.0, 0.5],
        _ => vec![0.0, 0.5, 0.5],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub voxel: f64,
    pub eps: f64,
    pub min_pts: usize,
    pub goal_dims_xy: [f64; 2],
    pub goal_tol: f64,
    pub regions: SceneRegions,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            voxel: 0.01,
            eps: 0.02,
            min_pts: 10,
            goal_dims_xy: [0.08, 0.08],
            goal_tol: 0.02,
            regions: SceneRegions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Detection {
    pub goal: Vec3,
    pub obstacle: Option<Aabb>,
    pub candidates: Vec<Candidate>,
    /// Stage name and wall time in seconds.
    pub timings: Vec<(String, f64)>,
    pub total: f64,
}

impl Detection {
    pub fn candidate(&self, mode: Mode) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.mode == mode)
    }

    /// `key=value` lines.
    pub fn write_report<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "goal={},{},{}", self.goal.x, self.goal.y, self.goal.z)?;
        match &self.obstacle {
            Some(b) => {
                writeln!(w, "obstacle_min={},{},{}", b.min.x, b.min.y, b.min.z)?;
                writeln!(w, "obstacle_max={},{},{}", b.max.x, b.max.y, b.max.z)?;
            }
            None => writeln!(w, "obstacle=none")?,
        }
        for c in &self.candidates {
            let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
            writeln!(w, "preliminary_{}={}", c.mode, join(&c.preliminary))?;
            writeln!(w, "params_{}={}", c.mode, join(&c.params))?;
        }
        for (stage, t) in &self.timings {
            writeln!(w, "time_{stage}={t}")?;
        }
        writeln!(w, "time_total={}", self.total)
    }
}

/// Full detection pipeline from a raw cloud and the current end-effector
/// position.
pub fn detect(
    cloud: &PointCloud,
    ee_pos: &Vec3,
    family: ModelFamily,
    w: &Vec3,
    o: f64,
    cfg: &DetectConfig,
) -> Result<Detection> {
    let start = Instant::now();
    let mut timings = Vec::new();
    let mut stage = |name: &str, since: Instant| timings.push((name.to_string(), since.elapsed().as_secs_f64()));

    let t = Instant::now();
    let down = voxel_downsample(cloud, cfg.voxel)?;
    stage("downsample", t);

    let t = Instant::now();
    let kept = exclude_sphere(&remove_floor(&down, cfg.regions.z_floor), ee_pos, cfg.regions.exclusion_radius);
    let (obstacle_pts, goal_pts) = split_regions(&kept, &cfg.regions, ee_pos);
    stage("filter", t);

    let t = Instant::now();
    let xy: Vec<[f64; 2]> = goal_pts.points.iter().map(|p| [p.x, p.y]).collect();
    let labels = dbscan2d(&xy, cfg.eps, cfg.min_pts);
    stage("cluster", t);

    let t = Instant::now();
    let goal = match_goal(&goal_pts.points, &labels, cfg.goal_dims_xy, cfg.goal_tol)?;
    stage("goal", t);

    let t = Instant::now();
    // Voxel centroids sit up to half a voxel inside the true surface.
    let pad = Vec3::repeat(0.5 * cfg.voxel);
    let obstacle = obstacle_pts.bounds().map(|b| Aabb::new(b.min - pad, b.max + pad));
    let frame = Frame::from_endpoints(*ee_pos, goal)?;
    let candidates = derive_task_params(family, obstacle.as_ref(), &frame, w, o)?;
    stage("params", t);

    Ok(Detection { goal, obstacle, candidates, timings, total: start.elapsed().as_secs_f64() })
}

/// Reads an `x,y,z` CSV or an ASCII point cloud (`.pcd`) file.
pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    let io = |source| PerceptionError::Io { path: path.display().to_string(), source };
    let file = std::fs::File::open(path).map_err(io)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pcd")) {
        read_pcd(file)
    } else {
        read_xyz_csv(file)
    }
}

pub fn read_xyz_csv<R: Read>(reader: R) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| PerceptionError::Parse { line: i + 1, msg: e.to_string() })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if i == 0 {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["x", "y", "z"] {
                return Err(PerceptionError::Parse { line: 1, msg: format!("expected header x,y,z, got {line}") });
            }
            continue;
        }
        points.push(parse_xyz(line.split(','), i + 1)?);
    }
    Ok(PointCloud { points })
}

fn parse_xyz<'a>(fields: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec3> {
    let vals: Vec<&str> = fields.collect();
    if vals.len() < 3 {
        return Err(PerceptionError::Parse { line, msg: format!("expected 3 values, got {}", vals.len()) });
    }
    let mut v = [0.0; 3];
    for (k, s) in vals.iter().take(3).enumerate() {
        v[k] = s
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| PerceptionError::Parse { line, msg: format!("bad coordinate {s:?}") })?;
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

/// ASCII PCD: header through `DATA ascii`, then one point per line with
/// columns in `FIELDS` order.
pub fn read_pcd<R: Read>(reader: R) -> Result<PointCloud> {
    let mut fields: Vec<String> = Vec::new();
    let mut in_data = false;
    let mut cols = [0usize; 3];
    let mut points = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| PerceptionError::Parse { line: i + 1, msg: e.to_string() })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if in_data {
            let vals: Vec<&str> = line.split_whitespace().collect();
            points.push(parse_xyz(cols.iter().map(|&c| vals.get(c).copied().unwrap_or("")), i + 1)?);
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("FIELDS") => fields = parts.map(str::to_string).collect(),
            Some("DATA") => {
                let kind = parts.next().unwrap_or("").to_string();
                if kind != "ascii" {
                    return Err(PerceptionError::Binary(kind));
                }
                for (k, name) in ["x", "y", "z"].iter().enumerate() {
                    cols[k] = fields.iter().position(|f| f == name).ok_or_else(|| PerceptionError::Parse {
                        line: i + 1,
                        msg: format!("FIELDS lacks {name}"),
                    })?;
                }
                in_data = true;
            }
            _ => {}
        }
    }
    Ok(PointCloud { points })
}
