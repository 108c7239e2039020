//! Trajectory frames, sampled trajectories and the minimum-jerk demonstration.
//!
//! All planning happens in a frame whose first axis points from the start to
//! the goal. Trajectories are stored as uniformly sampled position rows; their
//! derivatives are recovered with finite differences.

use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Tolerance below which two points are considered coincident.
pub const MIN_SEGMENT: f64 = 1e-6;

/// Default demonstration resolution (intervals).
pub const DEFAULT_STEPS: usize = 150;
/// Default demonstration duration in seconds.
pub const DEFAULT_DURATION: f64 = 3.0;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate frame: {0}")]
    Degenerate(&'static str),
    #[error("trajectory has {len} samples but the order-{order} stencil needs {needed}")]
    TooShort { order: u8, len: usize, needed: usize },
    #[error("unsupported derivative order {0}")]
    Order(u8),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid trajectory: {0}")]
    Invalid(String),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

/// Orthonormal trajectory frame anchored at the start position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub origin: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    pub e3: Vec3,
    /// Start-goal distance `L`.
    pub length: f64,
}

impl Frame {
    /// Builds the frame with e1 toward `goal` and e3 as the part of
    /// `up_hint` orthogonal to e1.
    pub fn new(origin: Vec3, goal: Vec3, up_hint: Vec3) -> Result<Self> {
        let delta = goal - origin;
        let length = delta.norm();
        if !(length > MIN_SEGMENT) {
            return Err(GeometryError::Degenerate("start and goal coincide"));
        }
        let e1 = delta / length;
        let up_norm = up_hint.norm();
        if !(up_norm > 0.0) {
            return Err(GeometryError::Degenerate("zero up hint"));
        }
        let ortho = up_hint - e1 * e1.dot(&up_hint);
        if ortho.norm() <= 1e-9 * up_norm {
            return Err(GeometryError::Degenerate("up hint parallel to start-goal direction"));
        }
        let e3 = ortho.normalize();
        let e2 = e3.cross(&e1);
        Ok(Frame { origin, e1, e2, e3, length })
    }

    /// Frame with world +Z as up hint, falling back to +X when the motion is
    /// within one degree of vertical.
    pub fn from_endpoints(origin: Vec3, goal: Vec3) -> Result<Self> {
        let delta = goal - origin;
        let norm = delta.norm();
        if !(norm > MIN_SEGMENT) {
            return Err(GeometryError::Degenerate("start and goal coincide"));
        }
        let cos = (delta.z / norm).abs();
        let up = if cos > 1f64.to_radians().cos() { Vec3::x() } else { Vec3::z() };
        Frame::new(origin, goal, up)
    }

    /// Frame whose axes are the world axes scaled to `length` (local == world).
    pub fn unit(length: f64) -> Self {
        Frame { origin: Vec3::zeros(), e1: Vec3::x(), e2: Vec3::y(), e3: Vec3::z(), length }
    }

    pub fn goal(&self) -> Vec3 {
        self.origin + self.e1 * self.length
    }

    pub fn axes(&self) -> [Vec3; 3] {
        [self.e1, self.e2, self.e3]
    }

    /// Columns e1, e2, e3.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.e1, self.e2, self.e3])
    }

    pub fn point_to_world(&self, local: &Vec3) -> Vec3 {
        self.origin + self.rotation() * local
    }

    pub fn point_to_local(&self, world: &Vec3) -> Vec3 {
        self.rotation().transpose() * (world - self.origin)
    }

    /// Same frame rigidly moved by `rotation` about the world origin and then
    /// shifted by `shift`.
    pub fn transformed(&self, rotation: &Matrix3<f64>, shift: &Vec3) -> Self {
        Frame {
            origin: rotation * self.origin + shift,
            e1: rotation * self.e1,
            e2: rotation * self.e2,
            e3: rotation * self.e3,
            length: self.length,
        }
    }

    /// Largest deviation of the axis Gram matrix from identity.
    pub fn orthonormality_residual(&self) -> f64 {
        let axes = self.axes();
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((axes[i].dot(&axes[j]) - target).abs());
            }
        }
        worst
    }
}

/// Uniformly sampled position sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    positions: Vec<f64>,
    dim: usize,
    dt: f64,
}

impl Trajectory {
    /// `positions` is row-major, `dim` values per sample.
    pub fn new(positions: Vec<f64>, dim: usize, dt: f64) -> Result<Self> {
        if dim == 0 || positions.len() % dim != 0 {
            return Err(GeometryError::Invalid(format!(
                "{} values do not form rows of dimension {dim}",
                positions.len()
            )));
        }
        if positions.len() / dim < 3 {
            return Err(GeometryError::Invalid("need at least 3 samples".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(GeometryError::Invalid(format!("bad time step {dt}")));
        }
        if let Some(bad) = positions.iter().find(|v| !v.is_finite()) {
            return Err(GeometryError::Invalid(format!("non-finite position {bad}")));
        }
        Ok(Trajectory { positions, dim, dt })
    }

    pub fn from_rows(rows: &[Vec<f64>], dt: f64) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(GeometryError::Invalid("ragged rows".into()));
        }
        Trajectory::new(rows.concat(), dim, dt)
    }

    pub fn from_points(points: &[Vec3], dt: f64) -> Result<Self> {
        let flat = points.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        Trajectory::new(flat, 3, dt)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of samples (`T + 1`).
    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Number of intervals `T`.
    pub fn steps(&self) -> usize {
        self.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Total duration `tau = dt * T`.
    pub fn duration(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coord(&self, i: usize, axis: usize) -> f64 {
        self.positions[i * self.dim + axis]
    }

    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.positions.iter().skip(axis).step_by(self.dim).copied().collect()
    }

    pub fn first(&self) -> &[f64] {
        self.sample(0)
    }

    pub fn last(&self) -> &[f64] {
        self.sample(self.len() - 1)
    }

    /// Sample `i` padded (or truncated) to three coordinates.
    pub fn point3(&self, i: usize) -> Vec3 {
        let s = self.sample(i);
        Vec3::new(s[0], s.get(1).copied().unwrap_or(0.0), s.get(2).copied().unwrap_or(0.0))
    }

    pub fn points3(&self) -> Vec<Vec3> {
        (0..self.len()).map(|i| self.point3(i)).collect()
    }

    /// Copy with `dim` coordinates per sample, zero padded.
    pub fn embed(&self, dim: usize) -> Trajectory {
        let mut out = Vec::with_capacity(self.len() * dim);
        for i in 0..self.len() {
            let s = self.sample(i);
            for k in 0..dim {
                out.push(s.get(k).copied().unwrap_or(0.0));
            }
        }
        Trajectory { positions: out, dim, dt: self.dt }
    }

    /// First `count` samples.
    pub fn truncated(&self, count: usize) -> Trajectory {
        let count = count.clamp(3, self.len());
        Trajectory { positions: self.positions[..count * self.dim].to_vec(), dim: self.dim, dt: self.dt }
    }

    pub fn scaled(&self, factor: f64) -> Trajectory {
        Trajectory {
            positions: self.positions.iter().map(|v| v * factor).collect(),
            dim: self.dim,
            dt: self.dt,
        }
    }

    /// Sum of Euclidean distances between consecutive samples.
    pub fn path_length(&self) -> f64 {
        (1..self.len())
            .map(|i| {
                self.sample(i)
                    .iter()
                    .zip(self.sample(i - 1))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum()
    }

    /// Finite-difference derivative of the given order, same layout as the
    /// positions. Central stencils inside, one-sided stencils at the ends.
    pub fn differentiate(&self, order: u8) -> Result<Vec<f64>> {
        let n = self.len();
        let needed = match order {
            1 => 3,
            2 => 5,
            3 => 6,
            _ => return Err(GeometryError::Order(order)),
        };
        if n < needed {
            return Err(GeometryError::TooShort { order, len: n, needed });
        }
        let h = self.dt;
        let mut out = vec![0.0; self.positions.len()];
        let mut column = vec![0.0; n];
        for k in 0..self.dim {
            for (i, c) in column.iter_mut().enumerate() {
                *c = self.coord(i, k);
            }
            for i in 0..n {
                out[i * self.dim + k] = derivative_at(&column, i, order, h);
            }
        }
        Ok(out)
    }

    /// Embeds local (frame) coordinates into the world.
    pub fn to_world(&self, frame: &Frame) -> Result<Trajectory> {
        if self.dim > 3 {
            return Err(GeometryError::Dimension { expected: 3, got: self.dim });
        }
        let points: Vec<Vec3> = (0..self.len()).map(|i| frame.point_to_world(&self.point3(i))).collect();
        Trajectory::from_points(&points, self.dt)
    }

    /// Expresses a world trajectory in frame coordinates.
    pub fn to_local(&self, frame: &Frame) -> Result<Trajectory> {
        if self.dim != 3 {
            return Err(GeometryError::Dimension { expected: 3, got: self.dim });
        }
        let points: Vec<Vec3> = (0..self.len()).map(|i| frame.point_to_local(&self.point3(i))).collect();
        Trajectory::from_points(&points, self.dt)
    }

    /// Writes `t,x,y,z` rows with 9 significant digits. Missing axes are 0.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "x", "y", "z"])?;
        for i in 0..self.len() {
            let p = self.point3(i);
            let t = self.dt * i as f64;
            w.write_record([sig9(t), sig9(p.x), sig9(p.y), sig9(p.z)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `t,x,y,z` file; the time step is taken from the first two rows.
    pub fn read_csv<R: Read>(reader: R) -> Result<Trajectory> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["t", "x", "y", "z"] {
            return Err(GeometryError::Parse { line: 1, msg: "expected header t,x,y,z".into() });
        }
        let mut times = Vec::new();
        let mut points = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let vals = parse_floats(&record, 4, line)?;
            times.push(vals[0]);
            points.push(Vec3::new(vals[1], vals[2], vals[3]));
        }
        if times.len() < 3 {
            return Err(GeometryError::Parse { line: 1, msg: "need at least 3 samples".into() });
        }
        Trajectory::from_points(&points, times[1] - times[0])
    }
}

pub(crate) fn parse_floats(record: &csv::StringRecord, expected: usize, line: u64) -> Result<Vec<f64>> {
    if record.len() != expected {
        return Err(GeometryError::Parse {
            line,
            msg: format!("expected {expected} fields, found {}", record.len()),
        });
    }
    record
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|e| GeometryError::Parse { line, msg: format!("bad number {f:?}: {e}") })
        })
        .collect()
}

/// Formats with nine significant digits.
pub fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

fn derivative_at(x: &[f64], i: usize, order: u8, h: f64) -> f64 {
    let n = x.len();
    match order {
        1 => {
            if i == 0 {
                (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * h)
            } else {
                (x[i + 1] - x[i - 1]) / (2.0 * h)
            }
        }
        2 => {
            let h2 = h * h;
            if i == 0 {
                forward_second(x, 0, 1.0) / h2
            } else if i == n - 1 {
                forward_second(x, n - 1, -1.0) / h2
            } else {
                (x[i + 1] - 2.0 * x[i] + x[i - 1]) / h2
            }
        }
        _ => {
            let h3 = h * h * h;
            if i < 2 {
                forward_third(x, i, 1.0) / h3
            } else if i + 2 >= n {
                -forward_third(x, i, -1.0) / h3
            } else {
                (x[i + 2] - 2.0 * x[i + 1] + 2.0 * x[i - 1] - x[i - 2]) / (2.0 * h3)
            }
        }
    }
}

/// One-sided second derivative (times h^2), exact for quartics.
fn forward_second(x: &[f64], i: usize, dir: f64) -> f64 {
    let at = |k: usize| {
        if dir > 0.0 {
            x[i + k]
        } else {
            x[i - k]
        }
    };
    (35.0 * at(0) - 104.0 * at(1) + 114.0 * at(2) - 56.0 * at(3) + 11.0 * at(4)) / 12.0
}

/// One-sided third derivative (times h^3) in the direction `dir`, exact for quartics.
fn forward_third(x: &[f64], i: usize, dir: f64) -> f64 {
    let at = |k: usize| {
        if dir > 0.0 {
            x[i + k]
        } else {
            x[i - k]
        }
    };
    (-5.0 * at(0) + 18.0 * at(1) - 24.0 * at(2) + 14.0 * at(3) - 3.0 * at(4)) / 2.0
}

/// Normalized quintic minimum-jerk profile on `s in [0, 1]`.
pub fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// Artificial one-dimensional demonstration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoSpec {
    pub length: f64,
    /// Number of sampling intervals `T`; the trajectory has `T + 1` samples.
    pub steps: usize,
    pub duration: f64,
}

impl Default for DemoSpec {
    fn default() -> Self {
        DemoSpec { length: 1.0, steps: DEFAULT_STEPS, duration: DEFAULT_DURATION }
    }
}

impl DemoSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(GeometryError::Invalid(format!("demo length {} must be > 0", self.length)));
        }
        if self.steps < 10 {
            return Err(GeometryError::Invalid(format!("demo needs >= 10 steps, got {}", self.steps)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(GeometryError::Invalid(format!("demo duration {} must be > 0", self.duration)));
        }
        Ok(())
    }
}

/// Rest-to-rest quintic from 0 to `L`, sampled uniformly in time.
pub fn min_jerk_demo(spec: &DemoSpec) -> Result<Trajectory> {
    spec.validate()?;
    let positions = (0..=spec.steps)
        .map(|i| spec.length * min_jerk(i as f64 / spec.steps as f64))
        .collect();
    Trajectory::new(positions, 1, spec.duration / spec.steps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn axis_aligned_frames() {
        let f = Frame::new(Vec3::zeros(), Vec3::x(), Vec3::z()).unwrap();
        assert_relative_eq!(f.e1, Vec3::x());
        assert_relative_eq!(f.e2, Vec3::y());
        assert_relative_eq!(f.e3, Vec3::z());
        assert_relative_eq!(f.length, 1.0);

        let f = Frame::new(Vec3::zeros(), Vec3::new(0.0, 2.0, 0.0), Vec3::z()).unwrap();
        assert_relative_eq!(f.length, 2.0);
        assert_relative_eq!(f.e1, Vec3::y());
    }

    #[test]
    fn diagonal_frame() {
        let f = Frame::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0), Vec3::z()).unwrap();
        assert!((f.e1.x - 0.7071).abs() < 1e-4 && (f.e1.y - 0.7071).abs() < 1e-4);
        assert!(f.orthonormality_residual() < 1e-9);
    }

    #[test]
    fn degenerate_frames() {
        assert!(Frame::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1e-9), Vec3::z()).is_err());
        assert!(Frame::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), Vec3::z()).is_err());
        // default rule falls back to +X for vertical motion
        let f = Frame::from_endpoints(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(f.e3, Vec3::x());
    }

    #[test]
    fn quintic_values() {
        assert_eq!(min_jerk(0.0), 0.0);
        assert_eq!(min_jerk(1.0), 1.0);
        assert_relative_eq!(min_jerk(0.5), 0.5, epsilon = 1e-15);
        assert_relative_eq!(min_jerk(0.25), 0.103515625, epsilon = 1e-15);
    }

    #[test]
    fn demo_is_monotone_with_rest_boundaries() {
        let spec = DemoSpec { length: 0.7, ..Default::default() };
        let demo = min_jerk_demo(&spec).unwrap();
        assert_eq!(demo.len(), spec.steps + 1);
        assert!((demo.duration() - spec.duration).abs() < 1e-9);
        let x = demo.axis(0);
        assert!(x.windows(2).all(|w| w[1] > w[0]));
        assert_relative_eq!(*x.last().unwrap(), 0.7, epsilon = 1e-12);
        let acc = demo.differentiate(2).unwrap();
        let scale = spec.length / spec.duration.powi(2);
        assert!(acc[0].abs() < 1e-3 * scale, "{}", acc[0]);
        assert!(acc[spec.steps].abs() < 1e-3 * scale, "{}", acc[spec.steps]);
        let vel = demo.differentiate(1).unwrap();
        assert!(vel[0].abs() < 1e-3 && vel[spec.steps].abs() < 1e-3);
    }

    #[test]
    fn demo_spec_validation() {
        assert!(min_jerk_demo(&DemoSpec { steps: 5, ..Default::default() }).is_err());
        assert!(min_jerk_demo(&DemoSpec { length: 0.0, ..Default::default() }).is_err());
        assert!(min_jerk_demo(&DemoSpec { duration: -1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn derivatives_of_polynomials() {
        let constant = Trajectory::new(vec![2.5; 10], 1, 0.1).unwrap();
        for order in 1..=3 {
            assert!(constant.differentiate(order).unwrap().iter().all(|v| v.abs() < 1e-12));
        }
        let quad = Trajectory::new((0..10).map(|t| (t * t) as f64).collect(), 1, 1.0).unwrap();
        let acc = quad.differentiate(2).unwrap();
        assert!(acc.iter().all(|a| (a - 2.0).abs() < 1e-9));
        let jerk = quad.differentiate(3).unwrap();
        assert!(jerk[2..8].iter().all(|j| j.abs() < 1e-9));
        let cubic = Trajectory::new((0..10).map(|t| (t * t * t) as f64).collect(), 1, 1.0).unwrap();
        assert!(cubic.differentiate(3).unwrap().iter().all(|j| (j - 6.0).abs() < 1e-9));
    }

    #[test]
    fn derivative_errors() {
        let short = Trajectory::new(vec![0.0, 1.0, 2.0, 3.0], 1, 1.0).unwrap();
        assert!(matches!(short.differentiate(2), Err(GeometryError::TooShort { .. })));
        assert!(matches!(short.differentiate(4), Err(GeometryError::Order(4))));
        assert!(short.differentiate(1).is_ok());
    }

    #[test]
    fn world_mapping() {
        let frame = Frame::new(Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0, -0.5, 0.8), Vec3::z()).unwrap();
        let local = Trajectory::new(vec![0.0, 0.0, 0.0, frame.length, 0.0, 0.0, 0.3, 0.2, 0.1], 3, 0.1).unwrap();
        let world = local.to_world(&frame).unwrap();
        assert_relative_eq!(world.point3(0), frame.origin, epsilon = 1e-12);
        assert_relative_eq!(world.point3(1), frame.goal(), epsilon = 1e-12);
        let back = world.to_local(&frame).unwrap();
        for (a, b) in back.positions().iter().zip(local.positions()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(local.embed(2).to_local(&frame).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let demo = min_jerk_demo(&DemoSpec::default()).unwrap().embed(3);
        let mut buf = Vec::new();
        demo.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,y,z\n"));
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), demo.len());
        assert!((back.dt() - demo.dt()).abs() < 1e-9);
        for (a, b) in back.positions().iter().zip(demo.positions()) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-12));
        }
        let bad = "t,x,y,z\n0,0,0,0\n0.1,0,zz,0\n";
        match Trajectory::read_csv(bad.as_bytes()) {
            Err(GeometryError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    /// Jerk measure of a rest-to-rest motion: the samples are padded with the
    /// resting start and end positions so boundary velocity or acceleration
    /// jumps are visible to the finite differences.
    fn rest_to_rest_jerk(xs: &[f64], dt: f64) -> f64 {
        let (first, last) = (xs[0], xs[xs.len() - 1]);
        let padded: Vec<f64> = std::iter::repeat_n(first, 4)
            .chain(xs.iter().copied())
            .chain(std::iter::repeat_n(last, 4))
            .collect();
        let t = Trajectory::new(padded, 1, dt).unwrap();
        let acc = t.differentiate(2).unwrap();
        acc.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>().sqrt()
    }

    proptest! {
        #[test]
        fn frame_is_orthonormal(
            a in prop::array::uniform3(-2.0f64..2.0),
            b in prop::array::uniform3(-2.0f64..2.0),
        ) {
            let (x0, g) = (Vec3::from(a), Vec3::from(b));
            prop_assume!((g - x0).norm() > 1e-3);
            let f = Frame::from_endpoints(x0, g).unwrap();
            prop_assert!(f.orthonormality_residual() < 1e-9);
            prop_assert!((f.e1 - (g - x0) / f.length).norm() < 1e-12);
        }

        #[test]
        fn min_jerk_beats_cubic_and_linear(length in 0.1f64..3.0, duration in 0.5f64..6.0) {
            let spec = DemoSpec { length, steps: 150, duration };
            let demo = min_jerk_demo(&spec).unwrap();
            let dt = demo.dt();
            let quintic = rest_to_rest_jerk(demo.positions(), dt);
            let s = |i: usize| i as f64 / 150.0;
            let cubic: Vec<f64> = (0..=150).map(|i| length * (3.0 * s(i).powi(2) - 2.0 * s(i).powi(3))).collect();
            let linear: Vec<f64> = (0..=150).map(|i| length * s(i)).collect();
            prop_assert!(quintic < rest_to_rest_jerk(&cubic, dt));
            prop_assert!(quintic < rest_to_rest_jerk(&linear, dt));
        }
    }
}
