//! Execution-time proxy: every path gets a minimum-jerk time law under a
//! shared acceleration bound. Polylines stop at each vertex; smooth paths
//! move along their arc length in one stroke. By default only the
//! tangential acceleration is bounded; `with_curvature` also counts the
//! centripetal part.

use serde::{Deserialize, Serialize};

use crate::geometry::{min_jerk, Trajectory, Vec3};

/// `max |d²/du² min_jerk(u)|` on `[0, 1]`.
pub const MIN_JERK_PEAK_ACC: f64 = 5.773_502_691_896_258;

pub const DEFAULT_A_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Smooth,
    Polyline,
}

fn min_jerk_d1(u: f64) -> f64 {
    30.0 * u * u * (1.0 - u) * (1.0 - u)
}

fn min_jerk_d2(u: f64) -> f64 {
    60.0 * u - 180.0 * u * u + 120.0 * u * u * u
}

/// Natural cubic spline through points at uniform arc-length spacing.
#[derive(Debug, Clone)]
struct Spline {
    knots: Vec<Vec3>,
    /// Second derivatives at the knots.
    second: Vec<Vec3>,
    h: f64,
}

impl Spline {
    fn new(knots: Vec<Vec3>, h: f64) -> Self {
        let n = knots.len();
        let mut second = vec![Vec3::zeros(); n];
        if n > 2 {
            // Thomas algorithm on M[i-1] + 4 M[i] + M[i+1] = 6 Δ²y / h².
            let m = n - 2;
            let mut c = vec![0.0; m];
            let mut d = vec![Vec3::zeros(); m];
            for i in 0..m {
                let rhs = (knots[i + 2] - knots[i + 1] * 2.0 + knots[i]) * (6.0 / (h * h));
                let (cp, dp) = if i > 0 { (c[i - 1], d[i - 1]) } else { (0.0, Vec3::zeros()) };
                let denom = 4.0 - cp;
                c[i] = 1.0 / denom;
                d[i] = (rhs - dp) / denom;
            }
            for i in (0..m).rev() {
                second[i + 1] = d[i] - second[i + 2] * c[i];
            }
        }
        Spline { knots, second, h }
    }

    fn length(&self) -> f64 {
        self.h * (self.knots.len() - 1) as f64
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let last = self.knots.len() - 2;
        let i = ((s / self.h).floor().max(0.0) as usize).min(last);
        (i, (s - i as f64 * self.h).clamp(0.0, self.h))
    }

    fn at(&self, s: f64) -> Vec3 {
        let (i, t) = self.locate(s);
        let h = self.h;
        let (a, b) = (h - t, t);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        m0 * (a * a * a / (6.0 * h))
            + m1 * (b * b * b / (6.0 * h))
            + (self.knots[i] - m0 * (h * h / 6.0)) * (a / h)
            + (self.knots[i + 1] - m1 * (h * h / 6.0)) * (b / h)
    }

    /// Curvature, treating the parameter as arc length.
    fn curvature(&self, s: f64) -> f64 {
        let (i, t) = self.locate(s);
        (self.second[i] * ((self.h - t) / self.h) + self.second[i + 1] * (t / self.h)).norm()
    }
}

/// Position as a function of time along a geometric path.
#[derive(Debug, Clone)]
pub struct TimeLaw {
    kind: PathKind,
    /// Polyline vertices; for a degenerate smooth path, its single point.
    points: Vec<Vec3>,
    spline: Option<Spline>,
    /// Polyline: one duration per segment. Smooth: a single duration.
    durations: Vec<f64>,
}

fn cumulative(points: &[Vec3]) -> Vec<f64> {
    let mut arc = Vec::with_capacity(points.len());
    let mut s = 0.0;
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            s += (p - points[i - 1]).norm();
        }
        arc.push(s);
    }
    arc
}

/// Point at arc length `s` by linear interpolation.
fn at_arc(points: &[Vec3], arc: &[f64], s: f64) -> Vec3 {
    let k = arc.partition_point(|a| *a <= s);
    if k == 0 {
        return points[0];
    }
    if k >= points.len() {
        return points[points.len() - 1];
    }
    let span = arc[k] - arc[k - 1];
    let f = if span > 0.0 { (s - arc[k - 1]) / span } else { 0.0 };
    points[k - 1] + (points[k] - points[k - 1]) * f
}

impl TimeLaw {
    /// Minimum-jerk segments whose peak tangential acceleration is `a_max`.
    pub fn new(kind: PathKind, path: &[Vec3], a_max: f64) -> Self {
        Self::build(kind, path, a_max, false)
    }

    /// Like `new`, but on smooth paths the bound covers the full
    /// acceleration vector including the centripetal part.
    pub fn with_curvature(kind: PathKind, path: &[Vec3], a_max: f64) -> Self {
        Self::build(kind, path, a_max, true)
    }

    fn build(kind: PathKind, path: &[Vec3], a_max: f64, curved: bool) -> Self {
        match kind {
            PathKind::Polyline => {
                let points: Vec<Vec3> = path.to_vec();
                let durations = points
                    .windows(2)
                    .map(|s| (MIN_JERK_PEAK_ACC * (s[1] - s[0]).norm() / a_max).sqrt())
                    .collect();
                TimeLaw { kind, points, spline: None, durations }
            }
            PathKind::Smooth => {
                let raw_arc = cumulative(path);
                let total = *raw_arc.last().unwrap_or(&0.0);
                if total <= 0.0 {
                    return TimeLaw { kind, points: path[..1.min(path.len())].to_vec(), spline: None, durations: vec![0.0] };
                }
                // Knots at about the spacing of the input samples.
                let n = ((total / 0.01).ceil() as usize).clamp(8, 2000);
                let knots: Vec<Vec3> = (0..=n).map(|k| at_arc(path, &raw_arc, total * k as f64 / n as f64)).collect();
                let spline = Spline::new(knots, total / n as f64);
                let mut peak = MIN_JERK_PEAK_ACC * total;
                if curved {
                    for k in 0..=2000 {
                        let u = k as f64 / 2000.0;
                        let tangential = total * min_jerk_d2(u);
                        let normal = (total * min_jerk_d1(u)).powi(2) * spline.curvature(total * min_jerk(u));
                        peak = peak.max(tangential.hypot(normal));
                    }
                }
                TimeLaw { kind, points: Vec::new(), spline: Some(spline), durations: vec![(peak / a_max).sqrt()] }
            }
        }
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn duration(&self) -> f64 {
        self.durations.iter().sum()
    }

    pub fn position(&self, t: f64) -> Vec3 {
        if let Some(spline) = &self.spline {
            let d = self.durations[0];
            let u = if d > 0.0 { (t / d).clamp(0.0, 1.0) } else { 1.0 };
            return spline.at(spline.length() * min_jerk(u));
        }
        if self.points.len() < 2 {
            return self.points[0];
        }
        let mut start = 0.0;
        for (i, d) in self.durations.iter().enumerate() {
            if t <= start + d || i + 1 == self.durations.len() {
                let u = if *d > 0.0 { ((t - start) / d).clamp(0.0, 1.0) } else { 1.0 };
                return self.points[i] + (self.points[i + 1] - self.points[i]) * min_jerk(u);
            }
            start += d;
        }
        self.points[self.points.len() - 1]
    }

    /// Uniformly timed samples covering the full duration.
    pub fn sample(&self, dt: f64) -> Trajectory {
        let total = self.duration();
        let steps = ((total / dt).ceil() as usize).max(2);
        let h = if total > 0.0 { total / steps as f64 } else { dt };
        let pts: Vec<Vec3> = (0..=steps).map(|k| self.position(k as f64 * h)).collect();
        Trajectory::from_points(&pts, h).expect("uniform samples")
    }

    /// `sqrt(∫ |x'''|² dt)` of the timed path, from third differences.
    pub fn jerk(&self, dt: f64) -> f64 {
        let traj = self.sample(dt);
        let h = traj.dt();
        let p = traj.points3();
        let sum: f64 = p
            .windows(4)
            .map(|w| ((w[3] - w[2] * 3.0 + w[1] * 3.0 - w[0]) / h.powi(3)).norm_squared())
            .sum();
        (sum * h).sqrt()
    }
}
