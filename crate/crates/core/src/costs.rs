//! Trajectory costs evaluated in the local frame, and the model families
//! that bind them into optimization problems.
//!
//! All lengths in a [`ModelConfig`] are fractions of the start-goal distance
//! `L`; evaluation multiplies them out so cost values are in meters.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Trajectory};

#[derive(Debug, Error)]
pub enum CostError {
    #[error("unknown model {0:?} (expected 1P-2D, 3P-2D, 2P-2D or 3P-3D)")]
    UnknownModel(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("window [{0}, {1}] is inverted")]
    InvertedWindow(f64, f64),
    #[error("axis {axis} is not available on a {dim}-D trajectory")]
    Axis { axis: Axis, dim: usize },
    #[error("run parameter {index} requested but only {count} given")]
    RunParam { index: usize, count: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse model file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("cannot write model file: {0}")]
    TomlWrite(#[from] toml::ser::Error),
}

pub type Result<T, E = CostError> = std::result::Result<T, E>;

pub const C_ACC0: f64 = 0.01;
pub const C_JERK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    E1,
    E2,
    E3,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.index() + 1)
    }
}

/// A window bound or ratio: either a constant or the value of a per-run
/// parameter drawn when the run starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Anchor {
    Fixed(f64),
    Run { run: usize },
}

impl Anchor {
    pub fn resolve(self, run: &[f64]) -> Result<f64> {
        match self {
            Anchor::Fixed(v) => Ok(v),
            Anchor::Run { run: i } => {
                run.get(i).copied().ok_or(CostError::RunParam { index: i, count: run.len() })
            }
        }
    }
}

/// Section of a trajectory between two e1 positions, as fractions of `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub from: Anchor,
    pub to: Anchor,
}

impl Window {
    pub fn fixed(from: f64, to: f64) -> Self {
        Window { from: Anchor::Fixed(from), to: Anchor::Fixed(to) }
    }

    /// Sample range `[t1, t2)` bounded by the first samples whose e1
    /// coordinate reaches each position. Never reaching the start gives an
    /// empty range; never reaching the end runs to the last sample.
    pub fn indices(&self, traj: &Trajectory, length: f64, run: &[f64]) -> Result<(usize, usize)> {
        let (p1, p2) = (self.from.resolve(run)?, self.to.resolve(run)?);
        if p1 > p2 {
            return Err(CostError::InvertedWindow(p1, p2));
        }
        let crossing = |p: f64| (0..traj.len()).find(|&i| traj.coord(i, 0) >= p * length);
        match crossing(p1) {
            None => Ok((0, 0)),
            Some(t1) => {
                let t2 = crossing(p2).map_or(traj.len(), |t| t + 1).max(t1 + 1);
                Ok((t1, t2))
            }
        }
    }
}

fn resolve_range(window: Option<&Window>, traj: &Trajectory, length: f64, run: &[f64]) -> Result<(usize, usize)> {
    match window {
        Some(w) => w.indices(traj, length, run),
        None => Ok((0, traj.len())),
    }
}

fn check_axis(traj: &Trajectory, axis: Axis) -> Result<()> {
    if axis.index() >= traj.dim() {
        return Err(CostError::Axis { axis, dim: traj.dim() });
    }
    Ok(())
}

fn window_min(traj: &Trajectory, axis: Axis, range: (usize, usize)) -> Option<f64> {
    (range.0..range.1).map(|i| traj.coord(i, axis.index())).reduce(f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    /// Lowest coordinate on `axis` inside the window.
    WindowMin { axis: Axis, window: Option<Window> },
    /// Largest circle around the chord midpoint that the path does not enter.
    InscribedCircle,
    /// Two humps on `axis`, the second held at `1 / ratio` of the first.
    TwoPeakRatio { axis: Axis, first: Window, second: Window, ratio: Anchor },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeCost {
    #[serde(flatten)]
    pub kind: ShapeKind,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl ShapeCost {
    pub fn new(kind: ShapeKind) -> Self {
        ShapeCost { kind, weight: 1.0 }
    }

    /// Negative size of the shaped feature; empty windows cost 0.
    pub fn evaluate(&self, traj: &Trajectory, length: f64, run: &[f64]) -> Result<f64> {
        let value = match &self.kind {
            ShapeKind::WindowMin { axis, window } => {
                check_axis(traj, *axis)?;
                let range = resolve_range(window.as_ref(), traj, length, run)?;
                window_min(traj, *axis, range).unwrap_or(0.0)
            }
            ShapeKind::InscribedCircle => {
                let mid = length / 2.0;
                (0..traj.len())
                    .map(|i| {
                        let p = traj.sample(i);
                        let dx = p[0] - mid;
                        (dx * dx + p[1..].iter().map(|v| v * v).sum::<f64>()).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            }
            ShapeKind::TwoPeakRatio { axis, first, second, ratio } => {
                check_axis(traj, *axis)?;
                let ratio = ratio.resolve(run)?;
                if !(ratio > 0.0) {
                    return Err(CostError::Config(format!("peak ratio {ratio} must be > 0")));
                }
                let h1 = window_min(traj, *axis, first.indices(traj, length, run)?);
                let h2 = window_min(traj, *axis, second.indices(traj, length, run)?);
                match (h1, h2) {
                    (Some(a), Some(b)) => a.min(ratio * b),
                    _ => 0.0,
                }
            }
        };
        Ok(-self.weight * value)
    }
}

/// One-sided barrier `eta (nu - v) + m >= 0` on a frame axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeCost {
    pub axis: Axis,
    /// Reference `v`, fraction of `L`.
    pub reference: f64,
    /// Margin `m`, fraction of `L`.
    pub margin: f64,
    /// +1 keeps the axis above the reference, -1 below.
    pub direction: f64,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub window: Option<Window>,
}

impl ScopeCost {
    pub fn above(axis: Axis, reference: f64, margin: f64) -> Self {
        ScopeCost { axis, reference, margin, direction: 1.0, weight: 1.0, window: None }
    }

    pub fn below(axis: Axis, reference: f64, margin: f64) -> Self {
        ScopeCost { direction: -1.0, ..ScopeCost::above(axis, reference, margin) }
    }

    pub fn evaluate(&self, traj: &Trajectory, length: f64, run: &[f64]) -> Result<f64> {
        check_axis(traj, self.axis)?;
        let (t1, t2) = resolve_range(self.window.as_ref(), traj, length, run)?;
        Ok(scope_sum(
            (t1..t2).map(|i| traj.coord(i, self.axis.index())),
            self.direction,
            self.reference * length,
            self.margin * length,
            self.weight,
        ))
    }
}

/// `-C * sum(min(0, eta (nu - v) + m))` over raw samples in meters.
pub fn scope_sum(samples: impl IntoIterator<Item = f64>, eta: f64, v: f64, m: f64, c: f64) -> f64 {
    let s: f64 = samples.into_iter().map(|nu| (eta * (nu - v) + m).min(0.0)).sum();
    -c * s + 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCost {
    pub acc0: f64,
    pub jerk: f64,
}

impl Default for SmoothnessCost {
    fn default() -> Self {
        SmoothnessCost { acc0: C_ACC0, jerk: C_JERK }
    }
}

/// `C * sum_d |x''(0)|` from one-sided differences.
pub fn acc0_cost(traj: &Trajectory, c: f64) -> Result<f64> {
    let acc = traj.differentiate(2)?;
    Ok(c * acc[..traj.dim()].iter().map(|a| a.abs()).sum::<f64>())
}

/// `C * sqrt(sum_t sum_d (x''(t+1) - x''(t))^2)`.
pub fn jerk_cost(traj: &Trajectory, c: f64) -> Result<f64> {
    let acc = traj.differentiate(2)?;
    Ok(c * jerk_norm(&acc, traj.dim()))
}

fn jerk_norm(acc: &[f64], dim: usize) -> f64 {
    acc.chunks_exact(dim)
        .zip(acc.chunks_exact(dim).skip(1))
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (q - p).powi(2)).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Per-term costs of one rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Shape terms in model order; the first one drives termination.
    pub shape: Vec<f64>,
    pub scopes: Vec<f64>,
    pub acc0: f64,
    pub jerk: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn primary_shape(&self) -> f64 {
        self.shape[0]
    }

    pub fn sum_of_terms(&self) -> f64 {
        self.shape.iter().chain(&self.scopes).sum::<f64>() + self.acc0 + self.jerk
    }
}

/// How the per-run parameters of a family are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    /// No per-run parameters.
    None,
    /// Two values uniform in `[low, high]`, sorted ascending.
    SortedUniformPair { low: f64, high: f64 },
    /// Run `i` uses `values[i]`.
    Grid { values: Vec<f64> },
    /// Run `i` of `n` uses a geometric grid point between `low` and `high`.
    RatioGrid { low: f64, high: f64 },
}

/// Source of one task-parameter label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Label {
    /// Size of the primary shaped feature, `-S_shape / L`.
    PrimaryShape,
    /// Size of the second shape term, `-S / L`.
    SecondaryShape,
    /// A per-run parameter.
    Run { index: usize },
    /// Primary size divided by a per-run ratio.
    PrimaryOverRatio { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelFamily {
    #[serde(rename = "1P-2D")]
    OneParam2d,
    #[serde(rename = "3P-2D")]
    ThreeParam2d,
    #[serde(rename = "2P-2D")]
    TwoParam2d,
    #[serde(rename = "3P-3D")]
    ThreeParam3d,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] =
        [ModelFamily::OneParam2d, ModelFamily::ThreeParam2d, ModelFamily::TwoParam2d, ModelFamily::ThreeParam3d];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::OneParam2d => "1P-2D",
            ModelFamily::ThreeParam2d => "3P-2D",
            ModelFamily::TwoParam2d => "2P-2D",
            ModelFamily::ThreeParam3d => "3P-3D",
        }
    }

    /// Number of task parameters and Cartesian dimensions encoded in the name.
    pub fn shape(self) -> (usize, usize) {
        match self {
            ModelFamily::OneParam2d => (1, 2),
            ModelFamily::ThreeParam2d => (3, 2),
            ModelFamily::TwoParam2d => (2, 2),
            ModelFamily::ThreeParam3d => (3, 3),
        }
    }

    fn preset_source(self) -> &'static str {
        match self {
            ModelFamily::OneParam2d => include_str!("../presets/1p-2d.toml"),
            ModelFamily::ThreeParam2d => include_str!("../presets/3p-2d.toml"),
            ModelFamily::TwoParam2d => include_str!("../presets/2p-2d.toml"),
            ModelFamily::ThreeParam3d => include_str!("../presets/3p-3d.toml"),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CostError::UnknownModel(s.to_string()))
    }
}

/// A task family: costs, exploration schedule, termination target and
/// network shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: ModelFamily,
    pub dim: usize,
    pub basis: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub runs: usize,
    /// Termination threshold on the primary shape cost, fraction of `L`.
    pub target: f64,
    /// Hidden layer widths of the regression network.
    pub hidden: Vec<usize>,
    #[serde(default = "yes")]
    pub canonical: bool,
    pub sampling: Sampling,
    pub labels: Vec<Label>,
    pub shape: Vec<ShapeCost>,
    #[serde(default)]
    pub scopes: Vec<ScopeCost>,
    #[serde(default)]
    pub smoothness: Option<SmoothnessCost>,
}

fn yes() -> bool {
    true
}

impl ModelConfig {
    pub fn preset(family: ModelFamily) -> ModelConfig {
        let model = ModelConfig::from_toml(family.preset_source()).expect("bundled preset parses");
        debug_assert_eq!(model.family, family);
        model
    }

    pub fn by_name(name: &str) -> Result<ModelConfig> {
        Ok(ModelConfig::preset(name.parse()?))
    }

    pub fn from_toml(source: &str) -> Result<ModelConfig> {
        let model: ModelConfig = toml::from_str(source)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<ModelConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CostError::Io { path: path.display().to_string(), source })?;
        ModelConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn task_params(&self) -> usize {
        self.labels.len()
    }

    /// Length of the flattened weight vector, `d * N`.
    pub fn output_len(&self) -> usize {
        self.dim * self.basis
    }

    /// Layer widths from input to output.
    pub fn architecture(&self) -> Vec<usize> {
        let mut arch = vec![self.task_params()];
        arch.extend(&self.hidden);
        arch.push(self.output_len());
        arch
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CostError::Config(m));
        let (n, d) = self.family.shape();
        if self.dim != d || self.task_params() != n {
            return fail(format!(
                "{} needs {n} task parameters in {d}-D, got {} in {}-D",
                self.family,
                self.task_params(),
                self.dim
            ));
        }
        if self.basis < 2 {
            return fail(format!("basis count {} must be >= 2", self.basis));
        }
        if !(self.sigma_min >= 0.0 && self.sigma_max >= self.sigma_min) {
            return fail(format!("exploration bounds [{}, {}] invalid", self.sigma_min, self.sigma_max));
        }
        if self.runs == 0 || self.hidden.is_empty() || self.hidden.contains(&0) {
            return fail("runs and hidden widths must be positive".into());
        }
        if self.shape.is_empty() {
            return fail("at least one shape cost is required".into());
        }
        let dims_ok = |axis: Axis| axis.index() < self.dim;
        for cost in &self.shape {
            if !(cost.weight > 0.0) {
                return fail(format!("shape weight {} must be > 0", cost.weight));
            }
            match &cost.kind {
                ShapeKind::WindowMin { axis, .. } | ShapeKind::TwoPeakRatio { axis, .. } if !dims_ok(*axis) => {
                    return fail(format!("shape axis {axis} outside {}-D", self.dim));
                }
                _ => {}
            }
        }
        for scope in &self.scopes {
            if scope.direction.abs() != 1.0 || !(scope.weight > 0.0) || !dims_ok(scope.axis) {
                return fail(format!("bad scope on {}", scope.axis));
            }
        }
        if let Some(s) = self.smoothness {
            if s.acc0 < 0.0 || s.jerk < 0.0 {
                return fail("smoothness weights must be >= 0".into());
            }
        }
        match &self.sampling {
            Sampling::Grid { values } if values.len() < self.runs => {
                return fail(format!("grid has {} values for {} runs", values.len(), self.runs));
            }
            Sampling::SortedUniformPair { low, high } | Sampling::RatioGrid { low, high }
                if !(low <= high) || !(*low > 0.0 || matches!(self.sampling, Sampling::SortedUniformPair { .. })) =>
            {
                return fail(format!("sampling range [{low}, {high}] invalid"));
            }
            _ => {}
        }
        if self.labels.iter().any(|l| matches!(l, Label::SecondaryShape)) && self.shape.len() < 2 {
            return fail("secondary shape label needs two shape costs".into());
        }
        Ok(())
    }

    /// Evaluates every cost term on a local-frame trajectory.
    pub fn total_cost(&self, traj: &Trajectory, length: f64, run: &[f64]) -> Result<CostBreakdown> {
        let shape = self
            .shape
            .iter()
            .map(|c| c.evaluate(traj, length, run))
            .collect::<Result<Vec<_>>>()?;
        let scopes = self
            .scopes
            .iter()
            .map(|c| c.evaluate(traj, length, run))
            .collect::<Result<Vec<_>>>()?;
        let (acc0, jerk) = match self.smoothness {
            Some(s) => {
                let acc = traj.differentiate(2)?;
                let a0 = acc[..traj.dim()].iter().map(|a| a.abs()).sum::<f64>();
                (s.acc0 * a0, s.jerk * jerk_norm(&acc, traj.dim()))
            }
            None => (0.0, 0.0),
        };
        let mut out = CostBreakdown { shape, scopes, acc0, jerk, total: 0.0 };
        out.total = out.sum_of_terms();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{min_jerk_demo, DemoSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn straight() -> Trajectory {
        min_jerk_demo(&DemoSpec::default()).unwrap().embed(2)
    }

    fn arc(radius: f64, samples: usize) -> Trajectory {
        // Semicircle centered on the chord midpoint, bulging into +e2.
        let rows: Vec<Vec<f64>> = (0..samples)
            .map(|i| {
                let a = std::f64::consts::PI * (1.0 - i as f64 / (samples - 1) as f64);
                vec![0.5 + radius * a.cos(), radius * a.sin()]
            })
            .collect();
        Trajectory::from_rows(&rows, 0.02).unwrap()
    }

    fn line(values: &[f64]) -> Trajectory {
        let rows: Vec<Vec<f64>> =
            values.iter().enumerate().map(|(i, v)| vec![i as f64 / (values.len() - 1) as f64, *v]).collect();
        Trajectory::from_rows(&rows, 1.0).unwrap()
    }

    #[test]
    fn shape_on_straight_demo() {
        let t = straight();
        let wmin = ShapeCost::new(ShapeKind::WindowMin { axis: Axis::E2, window: None });
        assert_eq!(wmin.evaluate(&t, 1.0, &[]).unwrap(), 0.0);
        let circle = ShapeCost::new(ShapeKind::InscribedCircle);
        assert!(circle.evaluate(&t, 1.0, &[]).unwrap().abs() < 1e-3);
    }

    #[test]
    fn inscribed_circle_of_arc() {
        let circle = ShapeCost::new(ShapeKind::InscribedCircle);
        // The arc does not reach the endpoints, so extend it with the chord.
        let mut rows = vec![vec![0.0, 0.0], vec![0.015, 0.0]];
        let a = arc(0.47, 200);
        rows.extend((0..a.len()).map(|i| a.sample(i).to_vec()));
        rows.extend([vec![0.985, 0.0], vec![1.0, 0.0]]);
        let t = Trajectory::from_rows(&rows, 0.02).unwrap();
        assert!((circle.evaluate(&t, 1.0, &[]).unwrap() + 0.47).abs() < 0.01);
    }

    #[test]
    fn window_uses_first_crossing() {
        let t = line(&[0.0, 0.2, 0.4, 0.1, 0.5, 0.0]);
        let w = Window::fixed(0.3, 0.7);
        assert_eq!(w.indices(&t, 1.0, &[]).unwrap(), (2, 5));
        let cost = ShapeCost::new(ShapeKind::WindowMin { axis: Axis::E2, window: Some(w) });
        assert_relative_eq!(cost.evaluate(&t, 1.0, &[]).unwrap(), -0.1);
        let beyond = ShapeCost::new(ShapeKind::WindowMin { axis: Axis::E2, window: Some(Window::fixed(1.5, 2.0)) });
        assert_eq!(beyond.evaluate(&t, 1.0, &[]).unwrap(), 0.0);
        assert!(Window::fixed(0.7, 0.3).indices(&t, 1.0, &[]).is_err());
        let run = Window { from: Anchor::Run { run: 0 }, to: Anchor::Run { run: 1 } };
        assert_eq!(run.indices(&t, 1.0, &[0.3, 0.7]).unwrap(), (2, 5));
        assert!(matches!(run.indices(&t, 1.0, &[0.3]), Err(CostError::RunParam { .. })));
    }

    #[test]
    fn two_peak_keeps_ratio() {
        let t = line(&[0.0, 0.4, 0.4, 0.0, 0.1, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let cost = ShapeCost::new(ShapeKind::TwoPeakRatio {
            axis: Axis::E2,
            first: Window::fixed(0.1, 0.2),
            second: Window::fixed(0.4, 0.5),
            ratio: Anchor::Fixed(2.0),
        });
        // The second hump (0.1) scaled by 2 is lower than the first (0.4).
        assert_relative_eq!(cost.evaluate(&t, 1.0, &[]).unwrap(), -0.2);
    }

    #[test]
    fn scope_values() {
        assert_relative_eq!(scope_sum([-0.05, 0.01], 1.0, 0.0, 0.0, 1.0), 0.05);
        let l = 2.0;
        assert_relative_eq!(scope_sum([0.03 * l], -1.0, 0.02 * l, 0.007 * l, 1.0), 0.003 * l, epsilon = 1e-12);
        let inside = ScopeCost::above(Axis::E2, 0.0, 0.0);
        assert_eq!(inside.evaluate(&straight(), 1.0, &[]).unwrap(), 0.0);
    }

    #[test]
    fn smoothness_values() {
        let demo = straight();
        assert!(acc0_cost(&demo, C_ACC0).unwrap() < 1e-3 * C_ACC0 / 9.0);
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![(i * i) as f64]).collect();
        let parabola = Trajectory::from_rows(&rows, 1.0).unwrap();
        assert_relative_eq!(acc0_cost(&parabola, 0.01).unwrap(), 0.02, epsilon = 1e-10);
        assert!(jerk_cost(&parabola, 1.0).unwrap() < 1e-9);
        let rest = Trajectory::from_rows(&vec![vec![0.3, 0.1]; 10], 1.0).unwrap();
        assert!(acc0_cost(&rest, 0.01).unwrap() < 1e-15);
        let j1 = jerk_cost(&demo, 0.05).unwrap();
        assert_relative_eq!(jerk_cost(&demo, 0.1).unwrap(), 2.0 * j1, epsilon = 1e-15);
        // Compare rest-to-rest: the cubic's acceleration jumps at both ends.
        let padded = |f: fn(f64) -> f64| {
            let rows: Vec<Vec<f64>> = (-4..=154)
                .map(|i| vec![f((i as f64 / 150.0).clamp(0.0, 1.0)), 0.0])
                .collect();
            Trajectory::from_rows(&rows, 0.02).unwrap()
        };
        let quintic = jerk_cost(&padded(crate::geometry::min_jerk), 0.05).unwrap();
        let cubic = jerk_cost(&padded(|s| 3.0 * s * s - 2.0 * s * s * s), 0.05).unwrap();
        assert!(quintic < cubic, "{quintic} vs {cubic}");
    }

    #[test]
    fn presets_match_published_rows() {
        let m = ModelConfig::by_name("3P-2D").unwrap();
        assert_eq!((m.basis, m.runs, m.sigma_min, m.sigma_max, m.target), (10, 50, 0.0007, 0.13, -1.0));
        assert_eq!(m.scopes.len(), 3);
        assert_eq!(m.architecture(), vec![3, 256, 512, 20]);
        let m = ModelConfig::by_name("1P-2D").unwrap();
        assert_eq!((m.basis, m.runs, m.sigma_min, m.sigma_max, m.target), (10, 1, 0.0003, 0.05, -0.47));
        assert_eq!(m.architecture(), vec![1, 1028, 20]);
        assert_eq!(m.scopes.len(), 1);
        let m = ModelConfig::by_name("2P-2D").unwrap();
        assert_eq!((m.basis, m.runs, m.sigma_min, m.sigma_max, m.target), (20, 5, 0.006, 0.1, -0.33));
        assert_eq!(m.architecture(), vec![2, 256, 512, 40]);
        assert_eq!(m.scopes.len(), 2);
        let m = ModelConfig::by_name("3p-3d").unwrap();
        assert_eq!((m.basis, m.runs, m.sigma_min, m.sigma_max, m.target), (60, 30, 0.0015, 0.06, -0.33));
        assert!(m.smoothness.is_none());
        assert_eq!(m.scopes.len(), 5);
        assert_eq!(m.architecture(), vec![3, 256, 512, 180]);
        for family in ModelFamily::ALL {
            let m = ModelConfig::preset(family);
            if family != ModelFamily::ThreeParam3d {
                assert_eq!(m.smoothness, Some(SmoothnessCost::default()));
            }
            let again = ModelConfig::from_toml(&m.to_toml().unwrap()).unwrap();
            assert_eq!(again, m);
        }
        assert!(matches!(ModelConfig::by_name("4P-2D"), Err(CostError::UnknownModel(_))));
    }

    #[test]
    fn total_cost_breakdown() {
        let m = ModelConfig::by_name("3P-2D").unwrap();
        let t = straight();
        let b = m.total_cost(&t, 1.0, &[0.03, 0.97]).unwrap();
        assert_eq!(b.primary_shape(), 0.0);
        assert!(b.scopes.iter().all(|s| *s == 0.0));
        // sqrt(dt * integral of jerk^2) for the quintic is about 0.24 L/tau^2.5
        assert!(b.acc0 < 1e-5 && b.jerk < 0.02, "{b:?}");
        assert!((b.sum_of_terms() - b.total).abs() <= 1e-12);

        let dipped = line(&[0.0, -0.01, -0.02, 0.0, 0.0]);
        let b = m.total_cost(&dipped, 1.0, &[0.03, 0.97]).unwrap();
        assert!(b.scopes[0] > 0.0);
    }

    #[test]
    fn rejects_inconsistent_override() {
        let mut m = ModelConfig::by_name("3P-2D").unwrap();
        m.dim = 3;
        assert!(m.validate().is_err());
        let mut m = ModelConfig::by_name("3P-2D").unwrap();
        m.labels.pop();
        assert!(m.validate().is_err());
    }

    proptest! {
        #[test]
        fn scope_is_nonnegative(vals in prop::collection::vec(-1.0f64..1.0, 5..40), v in -0.5f64..0.5, m in 0.0f64..0.1, up in any::<bool>()) {
            let eta = if up { 1.0 } else { -1.0 };
            let s = scope_sum(vals.iter().copied(), eta, v, m, 1.0);
            prop_assert!(s >= 0.0);
            let violated = vals.iter().any(|nu| eta * (nu - v) + m < 0.0);
            prop_assert_eq!(s == 0.0, !violated);
        }

        #[test]
        fn window_min_shifts_with_offset(vals in prop::collection::vec(-1.0f64..1.0, 5..40), delta in -1.0f64..1.0) {
            let cost = ShapeCost::new(ShapeKind::WindowMin { axis: Axis::E2, window: Some(Window::fixed(0.2, 0.8)) });
            let shifted: Vec<f64> = vals.iter().map(|v| v + delta).collect();
            let a = cost.evaluate(&line(&vals), 1.0, &[]).unwrap();
            let b = cost.evaluate(&line(&shifted), 1.0, &[]).unwrap();
            prop_assert!((b - (a - delta)).abs() < 1e-12);
        }
    }
}
