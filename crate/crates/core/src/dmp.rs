//! Discrete movement primitive with a phase-driven forcing term.
//!
//! Every axis is a critically damped spring toward the goal, coupled through a
//! shared exponentially decaying phase. The forcing term is expressed in the
//! trajectory frame and in units of the start-goal distance, so one set of
//! weights reproduces the same shape for any start, goal, scale and rotation.
//!
//! The transformation system integrated here is
//!
//! ```text
//! tau * dv = K (g - x) - D v - K (g - x0) phi + K L R f(phi)
//! tau * dx = v
//! ```
//!
//! where `R` holds the frame axes as columns and `f` is the normalized
//! radial-basis forcing term.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{Frame, GeometryError, Trajectory, Vec3, MIN_SEGMENT};

#[derive(Debug, Error)]
pub enum DmpError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("basis activations underflow at phase {0}")]
    BasisUnderflow(f64),
    #[error("rollout diverged at step {0}")]
    Divergence(usize),
    #[error("regression is rank deficient: {rows} equations for {unknowns} weights")]
    RankDeficient { rows: usize, unknowns: usize },
    #[error("weights have dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("rotation needs a planar policy but the e3 row is non-zero")]
    NotPlanar,
    #[error("demonstration does not match the rollout sampling: {0}")]
    DemoSampling(String),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = DmpError> = std::result::Result<T, E>;

/// Phase value reached at the end of the shaping horizon.
pub const FINAL_PHASE: f64 = 0.01;

/// Distance to the goal, relative to `L`, accepted at the end of a rollout.
pub const GOAL_TOLERANCE: f64 = 0.015;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmpConfig {
    pub stiffness: f64,
    pub damping: f64,
    pub alpha: f64,
    pub basis_count: usize,
    pub overlap: f64,
    /// Sampling intervals over `duration`.
    pub steps: usize,
    pub duration: f64,
    /// Extra integration time after `duration`, as a multiple of it. The
    /// spring needs this to settle on the goal once the forcing has decayed.
    pub settle: f64,
}

impl Default for DmpConfig {
    fn default() -> Self {
        let stiffness = 25.0;
        DmpConfig {
            stiffness,
            damping: 2.0 * f64::sqrt(stiffness),
            alpha: -FINAL_PHASE.ln(),
            basis_count: 10,
            overlap: 0.5,
            steps: crate::geometry::DEFAULT_STEPS,
            duration: crate::geometry::DEFAULT_DURATION,
            settle: 2.0,
        }
    }
}

impl DmpConfig {
    pub fn with_basis(basis_count: usize) -> Self {
        DmpConfig { basis_count, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(DmpError::Config(m));
        if !(self.stiffness > 0.0) {
            return fail(format!("stiffness {} must be > 0", self.stiffness));
        }
        if (self.damping - 2.0 * self.stiffness.sqrt()).abs() > 1e-9 {
            return fail(format!("damping {} is not critical for K = {}", self.damping, self.stiffness));
        }
        if self.basis_count < 2 {
            return fail(format!("need at least 2 basis functions, got {}", self.basis_count));
        }
        if !(self.alpha > 0.0) {
            return fail(format!("alpha {} must be > 0", self.alpha));
        }
        if !(self.overlap > 0.0) {
            return fail(format!("overlap {} must be > 0", self.overlap));
        }
        if self.steps < 2 || !(self.duration > 0.0) {
            return fail(format!("bad sampling: {} steps over {} s", self.steps, self.duration));
        }
        if !(self.settle >= 0.0) {
            return fail(format!("settle factor {} must be >= 0", self.settle));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.steps as f64
    }

    /// Total number of integration steps including the settling tail.
    pub fn horizon_steps(&self) -> usize {
        self.steps + (self.settle * self.steps as f64).round() as usize
    }
}

/// Phase `exp(-alpha t / tau)`.
pub fn phase(t: f64, config: &DmpConfig) -> f64 {
    (-config.alpha * t / config.duration).exp()
}

/// Centers and widths of the Gaussian basis over the phase.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisLayout {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

impl BasisLayout {
    /// Centers `exp(-alpha i / N)`, i.e. evenly spaced in time over the
    /// shaping horizon; widths from the gap to the next center, the last
    /// width repeating its neighbour.
    pub fn new(config: &DmpConfig) -> Self {
        let n = config.basis_count;
        let centers: Vec<f64> =
            (0..n).map(|i| (-config.alpha * i as f64 / n as f64).exp()).collect();
        let mut widths: Vec<f64> =
            centers.windows(2).map(|w| config.overlap / (w[1] - w[0]).powi(2)).collect();
        widths.push(*widths.last().expect("at least two centers"));
        BasisLayout { centers, widths }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Writes `psi_i(phi) * phi / sum(psi)` into `out`. The exponents are
    /// shifted by their maximum, so phases far past the last center (the
    /// settling tail) stay well defined.
    pub fn normalized_activations(&self, phi: f64, out: &mut [f64]) -> Result<()> {
        let mut top = f64::NEG_INFINITY;
        for ((o, c), h) in out.iter_mut().zip(&self.centers).zip(&self.widths) {
            *o = -h * (phi - c).powi(2);
            top = top.max(*o);
        }
        if !top.is_finite() {
            return Err(DmpError::BasisUnderflow(phi));
        }
        let mut sum = 0.0;
        for o in out.iter_mut() {
            *o = (*o - top).exp();
            sum += *o;
        }
        let scale = phi / sum;
        out.iter_mut().for_each(|o| *o *= scale);
        Ok(())
    }
}

/// Forcing term `f(phi) = sum(theta psi) / sum(psi) * phi`.
pub fn forcing_value(phi: f64, weights: &[f64], layout: &BasisLayout) -> Result<f64> {
    if weights.len() != layout.len() {
        return Err(DmpError::Dimension { expected: layout.len(), got: weights.len() });
    }
    let psi: Vec<f64> =
        layout.centers.iter().zip(&layout.widths).map(|(c, h)| (-h * (phi - c).powi(2)).exp()).collect();
    let sum: f64 = psi.iter().sum();
    if !(sum >= 1e-300) {
        return Err(DmpError::BasisUnderflow(phi));
    }
    Ok(psi.iter().zip(weights).map(|(p, w)| p * w).sum::<f64>() / sum * phi)
}

/// Forcing-term weights, one row of `N` values per frame axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingWeights {
    dim: usize,
    basis: usize,
    data: Vec<f64>,
}

const AXIS_LABELS: [&str; 3] = ["e1", "e2", "e3"];

impl ForcingWeights {
    pub fn zeros(dim: usize, basis: usize) -> Self {
        ForcingWeights { dim, basis, data: vec![0.0; dim * basis] }
    }

    /// Row-major data, `dim` rows of `basis` weights.
    pub fn new(dim: usize, basis: usize, data: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(DmpError::Dimension { expected: 3, got: dim });
        }
        if data.len() != dim * basis {
            return Err(DmpError::Dimension { expected: dim * basis, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DmpError::Config("non-finite weight".into()));
        }
        Ok(ForcingWeights { dim, basis, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> usize {
        self.basis
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, axis: usize) -> &[f64] {
        &self.data[axis * self.basis..(axis + 1) * self.basis]
    }

    pub fn row_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.data[axis * self.basis..(axis + 1) * self.basis]
    }

    /// Copy with `dim` rows; new rows are zero, dropped rows must be zero.
    pub fn embed(&self, dim: usize) -> Result<ForcingWeights> {
        let mut out = ForcingWeights::zeros(dim, self.basis);
        for axis in 0..self.dim {
            if axis < dim {
                out.row_mut(axis).copy_from_slice(self.row(axis));
            } else if self.row(axis).iter().any(|v| *v != 0.0) {
                return Err(DmpError::Dimension { expected: self.dim, got: dim });
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes one labelled row per axis.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["axis".to_string()];
        header.extend((0..self.basis).map(|i| format!("w{i}")));
        w.write_record(&header)?;
        for axis in 0..self.dim {
            let mut rec = vec![AXIS_LABELS[axis].to_string()];
            rec.extend(self.row(axis).iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<ForcingWeights> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let basis = rdr.headers()?.len().saturating_sub(1);
        let mut data = Vec::new();
        let mut dim = 0;
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.get(0) != Some(AXIS_LABELS.get(dim).copied().unwrap_or("?")) {
                return Err(DmpError::Parse { line, msg: format!("expected axis label e{}", dim + 1) });
            }
            for field in record.iter().skip(1) {
                data.push(field.parse::<f64>().map_err(|e| DmpError::Parse {
                    line,
                    msg: format!("bad weight {field:?}: {e}"),
                })?);
            }
            dim += 1;
        }
        ForcingWeights::new(dim, basis, data)
    }
}

/// Rotates a planar forcing term about e1: the e2 row is split into
/// `cos(beta)` on e2 and `sin(beta)` on e3.
pub fn rotate_forcing(weights: &ForcingWeights, beta: f64) -> Result<ForcingWeights> {
    if weights.dim == 3 && weights.row(2).iter().any(|v| v.abs() > 1e-12) {
        return Err(DmpError::NotPlanar);
    }
    let mut out = ForcingWeights::zeros(3, weights.basis);
    out.row_mut(0).copy_from_slice(weights.row(0));
    let (s, c) = beta.sin_cos();
    for i in 0..weights.basis {
        let w = weights.row(1)[i];
        out.row_mut(1)[i] = c * w;
        out.row_mut(2)[i] = s * w;
    }
    Ok(out)
}

/// World placement of a d-dimensional rollout: start, goal and axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    dim: usize,
    origin: Vec<f64>,
    goal: Vec<f64>,
    /// Axis `j` occupies `axes[j * dim..(j + 1) * dim]`.
    axes: Vec<f64>,
    length: f64,
}

impl Placement {
    /// Local frame: start at the origin, goal at `length` along the first axis.
    pub fn local(dim: usize, length: f64) -> Self {
        let mut axes = vec![0.0; dim * dim];
        for j in 0..dim {
            axes[j * dim + j] = 1.0;
        }
        let mut goal = vec![0.0; dim];
        goal[0] = length;
        Placement { dim, origin: vec![0.0; dim], goal, axes, length }
    }

    /// Planar placements use the left-hand perpendicular of e1 as e2; spatial
    /// ones use [`Frame::from_endpoints`].
    pub fn from_endpoints(x0: &[f64], g: &[f64]) -> Result<Self> {
        if x0.len() != g.len() {
            return Err(DmpError::Dimension { expected: x0.len(), got: g.len() });
        }
        match x0.len() {
            2 => {
                let (dx, dy) = (g[0] - x0[0], g[1] - x0[1]);
                let length = dx.hypot(dy);
                if !(length > MIN_SEGMENT) {
                    return Err(GeometryError::Degenerate("start and goal coincide").into());
                }
                let (ux, uy) = (dx / length, dy / length);
                Ok(Placement {
                    dim: 2,
                    origin: x0.to_vec(),
                    goal: g.to_vec(),
                    axes: vec![ux, uy, -uy, ux],
                    length,
                })
            }
            3 => {
                let frame = Frame::from_endpoints(Vec3::from_column_slice(x0), Vec3::from_column_slice(g))?;
                Ok(Placement::from_frame(&frame))
            }
            d => Err(DmpError::Dimension { expected: 3, got: d }),
        }
    }

    pub fn from_frame(frame: &Frame) -> Self {
        let goal = frame.goal();
        let axes = frame.axes().iter().flat_map(|a| [a.x, a.y, a.z]).collect();
        Placement {
            dim: 3,
            origin: frame.origin.as_slice().to_vec(),
            goal: goal.as_slice().to_vec(),
            axes,
            length: frame.length,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn axis(&self, j: usize) -> &[f64] {
        &self.axes[j * self.dim..(j + 1) * self.dim]
    }

    /// Local coordinates of a world point.
    pub fn to_local(&self, world: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|j| self.axis(j).iter().zip(world.iter().zip(&self.origin)).map(|(a, (w, o))| a * (w - o)).sum())
            .collect()
    }
}

/// Movement primitive for a fixed configuration, with the basis activations
/// precomputed along the integration horizon.
#[derive(Debug, Clone)]
pub struct Dmp {
    config: DmpConfig,
    layout: BasisLayout,
    /// Row `k` holds the normalized activations at step `k`.
    activations: Vec<f64>,
    phases: Vec<f64>,
}

impl Dmp {
    pub fn new(config: DmpConfig) -> Result<Self> {
        config.validate()?;
        let layout = BasisLayout::new(&config);
        let n = config.basis_count;
        let steps = config.horizon_steps();
        let dt = config.dt();
        let mut activations = vec![0.0; (steps + 1) * n];
        let mut phases = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let phi = phase(k as f64 * dt, &config);
            layout.normalized_activations(phi, &mut activations[k * n..(k + 1) * n])?;
            phases.push(phi);
        }
        Ok(Dmp { config, layout, activations, phases })
    }

    pub fn config(&self) -> &DmpConfig {
        &self.config
    }

    pub fn layout(&self) -> &BasisLayout {
        &self.layout
    }

    /// Rollout in the local frame from the origin to `length` along e1.
    pub fn rollout_local(&self, weights: &ForcingWeights, length: f64) -> Result<Trajectory> {
        self.integrate(weights, &Placement::local(weights.dim(), length))
    }

    /// Rollout between world points of dimension 2 or 3.
    pub fn rollout(&self, weights: &ForcingWeights, x0: &[f64], g: &[f64]) -> Result<Trajectory> {
        self.integrate(weights, &Placement::from_endpoints(x0, g)?)
    }

    /// Rollout in an explicit 3-D frame.
    pub fn rollout_in_frame(&self, weights: &ForcingWeights, frame: &Frame) -> Result<Trajectory> {
        self.integrate(weights, &Placement::from_frame(frame))
    }

    /// Explicit Euler integration of the transformation system from rest.
    pub fn integrate(&self, weights: &ForcingWeights, placement: &Placement) -> Result<Trajectory> {
        let n = self.config.basis_count;
        let d = placement.dim;
        if weights.basis() != n {
            return Err(DmpError::Dimension { expected: n, got: weights.basis() });
        }
        if weights.dim() > d {
            return Err(DmpError::Dimension { expected: d, got: weights.dim() });
        }
        let steps = self.config.horizon_steps();
        let k_gain = self.config.stiffness;
        let d_gain = self.config.damping;
        let h = self.config.dt() / self.config.duration;
        let length = placement.length;

        let mut x = placement.origin.clone();
        let mut v = vec![0.0; d];
        let mut local_force = vec![0.0; weights.dim()];
        let mut out = Vec::with_capacity((steps + 1) * d);
        out.extend_from_slice(&x);
        for k in 0..steps {
            let act = &self.activations[k * n..(k + 1) * n];
            for (axis, f) in local_force.iter_mut().enumerate() {
                *f = act.iter().zip(weights.row(axis)).map(|(a, w)| a * w).sum::<f64>();
            }
            let phi = self.phases[k];
            for r in 0..d {
                let mut force = 0.0;
                for (axis, f) in local_force.iter().enumerate() {
                    force += placement.axes[axis * d + r] * f;
                }
                let goal = placement.goal[r];
                let acc = k_gain * (goal - x[r]) - d_gain * v[r]
                    - k_gain * (goal - placement.origin[r]) * phi
                    + k_gain * length * force;
                x[r] += h * v[r];
                v[r] += h * acc;
            }
            if x.iter().chain(&v).any(|s| !s.is_finite()) {
                return Err(DmpError::Divergence(k));
            }
            out.extend_from_slice(&x);
        }
        Ok(Trajectory::new(out, d, self.config.dt())?)
    }

    /// Fits forcing weights to a demonstration given in local frame
    /// coordinates, sampled like the shaping horizon of this primitive.
    ///
    /// The target forcing is obtained by inverting the Euler update, so a
    /// demonstration produced by [`Dmp::rollout_local`] is reproduced exactly.
    pub fn learn_from_demo(&self, demo: &Trajectory, length: f64) -> Result<ForcingWeights> {
        let n = self.config.basis_count;
        let steps = self.config.steps;
        if demo.len() < steps + 1 {
            return Err(DmpError::DemoSampling(format!(
                "{} samples, expected {}",
                demo.len(),
                steps + 1
            )));
        }
        if (demo.dt() - self.config.dt()).abs() > 1e-9 {
            return Err(DmpError::DemoSampling(format!("time step {} != {}", demo.dt(), self.config.dt())));
        }
        let dim = demo.dim().max(2);
        let rows = steps - 1;
        if rows < n {
            return Err(DmpError::RankDeficient { rows, unknowns: n });
        }
        let tau = self.config.duration;
        let dt = self.config.dt();
        let k_gain = self.config.stiffness;
        let d_gain = self.config.damping;

        let design = DMatrix::from_fn(rows, n, |k, i| self.activations[k * n + i]);
        let svd = design.clone().svd(true, true);
        let rank = svd.rank(1e-12 * svd.singular_values.max());
        if rank < n {
            return Err(DmpError::RankDeficient { rows, unknowns: n });
        }

        let mut weights = ForcingWeights::zeros(dim, n);
        for axis in 0..dim {
            let coord = |k: usize| if axis < demo.dim() { demo.coord(k, axis) } else { 0.0 };
            let goal = if axis == 0 { length } else { 0.0 };
            let vel = |k: usize| tau * (coord(k + 1) - coord(k)) / dt;
            let target = DVector::from_fn(rows, |k, _| {
                let dv = tau * (vel(k + 1) - vel(k)) / dt;
                let force = (dv - k_gain * (goal - coord(k)) + d_gain * vel(k)
                    + k_gain * goal * self.phases[k])
                    / k_gain;
                force / length
            });
            let theta = svd.solve(&target, 1e-12).map_err(|e| DmpError::Config(e.to_string()))?;
            weights.row_mut(axis).copy_from_slice(theta.as_slice());
        }
        Ok(weights)
    }
}

/// Root-mean-square distance between the first `count` samples of two
/// trajectories of equal dimension.
pub fn rmse(a: &Trajectory, b: &Trajectory, count: usize) -> f64 {
    let count = count.min(a.len()).min(b.len());
    let sum: f64 = (0..count)
        .map(|i| a.sample(i).iter().zip(b.sample(i)).map(|(p, q)| (p - q).powi(2)).sum::<f64>())
        .sum();
    (sum / count as f64).sqrt()
}
