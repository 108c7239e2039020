//! Fully connected regression network from task parameters to forcing
//! weights: rectified hidden layers, linear output, Adam on mean squared
//! error over standardized inputs and targets.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::costs::{CostError, Label, ModelConfig, ModelFamily, Sampling};
use crate::dataset::{Dataset, TaskParams};
use crate::dmp::{Dmp, DmpConfig, DmpError, ForcingWeights};

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("invalid network: {0}")]
    Shape(String),
    #[error("training diverged at epoch {0}")]
    Divergence(usize),
    #[error("input has {got} values, network expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("offset window inverted: s2 = {0} > s3 = {1}")]
    InfeasibleWindow(f64, f64),
    #[error("not a model file")]
    Magic,
    #[error("unsupported model file version {0}")]
    Version(u32),
    #[error("model file checksum mismatch")]
    Checksum,
    #[error("model file is truncated or malformed: {0}")]
    Format(String),
    #[error("model is for {found}, expected {expected}")]
    Family { expected: ModelFamily, found: ModelFamily },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Dmp(#[from] DmpError),
}

pub type Result<T, E = MlpError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    w: DMatrix<f64>,
    b: DVector<f64>,
}

/// Per-feature affine standardization `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn identity(n: usize) -> Self {
        Normalizer { mean: vec![0.0; n], scale: vec![1.0; n], min: vec![0.0; n], max: vec![0.0; n] }
    }

    /// Column statistics; constant columns get unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.first().map_or(0, Vec::len);
        let count = rows.len().max(1) as f64;
        let mut out = Normalizer::identity(n);
        for j in 0..n {
            let col = rows.iter().map(|r| r[j]);
            let mean = col.clone().sum::<f64>() / count;
            let var = col.clone().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
            let sd = var.sqrt();
            out.mean[j] = mean;
            out.scale[j] = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
            out.min[j] = col.clone().fold(f64::INFINITY, f64::min);
            out.max[j] = col.fold(f64::NEG_INFINITY, f64::max);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mean.iter().zip(&self.scale)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.mean.iter().zip(&self.scale)).map(|(v, (m, s))| v * s + m).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.0005, epochs: 100, batch: 64, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, seed: 0 }
    }
}

/// Network plus the normalization it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub family: Option<ModelFamily>,
    /// Layer widths from input to output.
    pub arch: Vec<usize>,
    /// Cartesian dimension and basis count of the output weights.
    pub dim: usize,
    pub basis: usize,
    pub input: Normalizer,
    pub output: Normalizer,
    /// Digest of the data and settings the model was trained on.
    pub manifest_hash: String,
    layers: Vec<Layer>,
}

/// Activations kept for backpropagation.
struct Tape {
    /// Inputs to each layer (after the previous activation), sample per column.
    inputs: Vec<DMatrix<f64>>,
    output: DMatrix<f64>,
}

impl MlpModel {
    /// He-initialized network with identity normalization.
    pub fn new(arch: &[usize], dim: usize, basis: usize, seed: u64) -> Result<Self> {
        if arch.len() < 2 || arch.contains(&0) {
            return Err(MlpError::Shape(format!("architecture {arch:?}")));
        }
        if arch[arch.len() - 1] != dim * basis {
            return Err(MlpError::Shape(format!("output width {} != {dim} x {basis}", arch[arch.len() - 1])));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .windows(2)
            .map(|pair| {
                let normal = Normal::new(0.0, (2.0 / pair[0] as f64).sqrt()).expect("finite std");
                Layer {
                    w: DMatrix::from_fn(pair[1], pair[0], |_, _| normal.sample(&mut rng)),
                    b: DVector::zeros(pair[1]),
                }
            })
            .collect();
        Ok(MlpModel {
            family: None,
            arch: arch.to_vec(),
            dim,
            basis,
            input: Normalizer::identity(arch[0]),
            output: Normalizer::identity(arch[arch.len() - 1]),
            manifest_hash: String::new(),
            layers,
        })
    }

    pub fn for_model(model: &ModelConfig, seed: u64) -> Result<Self> {
        let mut m = MlpModel::new(&model.architecture(), model.dim, model.basis, seed)?;
        m.family = Some(model.family);
        Ok(m)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flattened parameters: per layer, weights column-major then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(l.w.as_slice());
            out.extend_from_slice(l.b.as_slice());
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(MlpError::Shape(format!("{} parameters, expected {}", params.len(), self.parameter_count())));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let n = l.w.len();
            l.w.as_mut_slice().copy_from_slice(&params[at..at + n]);
            at += n;
            let n = l.b.len();
            l.b.as_mut_slice().copy_from_slice(&params[at..at + n]);
            at += n;
        }
        Ok(())
    }

    fn forward(&self, x: DMatrix<f64>) -> Tape {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut a = x;
        for (k, l) in self.layers.iter().enumerate() {
            let mut z = &l.w * &a;
            for mut col in z.column_iter_mut() {
                col += &l.b;
            }
            if k + 1 < self.layers.len() {
                z.apply(|v| *v = v.max(0.0));
            }
            inputs.push(a);
            a = z;
        }
        Tape { inputs, output: a }
    }

    /// Gradients of `sum(grad_out .* output)` with respect to every layer.
    fn backward(&self, tape: &Tape, grad_out: DMatrix<f64>) -> Vec<(DMatrix<f64>, DVector<f64>)> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out;
        for k in (0..self.layers.len()).rev() {
            let a = &tape.inputs[k];
            let gw = &delta * a.transpose();
            let gb = delta.column_sum();
            if k > 0 {
                let mut back = self.layers[k].w.transpose() * &delta;
                // Rectifier derivative: the layer input is positive exactly
                // where the previous pre-activation was.
                back.zip_apply(a, |d, v| {
                    if v <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        grads
    }

    /// Network output on standardized inputs.
    pub fn forward_normalized(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.arch[0] {
            return Err(MlpError::Dimension { expected: self.arch[0], got: z.len() });
        }
        Ok(self.forward(DMatrix::from_column_slice(z.len(), 1, z)).output.as_slice().to_vec())
    }

    /// Raw output vector for raw inputs.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.forward_normalized(&self.input.normalize(x))?;
        Ok(self.output.denormalize(&z))
    }

    pub fn infer(&self, params: &[f64]) -> Result<ForcingWeights> {
        Ok(ForcingWeights::new(self.dim, self.basis, self.predict(params)?)?)
    }

    /// Mean squared error and its gradient over a batch of standardized
    /// samples, one per column.
    pub fn loss_and_gradient(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> (f64, Vec<f64>) {
        let tape = self.forward(x.clone());
        let diff = &tape.output - y;
        let n = diff.len() as f64;
        let loss = diff.norm_squared() / n;
        let grads = self.backward(&tape, diff * (2.0 / n));
        let mut flat = Vec::with_capacity(self.parameter_count());
        for (gw, gb) in grads {
            flat.extend_from_slice(gw.as_slice());
            flat.extend_from_slice(gb.as_slice());
        }
        (loss, flat)
    }

    pub fn loss(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        let out = self.forward(x.clone()).output;
        (out - y).norm_squared() / y.len() as f64
    }
}

/// First and second moment estimates for every parameter.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean minibatch loss (standardized targets) per epoch.
    pub losses: Vec<f64>,
    pub final_loss: f64,
}

fn to_matrix(rows: &[Vec<f64>], idx: &[usize], norm: &Normalizer) -> DMatrix<f64> {
    let n = norm.len();
    let mut m = DMatrix::zeros(n, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        m.set_column(c, &DVector::from_vec(norm.normalize(&rows[i])));
    }
    m
}

/// Trains `model` in place on raw input/target rows, fitting the
/// normalization first.
pub fn train_rows(model: &mut MlpModel, inputs: &[Vec<f64>], targets: &[Vec<f64>], cfg: &TrainConfig) -> Result<TrainReport> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(MlpError::Shape(format!("{} inputs for {} targets", inputs.len(), targets.len())));
    }
    if inputs[0].len() != model.arch[0] || targets[0].len() != model.arch[model.arch.len() - 1] {
        return Err(MlpError::Dimension { expected: model.arch[0], got: inputs[0].len() });
    }
    if cfg.epochs == 0 || !(cfg.learning_rate > 0.0) || cfg.batch == 0 {
        return Err(MlpError::Shape("epochs, batch and learning rate must be positive".into()));
    }
    model.input = Normalizer::fit(inputs);
    model.output = Normalizer::fit(targets);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut params = model.parameters();
    let mut adam = Adam::new(params.len(), cfg);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch) {
            let x = to_matrix(inputs, chunk, &model.input);
            let y = to_matrix(targets, chunk, &model.output);
            let (loss, grad) = model.loss_and_gradient(&x, &y);
            if !loss.is_finite() {
                return Err(MlpError::Divergence(epoch));
            }
            adam.step(&mut params, &grad);
            model.set_parameters(&params)?;
            sum += loss;
            batches += 1;
        }
        losses.push(sum / batches as f64);
    }
    let all: Vec<usize> = (0..inputs.len()).collect();
    let final_loss = model.loss(&to_matrix(inputs, &all, &model.input), &to_matrix(targets, &all, &model.output));
    if !final_loss.is_finite() {
        return Err(MlpError::Divergence(cfg.epochs));
    }
    Ok(TrainReport { losses, final_loss })
}

/// Digest identifying a training set and configuration.
pub fn training_hash(dataset: &Dataset, cfg: &TrainConfig) -> String {
    let mut h = Sha256::new();
    for r in &dataset.rows {
        for v in r.params.iter().chain(r.weights.as_slice()) {
            h.update(v.to_le_bytes());
        }
    }
    h.update(format!("{cfg:?}").as_bytes());
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Trains a fresh network with the family's architecture.
pub fn train(dataset: &Dataset, model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    if dataset.family != model_cfg.family {
        return Err(MlpError::Family { expected: model_cfg.family, found: dataset.family });
    }
    let mut model = MlpModel::for_model(model_cfg, cfg.seed)?;
    let report = train_rows(&mut model, &dataset.inputs(), &dataset.targets(), cfg)?;
    model.manifest_hash = training_hash(dataset, cfg);
    Ok((model, report))
}

/// Enlarges task parameters so an under-predicting network still clears
/// the obstacle and so the end-effector size is accounted for. `w` holds
/// the end-effector extents along (e1, avoidance axis, other), in meters.
pub fn apply_offsets(family: ModelFamily, params: &[f64], o: f64, w: [f64; 3], length: f64) -> Result<TaskParams> {
    let mut s = params.to_vec();
    s[0] += o + w[1] / length;
    if family == ModelFamily::ThreeParam2d {
        s[1] -= o + 0.5 * w[0] / length;
        s[2] += o + 0.5 * w[0] / length;
        if s[1] > s[2] {
            return Err(MlpError::InfeasibleWindow(s[1], s[2]));
        }
    }
    Ok(s)
}

/// Per-run optimization parameters implied by task parameters, i.e. the
/// inverse of the family's labels.
pub fn run_params_from_task(model: &ModelConfig, s: &[f64]) -> Vec<f64> {
    let mut run = Vec::new();
    let mut put = |i: usize, v: f64| {
        if run.len() <= i {
            run.resize(i + 1, 0.0);
        }
        run[i] = v;
    };
    for (k, label) in model.labels.iter().enumerate() {
        match *label {
            Label::Run { index } => put(index, s[k]),
            Label::PrimaryOverRatio { index } if s[k] > 0.0 => put(index, s[0] / s[k]),
            Label::PrimaryOverRatio { index } => put(index, 1.0),
            _ => {}
        }
    }
    run
}

/// Achieved size `ŝ1` of a rollout for task parameters `s`.
pub fn achieved_s1(model: &ModelConfig, dmp: &Dmp, weights: &ForcingWeights, s: &[f64]) -> Result<f64> {
    let run = run_params_from_task(model, s);
    let traj = dmp.rollout_local(weights, 1.0)?;
    Ok(-model.shape[0].evaluate(&traj, 1.0, &run)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct S1Sample {
    pub params: TaskParams,
    pub achieved: f64,
    /// `achieved - s1`; negative means the path under-avoids.
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct S1Report {
    pub offset: f64,
    pub samples: Vec<S1Sample>,
    pub negatives: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl S1Report {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.samples.first().map_or(0, |s| s.params.len());
        let cols: Vec<String> = (1..=n).map(|i| format!("s{i}")).collect();
        writeln!(w, "{},achieved,error", cols.join(","))?;
        for s in &self.samples {
            let p: Vec<String> = s.params.iter().map(f64::to_string).collect();
            writeln!(w, "{},{},{}", p.join(","), s.achieved, s.error)?;
        }
        Ok(())
    }
}

/// Random task parameters inside the network's training range.
pub fn sample_task_params(net: &MlpModel, model: &ModelConfig, count: usize, seed: u64) -> Vec<TaskParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sorted_pair = matches!(model.sampling, Sampling::SortedUniformPair { .. });
    (0..count)
        .map(|_| {
            let mut s: Vec<f64> = (0..net.input.len())
                .map(|j| {
                    let (lo, hi) = (net.input.min[j], net.input.max[j]);
                    if hi > lo { rng.random_range(lo..=hi) } else { lo }
                })
                .collect();
            if sorted_pair && s.len() == 3 && s[1] > s[2] {
                s.swap(1, 2);
            }
            s
        })
        .collect()
}

/// Infers weights for offset-adjusted parameters and measures the shape of
/// the rollout against the unadjusted request.
pub fn evaluate_s1_error(net: &MlpModel, model: &ModelConfig, samples: &[TaskParams], offset: f64) -> Result<S1Report> {
    let dmp = Dmp::new(DmpConfig::with_basis(model.basis))?;
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let adjusted = apply_offsets(model.family, s, offset, [0.0; 3], 1.0)?;
        let weights = net.infer(&adjusted)?;
        let achieved = achieved_s1(model, &dmp, &weights, s)?;
        out.push(S1Sample { params: s.clone(), achieved, error: achieved - s[0] });
    }
    let errs: Vec<f64> = out.iter().map(|s| s.error).collect();
    Ok(S1Report {
        offset,
        negatives: errs.iter().filter(|e| **e < 0.0).count(),
        mean: errs.iter().sum::<f64>() / errs.len().max(1) as f64,
        min: errs.iter().copied().fold(f64::INFINITY, f64::min),
        max: errs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        samples: out,
    })
}

/// Smallest offset on a `step` grid up to `max_offset` with no negative
/// errors, starting from `start`.
pub fn calibrate_offset(
    net: &MlpModel,
    model: &ModelConfig,
    samples: &[TaskParams],
    start: f64,
    step: f64,
    max_offset: f64,
) -> Result<(Option<f64>, Vec<S1Report>)> {
    let mut reports = Vec::new();
    let mut k = 0;
    loop {
        let o = start + k as f64 * step;
        if o > max_offset + 1e-12 {
            return Ok((None, reports));
        }
        let r = evaluate_s1_error(net, model, samples, o)?;
        let clean = r.negatives == 0;
        reports.push(r);
        if clean {
            return Ok((Some(o), reports));
        }
        k += 1;
    }
}

const MAGIC: &[u8; 8] = b"DMPMLP01";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    family: Option<ModelFamily>,
    arch: Vec<usize>,
    activation: String,
    dim: usize,
    basis: usize,
    input: Normalizer,
    output: Normalizer,
    manifest_hash: String,
}

impl MlpModel {
    /// Magic, version, JSON header, little-endian parameters, SHA-256 of
    /// everything before it.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&Header {
            family: self.family,
            arch: self.arch.clone(),
            activation: "relu".into(),
            dim: self.dim,
            basis: self.basis,
            input: self.input.clone(),
            output: self.output.clone(),
            manifest_hash: self.manifest_hash.clone(),
        })?;
        let mut buf = Vec::with_capacity(24 + header.len() + 8 * self.parameter_count());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header);
        for p in self.parameters() {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        let digest = Sha256::digest(&buf);
        w.write_all(&buf)?;
        w.write_all(&digest)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() < 16 + 32 || &buf[..8] != MAGIC {
            return Err(MlpError::Magic);
        }
        let (body, digest) = buf.split_at(buf.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(MlpError::Checksum);
        }
        let version = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(MlpError::Version(version));
        }
        let hlen = u32::from_le_bytes(body[12..16].try_into().expect("4 bytes")) as usize;
        let header: Header = serde_json::from_slice(
            body.get(16..16 + hlen).ok_or_else(|| MlpError::Format("header length".into()))?,
        )?;
        if header.activation != "relu" {
            return Err(MlpError::Format(format!("activation {}", header.activation)));
        }
        let mut model = MlpModel::new(&header.arch, header.dim, header.basis, 0)?;
        let raw = &body[16 + hlen..];
        if raw.len() != 8 * model.parameter_count() {
            return Err(MlpError::Format(format!("{} parameter bytes for {} parameters", raw.len(), model.parameter_count())));
        }
        let params: Vec<f64> =
            raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        model.set_parameters(&params)?;
        if header.input.len() != header.arch[0] || header.output.len() != model.dim * model.basis {
            return Err(MlpError::Format("normalization width".into()));
        }
        model.family = header.family;
        model.input = header.input;
        model.output = header.output;
        model.manifest_hash = header.manifest_hash;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        MlpModel::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Rejects a network trained for a different family or shape.
    pub fn check_compatible(&self, model: &ModelConfig) -> Result<()> {
        if let Some(f) = self.family {
            if f != model.family {
                return Err(MlpError::Family { expected: model.family, found: f });
            }
        }
        if self.arch[0] != model.task_params() || self.dim != model.dim || self.basis != model.basis {
            return Err(MlpError::Shape(format!(
                "network {:?} does not fit {} ({} params, {}x{})",
                self.arch,
                model.family,
                model.task_params(),
                model.dim,
                model.basis
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_batch(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (seed, arch) in [vec![2, 5, 4], vec![3, 4, 6, 2], vec![1, 7, 3], vec![4, 3, 3, 3, 6], vec![2, 8, 2]]
            .into_iter()
            .enumerate()
        {
            let out = *arch.last().unwrap();
            let mut net = MlpModel::new(&arch, 1, out, seed as u64).unwrap();
            // Non-zero biases keep rectifier inputs away from the kink.
            let mut p = net.parameters();
            let mut rng = ChaCha8Rng::seed_from_u64(99 + seed as u64);
            p.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
            net.set_parameters(&p).unwrap();
            let x = random_batch(arch[0], 5, seed as u64 + 10);
            let y = random_batch(out, 5, seed as u64 + 20);
            let (_, grad) = net.loss_and_gradient(&x, &y);
            let h = 1e-6;
            for i in 0..p.len() {
                let mut probe = net.clone();
                let mut q = p.clone();
                q[i] += h;
                probe.set_parameters(&q).unwrap();
                let up = probe.loss(&x, &y);
                q[i] -= 2.0 * h;
                probe.set_parameters(&q).unwrap();
                let down = probe.loss(&x, &y);
                let numeric = (up - down) / (2.0 * h);
                let rel = (grad[i] - numeric).abs() / 1f64.max(grad[i].abs()).max(numeric.abs());
                assert!(rel < 1e-4, "arch {arch:?} param {i}: {} vs {numeric}", grad[i]);
            }
        }
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut adam = Adam::new(3, &TrainConfig::default());
        let mut p = vec![0.5, -1.0, 2.0];
        for _ in 0..5 {
            adam.step(&mut p, &[0.0; 3]);
        }
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn constant_dataset_is_learned_quickly() {
        let inputs: Vec<Vec<f64>> = vec![vec![0.3]; 64 * 50];
        let targets: Vec<Vec<f64>> = vec![vec![1.0, -2.0, 0.5, 4.0]; 64 * 50];
        let mut net = MlpModel::new(&[1, 16, 4], 2, 2, 1).unwrap();
        let cfg = TrainConfig { epochs: 20, ..Default::default() };
        let report = train_rows(&mut net, &inputs, &targets, &cfg).unwrap();
        assert!(report.final_loss < 1e-6, "{}", report.final_loss);
        let w = net.infer(&[0.3]).unwrap();
        assert!((w.as_slice()[3] - 4.0).abs() < 1e-3);
    }

    #[test]
    fn linear_map_is_fitted() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-2.0..2.0));
        let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..3).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let inputs: Vec<Vec<f64>> = (0..2000).map(|_| sample(&mut rng)).collect();
        let targets: Vec<Vec<f64>> =
            inputs.iter().map(|x| (&a * DVector::from_column_slice(x)).as_slice().to_vec()).collect();
        let mut net = MlpModel::new(&[3, 64, 6], 2, 3, 2).unwrap();
        let cfg = TrainConfig { learning_rate: 0.002, epochs: 150, ..Default::default() };
        train_rows(&mut net, &inputs, &targets, &cfg).unwrap();
        let val: Vec<Vec<f64>> = (0..200).map(|_| sample(&mut rng)).collect();
        let idx: Vec<usize> = (0..val.len()).collect();
        let vt: Vec<Vec<f64>> = val.iter().map(|x| (&a * DVector::from_column_slice(x)).as_slice().to_vec()).collect();
        let mse = net.loss(&to_matrix(&val, &idx, &net.input), &to_matrix(&vt, &idx, &net.output));
        assert!(mse < 1e-4, "validation mse {mse}");
    }

    #[test]
    fn offsets() {
        let f = ModelFamily::ThreeParam2d;
        assert_eq!(apply_offsets(f, &[0.3, 0.4, 0.6], 0.0, [0.0; 3], 1.0).unwrap(), vec![0.3, 0.4, 0.6]);
        let s = apply_offsets(f, &[0.3, 0.4, 0.6], 0.02, [0.0; 3], 1.0).unwrap();
        for (a, b) in s.iter().zip([0.32, 0.38, 0.62]) {
            assert!((a - b).abs() < 1e-12);
        }
        let s = apply_offsets(f, &[0.3, 0.4, 0.6], 0.0, [0.1, 0.05, 0.0], 1.0).unwrap();
        for (a, b) in s.iter().zip([0.35, 0.35, 0.65]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(apply_offsets(f, &[0.3, 0.5, 0.5], -0.1, [0.0; 3], 1.0), Err(MlpError::InfeasibleWindow(..))));
        assert_eq!(apply_offsets(ModelFamily::TwoParam2d, &[0.3, 0.6], 0.02, [0.0; 3], 1.0).unwrap(), vec![0.32, 0.6]);
    }

    #[test]
    fn task_to_run_params() {
        let m = ModelConfig::by_name("3P-2D").unwrap();
        assert_eq!(run_params_from_task(&m, &[0.5, 0.2, 0.7]), vec![0.2, 0.7]);
        let m = ModelConfig::by_name("3P-3D").unwrap();
        assert_eq!(run_params_from_task(&m, &[0.4, 0.2, 0.1]), vec![2.0]);
        let m = ModelConfig::by_name("1P-2D").unwrap();
        assert!(run_params_from_task(&m, &[0.4]).is_empty());
    }

    #[test]
    fn file_round_trip_and_corruption() {
        let model = ModelConfig::by_name("2P-2D").unwrap();
        let mut net = MlpModel::for_model(&model, 3).unwrap();
        net.input = Normalizer { mean: vec![0.1, 0.2], scale: vec![0.3, 0.7], min: vec![0.0, 0.3], max: vec![0.9, 0.9] };
        net.manifest_hash = "abc".into();
        let mut buf = Vec::new();
        net.write(&mut buf).unwrap();
        let back = MlpModel::read(buf.as_slice()).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.predict(&[0.4, 0.5]).unwrap(), net.predict(&[0.4, 0.5]).unwrap());

        let mut bad = buf.clone();
        let mid = bad.len() / 2;
        bad[mid] ^= 1;
        assert!(matches!(MlpModel::read(bad.as_slice()), Err(MlpError::Checksum)));
        assert!(matches!(MlpModel::read(&b"not a model at all, really not at all......."[..]), Err(MlpError::Magic)));
        let three = ModelConfig::by_name("3P-2D").unwrap();
        assert!(back.check_compatible(&three).is_err());
        assert!(back.check_compatible(&model).is_ok());
    }

    #[test]
    fn inference_is_pure() {
        let model = ModelConfig::by_name("3P-2D").unwrap();
        let net = MlpModel::for_model(&model, 0).unwrap();
        let a = net.infer(&[0.2, 0.3, 0.6]).unwrap();
        assert_eq!(a, net.infer(&[0.2, 0.3, 0.6]).unwrap());
        assert!(matches!(net.infer(&[0.2]), Err(MlpError::Dimension { .. })));
    }

    proptest! {
        #[test]
        fn normalization_round_trip(rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 2..20)) {
            let n = Normalizer::fit(&rows);
            prop_assert!(n.scale.iter().all(|s| *s > 0.0 && s.is_finite()));
            for r in &rows {
                let back = n.denormalize(&n.normalize(r));
                for (a, b) in back.iter().zip(r) {
                    prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
                }
            }
        }
    }
}
