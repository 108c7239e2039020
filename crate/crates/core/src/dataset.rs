//! Training sets of (task parameters → forcing weights) built from
//! optimization traces.
//!
//! Every iteration of a run is one trajectory, labelled by the size of the
//! feature it has grown so far. Runs are truncated to a common length by
//! evenly spaced sampling so no run dominates the set.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::{CostError, Label, ModelConfig, ModelFamily, Sampling};
use crate::dmp::{Dmp, DmpConfig, DmpError, ForcingWeights};
use crate::geometry::{min_jerk_demo, DemoSpec, GeometryError};
use crate::pi2::{optimize, Pi2Config, Pi2Error, Pi2Trace};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no runs to balance")]
    Empty,
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("row {row} (line {line}): {msg}")]
    Row { row: usize, line: u64, msg: String },
    #[error("label needs {0}")]
    Label(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Dmp(#[from] DmpError),
    #[error(transparent)]
    Pi2(#[from] Pi2Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

/// Task parameters `s_1..s_n`, fractions of `L`.
pub type TaskParams = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub params: TaskParams,
    pub weights: ForcingWeights,
    pub run: usize,
    pub iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub family: ModelFamily,
    pub params: usize,
    pub dim: usize,
    pub basis: usize,
    pub rows: Vec<DatasetRow>,
}

/// Seed of run `run` derived from a base seed.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    seed ^ (run as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Per-run parameters of a family, e.g. the shape window of a 3P-2D run.
pub fn sample_run_params(model: &ModelConfig, run: usize, seed: u64) -> Vec<f64> {
    match &model.sampling {
        Sampling::None => Vec::new(),
        Sampling::SortedUniformPair { low, high } => {
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, run));
            let mut pair = [rng.random_range(*low..=*high), rng.random_range(*low..=*high)];
            pair.sort_by(f64::total_cmp);
            pair.to_vec()
        }
        Sampling::Grid { values } => vec![values[run % values.len()]],
        Sampling::RatioGrid { low, high } => {
            let n = model.runs.max(2);
            let t = (run % n) as f64 / (n - 1) as f64;
            vec![low * (high / low).powf(t)]
        }
    }
}

/// One row per trace entry, labelled with the best policy found so far so
/// labels grow monotonically within a run.
pub fn rows_from_trace(trace: &Pi2Trace, model: &ModelConfig, run: usize, length: f64) -> Result<Vec<DatasetRow>> {
    let mut rows = Vec::with_capacity(trace.len());
    let mut best = 0;
    for (j, entry) in trace.entries.iter().enumerate() {
        if entry.shape < trace.entries[best].shape {
            best = j;
        }
        let chosen = &trace.entries[best];
        let s1 = -chosen.shape / length;
        let params = model
            .labels
            .iter()
            .map(|label| match *label {
                Label::PrimaryShape => Ok(s1),
                Label::SecondaryShape => chosen
                    .costs
                    .shape
                    .get(1)
                    .map(|s| -s / length)
                    .ok_or_else(|| DatasetError::Label("a second shape cost".into())),
                Label::Run { index } => trace
                    .run_params
                    .get(index)
                    .copied()
                    .ok_or_else(|| DatasetError::Label(format!("run parameter {index}"))),
                Label::PrimaryOverRatio { index } => trace
                    .run_params
                    .get(index)
                    .map(|r| s1 / r)
                    .ok_or_else(|| DatasetError::Label(format!("run parameter {index}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(DatasetRow { params, weights: chosen.weights.clone(), run, iter: entry.iter });
    }
    Ok(rows)
}

/// Indices `round(k (len - 1) / (count - 1))`, always keeping both ends.
pub fn even_indices(len: usize, count: usize) -> Vec<usize> {
    match count {
        0 => Vec::new(),
        1 => vec![0],
        _ if count >= len => (0..len).collect(),
        _ => (0..count)
            .map(|k| ((k * (len - 1)) as f64 / (count - 1) as f64).round() as usize)
            .collect(),
    }
}

/// Summary of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub run_params: Vec<f64>,
    pub iterations: usize,
    pub completed: bool,
    pub final_shape: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: Pi2Trace,
    pub rows: Vec<DatasetRow>,
}

/// Provenance of a balanced dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub family: ModelFamily,
    pub seed: u64,
    pub j_min: usize,
    pub rows: usize,
    pub include_incomplete: bool,
    pub runs: Vec<RunSummary>,
}

impl DatasetManifest {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}

/// Draws `J_min` rows from every run, where `J_min` is the shortest run.
pub fn balance(model: &ModelConfig, runs: &[Vec<DatasetRow>]) -> Result<Dataset> {
    let j_min = runs.iter().map(Vec::len).min().ok_or(DatasetError::Empty)?;
    if j_min == 0 {
        return Err(DatasetError::Empty);
    }
    let rows = runs
        .iter()
        .flat_map(|run| even_indices(run.len(), j_min).into_iter().map(move |i| run[i].clone()))
        .collect();
    Ok(Dataset {
        family: model.family,
        params: model.task_params(),
        dim: model.dim,
        basis: model.basis,
        rows,
    })
}

/// Options for generating a family's dataset.
#[derive(Debug, Clone, Copy)]
pub struct GenerateOptions {
    pub seed: u64,
    pub runs: usize,
    pub include_incomplete: bool,
    pub pi2: Pi2Config,
}

impl GenerateOptions {
    pub fn for_model(model: &ModelConfig, seed: u64) -> Self {
        GenerateOptions { seed, runs: model.runs, include_incomplete: false, pi2: Pi2Config::for_model(model, seed) }
    }
}

/// Initial weights: the min-jerk demonstration along e1.
pub fn demo_weights(dmp: &Dmp, dim: usize) -> Result<ForcingWeights> {
    let cfg = dmp.config();
    let spec = DemoSpec { length: 1.0, steps: cfg.steps, duration: cfg.duration };
    let demo = min_jerk_demo(&spec)?.embed(dim);
    Ok(dmp.learn_from_demo(&demo, 1.0)?)
}

/// Runs every optimization of a family in parallel.
pub fn run_all(model: &ModelConfig, opts: &GenerateOptions) -> Result<Vec<RunOutput>> {
    let dmp = Dmp::new(DmpConfig::with_basis(model.basis))?;
    let init = demo_weights(&dmp, model.dim)?;
    (0..opts.runs)
        .into_par_iter()
        .map(|run| {
            let seed = run_seed(opts.seed, run);
            let params = sample_run_params(model, run, opts.seed);
            let cfg = Pi2Config { seed, ..opts.pi2 };
            let trace = optimize(&dmp, model, &params, &cfg, &init)?;
            let rows = rows_from_trace(&trace, model, run, cfg.length)?;
            let summary = RunSummary {
                run,
                seed,
                run_params: params,
                iterations: trace.len(),
                completed: trace.completed,
                final_shape: trace.last().shape / cfg.length,
            };
            Ok(RunOutput { summary, trace, rows })
        })
        .collect()
}

/// Balanced dataset and its manifest from finished runs.
pub fn assemble(model: &ModelConfig, opts: &GenerateOptions, runs: &[RunOutput]) -> Result<(Dataset, DatasetManifest)> {
    let kept: Vec<Vec<DatasetRow>> = runs
        .iter()
        .filter(|r| r.summary.completed || opts.include_incomplete)
        .map(|r| r.rows.clone())
        .collect();
    let dataset = balance(model, &kept)?;
    let manifest = DatasetManifest {
        family: model.family,
        seed: opts.seed,
        j_min: kept.iter().map(Vec::len).min().unwrap_or(0),
        rows: dataset.rows.len(),
        include_incomplete: opts.include_incomplete,
        runs: runs.iter().map(|r| r.summary.clone()).collect(),
    };
    Ok((dataset, manifest))
}

const AXES: [&str; 3] = ["e1", "e2", "e3"];

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header(params: usize, dim: usize, basis: usize) -> Vec<String> {
        let mut h: Vec<String> = (1..=params).map(|i| format!("s{i}")).collect();
        for axis in AXES.iter().take(dim) {
            h.extend((0..basis).map(|i| format!("{axis}_w{i}")));
        }
        h.push("run".into());
        h.push("iter".into());
        h
    }

    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.params.clone()).collect()
    }

    pub fn targets(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.weights.as_slice().to_vec()).collect()
    }

    /// Rows per run id, in first-seen order.
    pub fn rows_per_run(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(run, _)| *run == r.run) {
                Some(e) => e.1 += 1,
                None => out.push((r.run, 1)),
            }
        }
        out
    }

    /// Shortest round-trip formatting, so loading restores every bit.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(Dataset::header(self.params, self.dim, self.basis))?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.params.iter().map(f64::to_string).collect();
            rec.extend(r.weights.as_slice().iter().map(f64::to_string));
            rec.push(r.run.to_string());
            rec.push(r.iter.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, model: &ModelConfig) -> Result<Dataset> {
        let (params, dim, basis) = (model.task_params(), model.dim, model.basis);
        let expected = Dataset::header(params, dim, basis);
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
        let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if found != expected {
            return Err(DatasetError::Header { expected: expected.join(","), found: found.join(",") });
        }
        let mut rows = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let err = |msg: String| DatasetError::Row { row, line, msg };
            if rec.len() != expected.len() {
                return Err(err(format!("{} fields, expected {}", rec.len(), expected.len())));
            }
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|e| err(format!("column {}: {e}", expected[i])))
            };
            let vals = (0..params + dim * basis).map(num).collect::<Result<Vec<_>>>()?;
            let int = |i: usize| rec[i].parse::<usize>().map_err(|e| err(format!("column {}: {e}", expected[i])));
            let weights = ForcingWeights::new(dim, basis, vals[params..].to_vec()).map_err(|e| err(e.to_string()))?;
            rows.push(DatasetRow {
                params: vals[..params].to_vec(),
                weights,
                run: int(expected.len() - 2)?,
                iter: int(expected.len() - 1)?,
            });
        }
        Ok(Dataset { family: model.family, params, dim, basis, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::CostBreakdown;
    use crate::pi2::TraceEntry;

    fn fake_trace(shapes: &[f64], run_params: Vec<f64>) -> Pi2Trace {
        let entries = shapes
            .iter()
            .enumerate()
            .map(|(j, s)| TraceEntry {
                iter: j,
                weights: ForcingWeights::new(2, 10, vec![j as f64; 20]).unwrap(),
                shape: *s,
                total: *s,
                costs: CostBreakdown { shape: vec![*s], scopes: vec![], acc0: 0.0, jerk: 0.0, total: *s },
            })
            .collect();
        Pi2Trace { run_params, entries, completed: true }
    }

    fn rows(n: usize, run: usize) -> Vec<DatasetRow> {
        let model = ModelConfig::by_name("3P-2D").unwrap();
        let shapes: Vec<f64> = (0..n).map(|j| -(j as f64) / n as f64).collect();
        rows_from_trace(&fake_trace(&shapes, vec![0.2, 0.6]), &model, run, 1.0).unwrap()
    }

    #[test]
    fn labels_use_running_minimum() {
        let model = ModelConfig::by_name("3P-2D").unwrap();
        let trace = fake_trace(&[0.0, -0.2, -0.1, -0.3], vec![0.2, 0.6]);
        let r = rows_from_trace(&trace, &model, 4, 1.0).unwrap();
        assert_eq!(r.len(), trace.len());
        let s1: Vec<f64> = r.iter().map(|r| r.params[0]).collect();
        assert_eq!(s1, vec![0.0, 0.2, 0.2, 0.3]);
        assert_eq!(r[2].weights, trace.entries[1].weights);
        assert_eq!(r[2].iter, 2);
        assert_eq!(r[3].params, vec![0.3, 0.2, 0.6]);
    }

    #[test]
    fn balancing() {
        let runs = vec![rows(100, 0), rows(150, 1), rows(120, 2)];
        let model = ModelConfig::by_name("3P-2D").unwrap();
        let d = balance(&model, &runs).unwrap();
        assert_eq!(d.len(), 300);
        assert_eq!(d.rows_per_run(), vec![(0, 100), (1, 100), (2, 100)]);
        assert_eq!(d.rows[100].iter, 0);
        assert_eq!(d.rows[199].iter, 149);
        let single = balance(&model, &runs[..1]).unwrap();
        assert_eq!(single.rows, runs[0]);
        assert!(matches!(balance(&model, &[]), Err(DatasetError::Empty)));
        assert_eq!(even_indices(5, 3), vec![0, 2, 4]);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let model = ModelConfig::by_name("3P-2D").unwrap();
        let mut d = balance(&model, &[rows(7, 0)]).unwrap();
        d.rows[3].params[0] = 0.1 + 0.2;
        d.rows[3].weights.as_mut_slice()[5] = std::f64::consts::PI * 1e-7;
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::read_csv(buf.as_slice(), &model).unwrap(), d);

        let other = ModelConfig::by_name("2P-2D").unwrap();
        assert!(matches!(Dataset::read_csv(buf.as_slice(), &other), Err(DatasetError::Header { .. })));

        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let cut = &lines[3][..lines[3].len() / 2];
        lines[3] = cut;
        let broken = lines.join("\n");
        match Dataset::read_csv(broken.as_bytes(), &model) {
            Err(DatasetError::Row { row, line, .. }) => assert_eq!((row, line), (2, 4)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn run_parameter_sampling() {
        let model = ModelConfig::by_name("3P-2D").unwrap();
        for run in 0..50 {
            let p = sample_run_params(&model, run, 3);
            assert!(p[0] <= p[1] && p[0] >= 0.03 && p[1] <= 0.97);
            assert_eq!(p, sample_run_params(&model, run, 3));
        }
        let grid = ModelConfig::by_name("2P-2D").unwrap();
        assert_eq!(sample_run_params(&grid, 4, 0), vec![0.9]);
        let ratio = ModelConfig::by_name("3P-3D").unwrap();
        assert!((sample_run_params(&ratio, 0, 0)[0] - 0.5).abs() < 1e-12);
        assert!((sample_run_params(&ratio, 29, 0)[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn one_param_run_builds_rows() {
        let model = ModelConfig::by_name("1P-2D").unwrap();
        let opts = GenerateOptions::for_model(&model, 0);
        let runs = run_all(&model, &opts).unwrap();
        let (d, m) = assemble(&model, &opts, &runs).unwrap();
        assert_eq!(d.len(), runs[0].trace.len());
        assert_eq!(m.rows, d.len());
        assert!(d.rows[0].params[0].abs() < 1e-3);
        assert!(d.rows.windows(2).all(|w| w[1].params[0] >= w[0].params[0]));
        let mut buf = Vec::new();
        m.write_json(&mut buf).unwrap();
        assert_eq!(DatasetManifest::read_json(buf.as_slice()).unwrap(), m);
    }
}
