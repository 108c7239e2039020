//! Seeded pick-and-drop comparison of the learned planners against the
//! linear and RRT-Connect baselines.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scene::{floor_slab, generate, Scene, SceneConfig};
use super::{exec, plan_linear, plan_rrt_connect, plan_with_fallback, NnPlanner, ObstacleSet, PlanResult, RrtConfig};
use crate::costs::ModelFamily;
use crate::geometry::{Frame, Vec3};
use crate::perception::{derive_task_params, detect, DetectConfig};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("no benchmark rows")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const METHOD_3P: &str = "3P-2D";
pub const METHOD_1P: &str = "1P-2D";
pub const METHOD_LINEAR: &str = "linear";
pub const METHOD_RRT: &str = "rrt";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub scenes: usize,
    pub seed: u64,
    /// End-effector box extents.
    pub w: [f64; 3],
    /// Offset as a fraction of `L`.
    pub o: f64,
    pub a_max: f64,
    pub scene: SceneConfig,
    pub detect: DetectConfig,
    pub rrt: RrtConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            scenes: 50,
            seed: 7,
            w: [0.05, 0.05, 0.05],
            o: 0.02,
            a_max: exec::DEFAULT_A_MAX,
            scene: SceneConfig::default(),
            detect: DetectConfig::default(),
            rrt: RrtConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn scene_seed(&self, index: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng.next_u64()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub seed: u64,
    pub method: String,
    pub success: bool,
    pub detect_s: f64,
    pub plan_s: f64,
    pub exec_proxy_s: f64,
    pub length_m: f64,
    pub jerk: f64,
    /// Which planner produced the path (`nn-up`, `rrt`, ...); empty on failure.
    pub mode: String,
    /// Execution proxy with curvature counted against the bound.
    pub exec_curved_s: f64,
}

impl BenchRow {
    fn from_result(seed: u64, method: &str, detect_s: f64, res: Result<PlanResult, (f64, String)>, truth: &ObstacleSet, w: &Vec3) -> Self {
        match res {
            Ok(r) => {
                // Independent re-check against the true geometry.
                let ok = truth.path_free(&r.path, w);
                BenchRow {
                    seed,
                    method: method.into(),
                    success: ok,
                    detect_s,
                    plan_s: r.planning_time,
                    exec_proxy_s: r.exec_time,
                    length_m: r.path_length,
                    jerk: r.jerk,
                    mode: if ok { r.mode.to_string() } else { format!("{}-collided", r.mode) },
                    exec_curved_s: r.exec_time_curved,
                }
            }
            Err((plan_s, _)) => BenchRow {
                seed,
                method: method.into(),
                success: false,
                detect_s,
                plan_s,
                exec_proxy_s: f64::NAN,
                length_m: f64::NAN,
                jerk: f64::NAN,
                mode: String::new(),
                exec_curved_s: f64::NAN,
            },
        }
    }

    pub fn total_s(&self) -> f64 {
        self.plan_s + self.exec_proxy_s
    }
}

/// Trained planners under test.
pub struct BenchModels<'a> {
    pub three: &'a NnPlanner,
    pub one: Option<&'a NnPlanner>,
}

fn timed<T, E: ToString>(f: impl FnOnce() -> Result<T, E>) -> Result<T, (f64, String)> {
    let t = Instant::now();
    f().map_err(|e| (t.elapsed().as_secs_f64(), e.to_string()))
}

/// All methods on one scene.
pub fn run_scene(scene: &Scene, models: &BenchModels, cfg: &BenchConfig) -> Vec<BenchRow> {
    let w = Vec3::from(cfg.w);
    let truth = scene.obstacles();
    let mut methods = vec![METHOD_3P];
    if models.one.is_some() {
        methods.push(METHOD_1P);
    }
    methods.extend([METHOD_LINEAR, METHOD_RRT]);
    let fail = |detect_s: f64, msg: String| -> Vec<BenchRow> {
        methods
            .iter()
            .map(|m| BenchRow::from_result(scene.seed, m, detect_s, Err((0.0, msg.clone())), &truth, &w))
            .collect()
    };
    let det = match detect(&scene.cloud, &scene.pick, ModelFamily::ThreeParam2d, &w, cfg.o, &cfg.detect) {
        Ok(d) => d,
        Err(e) => return fail(0.0, e.to_string()),
    };
    let hover = cfg.scene.hover;
    let goal = det.goal + Vec3::new(0.0, 0.0, hover);
    let mut known = ObstacleSet::new(det.obstacle.iter().copied().collect());
    known.boxes.push(floor_slab());
    let rrt = RrtConfig { seed: scene.seed ^ 0x5eed, a_max: cfg.a_max, ..cfg.rrt };

    let mut rows = Vec::new();
    let nn_row = |method: &str, planner: &NnPlanner, extra_detect: f64, cands: &[crate::perception::Candidate]| {
        let res = timed(|| plan_with_fallback(planner, &scene.pick, &goal, cands, &known, &w, &rrt));
        BenchRow::from_result(scene.seed, method, det.total + extra_detect, res, &truth, &w)
    };
    rows.push(nn_row(METHOD_3P, models.three, 0.0, &det.candidates));
    if let Some(one) = models.one {
        let t = Instant::now();
        let cands = Frame::from_endpoints(scene.pick, goal)
            .map_err(|e| e.to_string())
            .and_then(|f| derive_task_params(ModelFamily::OneParam2d, det.obstacle.as_ref(), &f, &w, cfg.o).map_err(|e| e.to_string()));
        let extra = t.elapsed().as_secs_f64();
        rows.push(match cands {
            Ok(c) => nn_row(METHOD_1P, one, extra, &c),
            Err(e) => BenchRow::from_result(scene.seed, METHOD_1P, det.total + extra, Err((0.0, e)), &truth, &w),
        });
    }
    // The linear baseline's waypoints depend on the goal through the frame;
    // its parameters are the 3P-2D ones.
    let res = timed(|| plan_linear(&scene.pick, &goal, &det.candidates, &known, &w, cfg.a_max));
    rows.push(BenchRow::from_result(scene.seed, METHOD_LINEAR, det.total, res, &truth, &w));
    let res = timed(|| plan_rrt_connect(&scene.pick, &goal, &known, &w, &rrt));
    rows.push(BenchRow::from_result(scene.seed, METHOD_RRT, det.total, res, &truth, &w));
    rows
}

pub fn run_bench(models: &BenchModels, cfg: &BenchConfig) -> Vec<BenchRow> {
    (0..cfg.scenes)
        .into_par_iter()
        .map(|i| run_scene(&generate(cfg.scene_seed(i), &cfg.scene), models, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn write_csv<W: Write>(rows: &[BenchRow], w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<BenchRow>, BenchError> {
    let mut reader = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize().enumerate() {
        rows.push(rec.map_err(|e| BenchError::Row { row: i + 1, msg: e.to_string() })?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub scenes: usize,
    pub successes: usize,
    /// Successes among scenes where any method found a path.
    pub feasible_successes: usize,
    pub feasible: usize,
    pub fallbacks: usize,
    /// Statistics over the scenes every method solved.
    pub common: usize,
    pub mean_length: f64,
    pub var_length: f64,
    pub mean_plan: f64,
    pub mean_exec: f64,
    pub mean_total: f64,
    pub mean_detect: f64,
    pub mean_jerk: f64,
    pub mean_total_curved: f64,
    /// Slowest planning time among rows solved without fallback.
    pub max_direct_plan: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub methods: Vec<MethodSummary>,
    pub checks: Vec<Check>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    if v.len() < 2 {
        return f64::NAN;
    }
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Everything is derived from the rows, so a summary recomputed from the
/// written CSV is identical.
pub fn summarize(rows: &[BenchRow]) -> Result<BenchSummary, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_scene: BTreeMap<u64, Vec<&BenchRow>> = BTreeMap::new();
    for r in rows {
        if !order.contains(&r.method) {
            order.push(r.method.clone());
        }
        by_scene.entry(r.seed).or_default().push(r);
    }
    let feasible: Vec<u64> = by_scene.iter().filter(|(_, rs)| rs.iter().any(|r| r.success)).map(|(s, _)| *s).collect();
    let common: Vec<u64> = by_scene
        .iter()
        .filter(|(_, rs)| order.iter().all(|m| rs.iter().any(|r| &r.method == m && r.success)))
        .map(|(s, _)| *s)
        .collect();
    let methods: Vec<MethodSummary> = order
        .iter()
        .map(|m| {
            let mine: Vec<&BenchRow> = rows.iter().filter(|r| &r.method == m).collect();
            let shared: Vec<&BenchRow> = mine.iter().copied().filter(|r| r.success && common.contains(&r.seed)).collect();
            let col = |f: fn(&BenchRow) -> f64| shared.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let lengths = col(|r| r.length_m);
            MethodSummary {
                method: m.clone(),
                scenes: mine.len(),
                successes: mine.iter().filter(|r| r.success).count(),
                feasible_successes: mine.iter().filter(|r| r.success && feasible.contains(&r.seed)).count(),
                feasible: feasible.len(),
                fallbacks: mine.iter().filter(|r| r.success && r.mode == "rrt" && r.method != METHOD_RRT).count(),
                common: shared.len(),
                mean_length: mean(&lengths),
                var_length: variance(&lengths),
                mean_plan: mean(&col(|r| r.plan_s)),
                mean_exec: mean(&col(|r| r.exec_proxy_s)),
                mean_total: mean(&col(|r| r.total_s())),
                mean_detect: mean(&col(|r| r.detect_s)),
                mean_jerk: mean(&col(|r| r.jerk)),
                mean_total_curved: mean(&col(|r| r.plan_s + r.exec_curved_s)),
                max_direct_plan: mine
                    .iter()
                    .filter(|r| r.success && r.mode.starts_with("nn-"))
                    .map(|r| r.plan_s)
                    .fold(f64::NAN, f64::max),
            }
        })
        .collect();
    Ok(BenchSummary { checks: relationships(&methods), methods })
}

/// The comparisons the benchmark is meant to reproduce.
pub fn relationships(methods: &[MethodSummary]) -> Vec<Check> {
    let get = |name: &str| methods.iter().find(|m| m.method == name);
    let (Some(nn), Some(lin), Some(rrt)) = (get(METHOD_3P), get(METHOD_LINEAR), get(METHOD_RRT)) else {
        return vec![Check { name: "methods present".into(), pass: false, detail: "3P-2D, linear and rrt rows required".into() }];
    };
    let mut checks = vec![
        Check {
            name: "3P-2D with fallback solves every feasible scene".into(),
            pass: nn.feasible_successes == nn.feasible,
            detail: format!("{}/{} ({} via fallback)", nn.feasible_successes, nn.feasible, nn.fallbacks),
        },
        Check {
            name: "mean length 3P-2D <= linear <= rrt".into(),
            pass: nn.mean_length <= lin.mean_length && lin.mean_length <= rrt.mean_length,
            detail: format!("{:.4} / {:.4} / {:.4} m over {} scenes", nn.mean_length, lin.mean_length, rrt.mean_length, nn.common),
        },
        Check {
            name: "3P-2D plan+exec at least 10% below linear".into(),
            pass: nn.mean_total <= 0.9 * lin.mean_total,
            detail: format!(
                "{:.3} s vs {:.3} s ({:+.1}%)",
                nn.mean_total,
                lin.mean_total,
                100.0 * (nn.mean_total / lin.mean_total - 1.0)
            ),
        },
        Check {
            name: "rrt path-length variance strictly largest".into(),
            pass: methods.iter().filter(|m| m.method != METHOD_RRT).all(|m| m.var_length < rrt.var_length),
            detail: methods.iter().map(|m| format!("{} {:.2e}", m.method, m.var_length)).collect::<Vec<_>>().join(", "),
        },
    ];
    checks.push(Check {
        name: "learned planning under 50 ms per scene".into(),
        pass: nn.max_direct_plan < 0.05,
        detail: format!("max {:.2} ms", 1e3 * nn.max_direct_plan),
    });
    checks
}

impl BenchSummary {
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{:<8} {:>7} {:>9} {:>6} {:>9} {:>10} {:>9} {:>9} {:>9} {:>8}",
            "method", "success", "fallback", "common", "length_m", "var_len", "plan_s", "exec_s", "total_s", "jerk"
        )?;
        for m in &self.methods {
            writeln!(
                w,
                "{:<8} {:>3}/{:<3} {:>9} {:>6} {:>9.4} {:>10.3e} {:>9.4} {:>9.3} {:>9.3} {:>8.2}",
                m.method,
                m.feasible_successes,
                m.feasible,
                m.fallbacks,
                m.common,
                m.mean_length,
                m.var_length,
                m.mean_plan,
                m.mean_exec,
                m.mean_total,
                m.mean_jerk
            )?;
        }
        writeln!(
            w,
            "plan+exec with curvature-bounded proxy: {}",
            self.methods.iter().map(|m| format!("{} {:.3} s", m.method, m.mean_total_curved)).collect::<Vec<_>>().join(", ")
        )?;
        for c in &self.checks {
            writeln!(w, "[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}
