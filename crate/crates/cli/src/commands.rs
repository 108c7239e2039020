use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use dmp_avoid_core::costs::{ModelConfig, ModelFamily};
use dmp_avoid_core::dataset::{self, Dataset, DatasetManifest, GenerateOptions, RunSummary};
use dmp_avoid_core::dmp::{Dmp, DmpConfig};
use dmp_avoid_core::geometry::{min_jerk_demo, DemoSpec, Frame, Vec3};
use dmp_avoid_core::mlp::{self, MlpError, MlpModel};
use dmp_avoid_core::perception::{self, derive_task_params, load_cloud, Detection, PerceptionError, PointCloud};
use dmp_avoid_core::planner::bench::{self, BenchError, BenchModels};
use dmp_avoid_core::planner::scene::{floor_slab, generate};
use dmp_avoid_core::planner::{plan_linear, plan_rrt_connect, plan_with_fallback, NnPlanner, ObstacleSet, RrtConfig, EXEC_DT};
use serde::{Deserialize, Serialize};

use crate::config::{ensure_parent, Config, Pi2Section};
use crate::error::{AtPath, CliError, Kind, Result};
use crate::manifest::RunManifest;
use crate::{plot, BuildDataset, Detect, EvalNn, GenDemo, GenScene, Plan, PlannerKind, Plot, Scenario, TrainNn, TrainPi2};

fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    Ok(BufWriter::new(File::create(path).at(path)?))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).at(path)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned())
}

fn parent(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// A preset name or a path to a model TOML file.
fn resolve_model(spec: &str) -> Result<ModelConfig> {
    let path = Path::new(spec);
    if path.extension().is_some_and(|e| e == "toml") {
        return ModelConfig::load(path).map_err(|e| CliError::config(format!("{spec}: {e}")));
    }
    ModelConfig::by_name(spec).map_err(CliError::usage)
}

fn mlp_error(path: &Path, e: MlpError) -> CliError {
    match e {
        MlpError::Io(_) | MlpError::Magic | MlpError::Version(_) | MlpError::Checksum | MlpError::Format(_) | MlpError::Json(_) => {
            CliError::io(path, e)
        }
        MlpError::Family { .. } | MlpError::Dimension { .. } => CliError::config(format!("{}: {e}", path.display())),
        e => CliError::failure(e),
    }
}

fn perception_error(e: PerceptionError) -> CliError {
    match e {
        PerceptionError::Io { .. } | PerceptionError::Parse { .. } | PerceptionError::Binary(_) => CliError::new(Kind::Io, e.to_string()),
        PerceptionError::Voxel(_) | PerceptionError::Family(_) => CliError::config(e),
        e => CliError::failure(e),
    }
}

fn load_net(path: &Path) -> Result<MlpModel> {
    MlpModel::load(path).map_err(|e| mlp_error(path, e))
}

pub fn gen_demo(cfg: &Config, a: GenDemo) -> Result<()> {
    let spec = DemoSpec { length: a.length, steps: a.steps, duration: a.duration };
    let demo = min_jerk_demo(&spec).map_err(CliError::usage)?;
    let dmp = Dmp::new(DmpConfig { steps: a.steps, duration: a.duration, ..DmpConfig::with_basis(a.basis) }).map_err(CliError::usage)?;
    let weights = dmp.learn_from_demo(&demo.embed(2), a.length).map_err(CliError::failure)?;
    std::fs::create_dir_all(&a.out).at(&a.out)?;
    let demo_path = a.out.join("demo.csv");
    let weights_path = a.out.join("weights.csv");
    demo.write_csv(create(&demo_path)?).at(&demo_path)?;
    weights.write_csv(create(&weights_path)?).at(&weights_path)?;
    let mut m = RunManifest::new("gen-demo", serde_json::json!({ "demo": { "length": a.length, "steps": a.steps, "duration": a.duration, "basis": a.basis }, "config": cfg.snapshot() }));
    m.output(&demo_path)?;
    m.output(&weights_path)?;
    m.write(&a.out, "gen-demo")?;
    println!("wrote {} and {}", demo_path.display(), weights_path.display());
    Ok(())
}

/// Index of a `train-pi2` directory.
#[derive(Debug, Serialize, Deserialize)]
struct TraceSet {
    model: ModelConfig,
    seed: u64,
    pi2: Pi2Section,
    runs: Vec<RunSummary>,
}

fn run_file(dir: &Path, kind: &str, run: usize) -> PathBuf {
    dir.join(format!("{kind}_{run:03}.csv"))
}

pub fn train_pi2(mut cfg: Config, a: TrainPi2) -> Result<()> {
    let model = resolve_model(&a.model)?;
    cfg.pi2.rollouts = a.rollouts.unwrap_or(cfg.pi2.rollouts);
    cfg.pi2.gamma = a.gamma.unwrap_or(cfg.pi2.gamma);
    cfg.pi2.max_iters = a.max_iters.unwrap_or(cfg.pi2.max_iters);
    let mut opts = GenerateOptions::for_model(&model, a.seed);
    opts.runs = if a.all_runs { model.runs } else { a.runs.unwrap_or(1) };
    if opts.runs == 0 {
        return Err(CliError::usage("--runs must be at least 1"));
    }
    opts.pi2.rollouts = cfg.pi2.rollouts;
    opts.pi2.gamma = cfg.pi2.gamma;
    opts.pi2.max_iters = cfg.pi2.max_iters;
    opts.pi2.demo_length = cfg.pi2.demo_length;
    opts.pi2.validate().map_err(CliError::config)?;

    let t = Instant::now();
    let runs = dataset::run_all(&model, &opts).map_err(CliError::failure)?;
    let elapsed = t.elapsed().as_secs_f64();

    let mut m = RunManifest::new("train-pi2", serde_json::json!({ "model": model, "runs": opts.runs, "config": cfg.snapshot() }));
    m.seed("seed", a.seed);
    std::fs::create_dir_all(&a.out).at(&a.out)?;
    for r in &runs {
        let run = r.summary.run;
        let trace = run_file(&a.out, "trace", run);
        r.trace.write_csv(create(&trace)?).at(&trace)?;
        let rows = run_file(&a.out, "rows", run);
        let single = Dataset { family: model.family, params: model.task_params(), dim: model.dim, basis: model.basis, rows: r.rows.clone() };
        single.write_csv(create(&rows)?).at(&rows)?;
        let weights = run_file(&a.out, "weights", run);
        r.trace.last().weights.write_csv(create(&weights)?).at(&weights)?;
        for p in [trace, rows, weights] {
            m.output(&p)?;
        }
        println!(
            "run {run}: {} iterations, {}, S_shape/L = {:.4}",
            r.summary.iterations,
            if r.summary.completed { "target reached" } else { "iteration limit" },
            r.summary.final_shape
        );
    }
    let index = a.out.join("runs.json");
    let set = TraceSet { model: model.clone(), seed: a.seed, pi2: cfg.pi2, runs: runs.iter().map(|r| r.summary.clone()).collect() };
    let mut f = create(&index)?;
    serde_json::to_writer_pretty(&mut f, &set).at(&index)?;
    writeln!(f).at(&index)?;
    drop(f);
    m.output(&index)?;
    m.time("optimize", elapsed);
    m.write(&a.out, "train-pi2")?;
    let done = runs.iter().filter(|r| r.summary.completed).count();
    println!("{done}/{} runs reached the target in {elapsed:.1} s", runs.len());
    Ok(())
}

pub fn build_dataset(cfg: &Config, a: BuildDataset) -> Result<()> {
    let index = a.traces.join("runs.json");
    let set: TraceSet = serde_json::from_reader(open(&index)?).map_err(|e| CliError::io(&index, e))?;
    let model = set.model;
    model.validate().map_err(|e| CliError::config(format!("{}: {e}", index.display())))?;
    let mut m = RunManifest::new("build-dataset", serde_json::json!({ "include_incomplete": a.include_incomplete, "config": cfg.snapshot() }));
    m.seed("seed", set.seed);
    m.input(&index)?;
    let mut kept = Vec::new();
    for r in set.runs.iter().filter(|r| r.completed || a.include_incomplete) {
        let path = run_file(&a.traces, "rows", r.run);
        m.input(&path)?;
        let d = Dataset::read_csv(open(&path)?, &model).map_err(|e| CliError::io(&path, e))?;
        kept.push(d.rows);
    }
    let data = dataset::balance(&model, &kept).map_err(CliError::failure)?;
    let manifest = DatasetManifest {
        family: model.family,
        seed: set.seed,
        j_min: kept.iter().map(Vec::len).min().unwrap_or(0),
        rows: data.len(),
        include_incomplete: a.include_incomplete,
        runs: set.runs.clone(),
    };
    data.write_csv(create(&a.out)?).at(&a.out)?;
    let json = a.out.with_extension("json");
    manifest.write_json(create(&json)?).map_err(|e| CliError::io(&json, e))?;
    m.output(&a.out)?;
    m.output(&json)?;
    m.write(&parent(&a.out), &stem(&a.out))?;
    println!("{} rows ({} runs x {}) -> {}", data.len(), kept.len(), manifest.j_min, a.out.display());
    Ok(())
}

pub fn train_nn(mut cfg: Config, a: TrainNn) -> Result<()> {
    let model = resolve_model(&a.model)?;
    let t = &mut cfg.train;
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.batch = a.batch.unwrap_or(t.batch);
    t.learning_rate = a.learning_rate.unwrap_or(t.learning_rate);
    t.seed = a.seed.unwrap_or(t.seed);
    if t.epochs == 0 || t.batch == 0 || !(t.learning_rate > 0.0) {
        return Err(CliError::config("epochs, batch and learning rate must be positive"));
    }
    let data = Dataset::read_csv(open(&a.dataset)?, &model).map_err(|e| CliError::io(&a.dataset, e))?;
    let start = Instant::now();
    let (net, report) = mlp::train(&data, &model, &cfg.train).map_err(|e| mlp_error(&a.dataset, e))?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure_parent(&a.out)?;
    net.save(&a.out).map_err(|e| mlp_error(&a.out, e))?;
    let losses = a.out.with_extension("loss.csv");
    let mut f = create(&losses)?;
    writeln!(f, "epoch,loss").at(&losses)?;
    for (i, l) in report.losses.iter().enumerate() {
        writeln!(f, "{},{l:e}", i + 1).at(&losses)?;
    }
    drop(f);
    let mut m = RunManifest::new("train-nn", serde_json::json!({ "model": model.family, "config": cfg.snapshot() }));
    m.seed("train", cfg.train.seed);
    m.input(&a.dataset)?;
    m.output(&a.out)?;
    m.output(&losses)?;
    m.time("train", elapsed);
    m.write(&parent(&a.out), &stem(&a.out))?;
    println!("trained on {} rows, final loss {:.3e}, {elapsed:.1} s -> {}", data.len(), report.final_loss, a.out.display());
    Ok(())
}

fn histogram(errors: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let lo = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if errors.is_empty() || bins == 0 {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0; bins];
    for e in errors {
        counts[(((e - lo) / width) as usize).min(bins - 1)] += 1;
    }
    counts.into_iter().enumerate().map(|(i, c)| (lo + width * i as f64, lo + width * (i + 1) as f64, c)).collect()
}

pub fn eval_nn(mut cfg: Config, a: EvalNn) -> Result<()> {
    let net = load_net(&a.net)?;
    let model = match (&a.model, net.family) {
        (Some(spec), _) => resolve_model(spec)?,
        (None, Some(f)) => ModelConfig::preset(f),
        (None, None) => return Err(CliError::usage("model file records no family; pass --model")),
    };
    net.check_compatible(&model).map_err(|e| mlp_error(&a.net, e))?;
    let e = &mut cfg.eval;
    e.samples = a.samples.unwrap_or(e.samples);
    e.seed = a.seed.unwrap_or(e.seed);
    e.offset = a.offset.unwrap_or(e.offset);
    if e.samples == 0 || !(e.step > 0.0) {
        return Err(CliError::config("eval needs samples > 0 and step > 0"));
    }
    let e = cfg.eval;
    let samples = mlp::sample_task_params(&net, &model, e.samples, e.seed);
    let start = Instant::now();
    let report = mlp::evaluate_s1_error(&net, &model, &samples, e.offset).map_err(CliError::failure)?;
    std::fs::create_dir_all(&a.out).at(&a.out)?;
    let errors_path = a.out.join("s1_errors.csv");
    report.write_csv(create(&errors_path)?).map_err(|err| CliError::io(&errors_path, err))?;
    let hist_path = a.out.join("histogram.csv");
    let mut f = create(&hist_path)?;
    writeln!(f, "bin_lo,bin_hi,count").at(&hist_path)?;
    let errs: Vec<f64> = report.samples.iter().map(|s| s.error).collect();
    for (lo, hi, c) in histogram(&errs, e.histogram_bins) {
        writeln!(f, "{lo:e},{hi:e},{c}").at(&hist_path)?;
    }
    drop(f);
    println!(
        "offset {:.4} L: {} of {} effective s1 errors negative; mean {:.4}, min {:.4}, max {:.4}",
        e.offset, report.negatives, e.samples, report.mean, report.min, report.max
    );
    let mut m = RunManifest::new("eval-nn", serde_json::json!({ "model": model.family, "config": cfg.snapshot() }));
    m.seed("samples", e.seed);
    m.input(&a.net)?;
    m.output(&errors_path)?;
    m.output(&hist_path)?;
    if !a.no_calibrate {
        let (found, steps) = mlp::calibrate_offset(&net, &model, &samples, 0.0, e.step, e.max_offset).map_err(CliError::failure)?;
        let cal_path = a.out.join("calibration.csv");
        let mut f = create(&cal_path)?;
        writeln!(f, "offset,negatives,mean,min,max").at(&cal_path)?;
        for r in &steps {
            writeln!(f, "{},{},{:e},{:e},{:e}", r.offset, r.negatives, r.mean, r.min, r.max).at(&cal_path)?;
        }
        drop(f);
        m.output(&cal_path)?;
        match found {
            Some(o) => println!("calibrated offset: {o:.4} L (smallest on a {} grid with no negative errors)", e.step),
            None => println!("calibrated offset: none up to {:.4} L", e.max_offset),
        }
    }
    m.time("evaluate", start.elapsed().as_secs_f64());
    m.write(&a.out, "eval-nn")?;
    Ok(())
}

#[derive(Serialize)]
struct SceneFile<'a> {
    seed: u64,
    pick: Vec3,
    drop: Vec3,
    cup_base: Vec3,
    blocks: &'a [perception::Aabb],
}

pub fn gen_scene(cfg: &Config, a: GenScene) -> Result<()> {
    let scene = generate(a.seed, &cfg.bench.scene);
    std::fs::create_dir_all(&a.out).at(&a.out)?;
    let cloud = a.out.join("cloud.csv");
    scene.cloud.write_csv(create(&cloud)?).at(&cloud)?;
    let info = a.out.join("scene.json");
    let file = SceneFile { seed: scene.seed, pick: scene.pick, drop: scene.drop, cup_base: scene.cup_base, blocks: &scene.blocks };
    let mut f = create(&info)?;
    serde_json::to_writer_pretty(&mut f, &file).at(&info)?;
    writeln!(f).at(&info)?;
    drop(f);
    let mut m = RunManifest::new("gen-scene", serde_json::json!({ "scene": cfg.bench.scene }));
    m.seed("scene", a.seed);
    m.output(&cloud)?;
    m.output(&info)?;
    m.write(&a.out, "gen-scene")?;
    println!("{} points, {} blocks, pick {:.3},{:.3},{:.3}", scene.cloud.len(), scene.blocks.len(), scene.pick.x, scene.pick.y, scene.pick.z);
    Ok(())
}

struct Perceived {
    cloud: PointCloud,
    ee: Vec3,
    w: Vec3,
    o: f64,
    detection: Detection,
}

fn perceive(cfg: &mut Config, s: &Scenario, family: ModelFamily, m: &mut RunManifest) -> Result<Perceived> {
    cfg.bench.w = s.ee_dims.unwrap_or(cfg.bench.w);
    cfg.bench.o = s.offset.unwrap_or(cfg.bench.o);
    let cloud = load_cloud(&s.cloud).map_err(perception_error)?;
    m.input(&s.cloud)?;
    let ee = Vec3::from(s.ee);
    let w = Vec3::from(cfg.bench.w);
    let detection = perception::detect(&cloud, &ee, family, &w, cfg.bench.o, &cfg.bench.detect).map_err(perception_error)?;
    Ok(Perceived { cloud, ee, w, o: cfg.bench.o, detection })
}

pub fn detect(mut cfg: Config, a: Detect) -> Result<()> {
    let family: ModelFamily = a.model.parse().map_err(CliError::usage)?;
    let mut m = RunManifest::new("detect", serde_json::Value::Null);
    let p = perceive(&mut cfg, &a.scenario, family, &mut m)?;
    match &a.out {
        Some(path) => {
            p.detection.write_report(create(path)?).at(path)?;
            m.output(path)?;
            m.config = serde_json::json!({ "model": family, "config": cfg.snapshot() });
            m.time("detect", p.detection.total);
            m.write(&parent(path), &stem(path))?;
        }
        None => p.detection.write_report(std::io::stdout().lock()).map_err(|e| CliError::new(Kind::Io, e.to_string()))?,
    }
    eprintln!("{} points, detection {:.1} ms", p.cloud.len(), 1e3 * p.detection.total);
    Ok(())
}

pub fn plan(mut cfg: Config, a: Plan) -> Result<()> {
    let mut m = RunManifest::new("plan", serde_json::Value::Null);
    let net = match (a.planner, &a.net) {
        (PlannerKind::Nn, None) => return Err(CliError::usage("--planner nn needs --net")),
        (PlannerKind::Nn, Some(path)) => {
            m.input(path)?;
            Some(load_net(path)?)
        }
        _ => None,
    };
    let hover = a.hover.unwrap_or(cfg.bench.scene.hover);
    let p = perceive(&mut cfg, &a.scenario, ModelFamily::ThreeParam2d, &mut m)?;
    let goal = p.detection.goal + Vec3::new(0.0, 0.0, hover);
    let mut known = ObstacleSet::new(p.detection.obstacle.iter().copied().collect());
    known.boxes.push(floor_slab());
    let rrt = RrtConfig { seed: a.seed.unwrap_or(cfg.bench.rrt.seed), a_max: cfg.bench.a_max, ..cfg.bench.rrt };
    let result = match net {
        Some(net) => {
            let family = net.family.unwrap_or(ModelFamily::ThreeParam2d);
            let planner = NnPlanner::new(net, ModelConfig::preset(family)).map_err(CliError::config)?;
            let cands = if family == ModelFamily::ThreeParam2d {
                p.detection.candidates.clone()
            } else {
                let frame = Frame::from_endpoints(p.ee, goal).map_err(CliError::failure)?;
                derive_task_params(family, p.detection.obstacle.as_ref(), &frame, &p.w, p.o).map_err(perception_error)?
            };
            plan_with_fallback(&planner, &p.ee, &goal, &cands, &known, &p.w, &rrt)
        }
        None if a.planner == PlannerKind::Linear => plan_linear(&p.ee, &goal, &p.detection.candidates, &known, &p.w, cfg.bench.a_max),
        None => plan_rrt_connect(&p.ee, &goal, &known, &p.w, &rrt),
    };
    let mut result = result.map_err(CliError::failure)?;
    result.detection_time = p.detection.total;
    std::fs::create_dir_all(&a.out).at(&a.out)?;
    let traj_path = a.out.join("trajectory.csv");
    result.executed(cfg.bench.a_max, EXEC_DT).write_csv(create(&traj_path)?).at(&traj_path)?;
    let json = a.out.join("plan.json");
    let mut f = create(&json)?;
    serde_json::to_writer_pretty(&mut f, &result).at(&json)?;
    writeln!(f).at(&json)?;
    drop(f);
    m.config = serde_json::json!({ "planner": format!("{:?}", a.planner).to_lowercase(), "hover": hover, "config": cfg.snapshot() });
    m.seed("rrt", rrt.seed);
    m.output(&traj_path)?;
    m.output(&json)?;
    m.time("detect", result.detection_time);
    m.time("plan", result.planning_time);
    m.write(&a.out, "plan")?;
    println!(
        "{}: length {:.3} m, planning {:.2} ms, detection {:.1} ms, execution {:.2} s",
        result.mode,
        result.path_length,
        1e3 * result.planning_time,
        1e3 * result.detection_time,
        result.exec_time
    );
    Ok(())
}

fn bench_error(path: &Path, e: BenchError) -> CliError {
    match e {
        BenchError::Empty => CliError::usage(format!("{}: no benchmark rows", path.display())),
        e => CliError::io(path, e),
    }
}

pub fn bench(mut cfg: Config, a: crate::Bench) -> Result<()> {
    cfg.bench.scenes = a.scenes.unwrap_or(cfg.bench.scenes);
    cfg.bench.seed = a.seed.unwrap_or(cfg.bench.seed);
    if cfg.bench.scenes == 0 {
        return Err(CliError::usage("--scenes must be at least 1"));
    }
    let mut m = RunManifest::new("bench", serde_json::Value::Null);
    let mut three = None;
    let mut one = None;
    for spec in &a.models {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => (spec.clone(), a.models_dir.join(format!("{spec}.model"))),
        };
        let family: ModelFamily = name.parse().map_err(CliError::usage)?;
        let slot = match family {
            ModelFamily::ThreeParam2d => &mut three,
            ModelFamily::OneParam2d => &mut one,
            f => return Err(CliError::usage(format!("bench compares 3P-2D and 1P-2D, not {}", f.name()))),
        };
        m.input(&path)?;
        let net = load_net(&path)?;
        *slot = Some(NnPlanner::new(net, ModelConfig::preset(family)).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?);
    }
    let three = three.ok_or_else(|| CliError::usage("bench needs a 3P-2D model"))?;
    let models = BenchModels { three: &three, one: one.as_ref() };
    let start = Instant::now();
    let rows = bench::run_bench(&models, &cfg.bench);
    let elapsed = start.elapsed().as_secs_f64();
    std::fs::create_dir_all(&a.out).at(&a.out)?;
    let csv = a.out.join("bench.csv");
    bench::write_csv(&rows, create(&csv)?).map_err(|e| bench_error(&csv, e))?;
    // The summary is computed from the file as written.
    let back = bench::read_csv(open(&csv)?).map_err(|e| bench_error(&csv, e))?;
    let summary = bench::summarize(&back).map_err(|e| bench_error(&csv, e))?;
    let text = a.out.join("summary.txt");
    summary.write_text(create(&text)?).at(&text)?;
    summary.write_text(std::io::stdout().lock()).map_err(|e| CliError::new(Kind::Io, e.to_string()))?;
    m.config = serde_json::json!({ "models": a.models, "config": cfg.snapshot() });
    m.seed("bench", cfg.bench.seed);
    for i in 0..cfg.bench.scenes {
        m.seed(&format!("scene_{i:03}"), cfg.bench.scene_seed(i));
    }
    m.output(&csv)?;
    m.output(&text)?;
    m.time("bench", elapsed);
    m.write(&a.out, "bench")?;
    Ok(())
}

pub fn plot(cfg: &Config, a: Plot) -> Result<()> {
    let rows = bench::read_csv(open(&a.csv)?).map_err(|e| bench_error(&a.csv, e))?;
    let summary = bench::summarize(&rows).map_err(|e| bench_error(&a.csv, e))?;
    std::fs::create_dir_all(&a.out).at(&a.out)?;
    let mut m = RunManifest::new("plot", serde_json::json!({ "config": cfg.snapshot() }));
    m.input(&a.csv)?;
    for (name, svg) in [
        ("success.svg", plot::success_chart(&summary)),
        ("times.svg", plot::time_chart(&summary)),
        ("length.svg", plot::length_chart(&rows, &summary)),
    ] {
        let path = a.out.join(name);
        std::fs::write(&path, svg).at(&path)?;
        m.output(&path)?;
        println!("{}", path.display());
    }
    m.write(&a.out, "plot")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_everything() {
        let v = [-0.1, 0.0, 0.04, 0.1, 0.1];
        let h = histogram(&v, 4);
        assert_eq!(h.len(), 4);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 5);
        assert_eq!(h[3].2, 2);
        assert!((h[0].0 + 0.1).abs() < 1e-12 && (h[3].1 - 0.1).abs() < 1e-12);
        assert_eq!(histogram(&[0.3, 0.3], 3).iter().map(|b| b.2).sum::<usize>(), 2);
    }
}
