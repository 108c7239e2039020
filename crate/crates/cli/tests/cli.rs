use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dmp_avoid_core::planner::bench::{read_csv, summarize};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dmp-avoid"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Exit code and the parsed trailing JSON line of stderr.
fn fails(dir: &Path, args: &[&str]) -> (i32, serde_json::Value) {
    let out = run(dir, args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().unwrap_or_default();
    let json: serde_json::Value = serde_json::from_str(last).unwrap_or_else(|e| panic!("{e}: {stderr}"));
    (out.status.code().unwrap(), json)
}

fn pick(scene_dir: &Path) -> String {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(scene_dir.join("scene.json")).unwrap()).unwrap();
    v["pick"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap().to_string()).collect::<Vec<_>>().join(",")
}

#[test]
fn usage_errors_exit_2_with_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let (code, json) = fails(dir.path(), &["train-pi2"]);
    assert_eq!(code, 2);
    assert_eq!(json["error"], "usage");
    let (code, _) = fails(dir.path(), &["train-pi2", "--model", "9P-9D", "--out", "x"]);
    assert_eq!(code, 2);
    fs::write(dir.path().join("bad.toml"), "[train]\nepoch = 3\n").unwrap();
    let (code, json) = fails(dir.path(), &["--config", "bad.toml", "gen-demo"]);
    assert_eq!(code, 2);
    assert!(json["message"].as_str().unwrap().contains("train.epoch"));
}

#[test]
fn plot_rejects_empty_csv() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let (code, json) = fails(dir.path(), &["plot", "--csv", "empty.csv", "--out", "plots"]);
    assert_eq!(code, 2);
    assert_eq!(json["code"], 2);
    let (code, json) = fails(dir.path(), &["plot", "--csv", "missing.csv", "--out", "plots"]);
    assert_eq!(code, 3);
    assert_eq!(json["error"], "io");
}

#[test]
fn demo_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-demo", "--length", "0.5", "--out", "demo"]);
    let demo = fs::read_to_string(dir.path().join("demo/demo.csv")).unwrap();
    assert_eq!(demo.lines().count(), 152);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("demo/gen-demo.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "gen-demo");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["input_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn one_param_trace_reaches_target_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["train-pi2", "--model", "1P-2D", "--seed", "0", "--out", "a"]);
    assert!(out.contains("1/1 runs reached the target"), "{out}");
    ok(dir.path(), &["train-pi2", "--model", "1P-2D", "--seed", "0", "--out", "b"]);
    for f in ["trace_000.csv", "rows_000.csv", "weights_000.csv", "runs.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let last = fs::read_to_string(dir.path().join("a/trace_000.csv")).unwrap();
    let shape: f64 = last.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(shape <= -0.47, "{shape}");
}

#[test]
fn detect_and_plan_on_generated_scene() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-scene", "--seed", "3", "--out", "scene"]);
    let ee = pick(&dir.path().join("scene"));
    ok(dir.path(), &["detect", "--cloud", "scene/cloud.csv", "--ee", &ee, "--out", "det/report.txt"]);
    let report = fs::read_to_string(dir.path().join("det/report.txt")).unwrap();
    assert!(report.starts_with("goal="));
    assert!(report.contains("params_up="));
    let out = ok(dir.path(), &["plan", "--cloud", "scene/cloud.csv", "--ee", &ee, "--planner", "linear", "--out", "lin"]);
    assert!(out.starts_with("linear:"), "{out}");
    let plan: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("lin/plan.json")).unwrap()).unwrap();
    assert!(plan["success"].as_bool().unwrap());
    assert_eq!(plan["path"].as_array().unwrap().len(), 4);
    // No goal object near this pose's scene: perception failure.
    fs::write(dir.path().join("flat.csv"), "x,y,z\n0,0,0\n0.1,0,0\n").unwrap();
    let (code, json) = fails(dir.path(), &["plan", "--cloud", "flat.csv", "--ee", "-0.4,0.5,0.1", "--planner", "rrt", "--out", "x"]);
    assert_eq!(code, 1);
    assert_eq!(json["error"], "failure");
    let (code, _) = fails(dir.path(), &["plan", "--cloud", "scene/cloud.csv", "--ee", &ee, "--out", "x"]);
    assert_eq!(code, 2, "nn planner without --net");
}

#[test]
fn pipeline_to_bench_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("fast.toml"), "[train]\nepochs = 5\n").unwrap();
    for (name, runs) in [("1P-2D", "3"), ("3P-2D", "2")] {
        let traces = format!("traces-{name}");
        let data = format!("data/{name}.csv");
        let model = format!("models/{name}.model");
        ok(d, &["train-pi2", "--model", name, "--seed", "1", "--runs", runs, "--out", &traces]);
        ok(d, &["build-dataset", "--traces", &traces, "--out", &data]);
        ok(d, &["--config", "fast.toml", "train-nn", "--model", name, "--dataset", &data, "--out", &model]);
        assert_eq!(fs::read_to_string(d.join(format!("models/{name}.loss.csv"))).unwrap().lines().count(), 6);
    }
    let out = ok(d, &["eval-nn", "--net", "models/3P-2D.model", "--samples", "50", "--out", "eval"]);
    assert!(out.contains("of 50 effective s1 errors negative"), "{out}");
    let errors = fs::read_to_string(d.join("eval/s1_errors.csv")).unwrap();
    assert_eq!(errors.lines().next().unwrap(), "s1,s2,s3,achieved,error");
    assert_eq!(errors.lines().count(), 51);
    assert!(d.join("eval/histogram.csv").exists() && d.join("eval/calibration.csv").exists());

    let out = ok(d, &["bench", "--scenes", "3", "--seed", "7", "--out", "bench"]);
    assert!(out.contains("3P-2D with fallback"), "{out}");
    let csv = d.join("bench/bench.csv");
    let rows = read_csv(fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 3 * 4);
    // The printed summary is an independent recomputation from the CSV.
    let mut text = Vec::new();
    summarize(&rows).unwrap().write_text(&mut text).unwrap();
    assert_eq!(String::from_utf8(text).unwrap(), fs::read_to_string(d.join("bench/summary.txt")).unwrap());

    ok(d, &["plot", "--csv", "bench/bench.csv", "--out", "plots"]);
    for f in ["success.svg", "times.svg", "length.svg"] {
        let svg = fs::read_to_string(d.join("plots").join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
