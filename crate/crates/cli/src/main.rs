use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;
mod manifest;
mod plot;

use config::{parse_vec3, Config};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "dmp-avoid", version, about = "Learned obstacle-avoiding motion primitives: training, perception, planning and benchmarks")]
struct Cli {
    /// TOML config layered over the defaults; repeat to stack, later files win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Vec<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the minimum-jerk demonstration and its DMP weights.
    GenDemo(GenDemo),
    /// Run PI2 optimizations for a model family and write their traces.
    TrainPi2(TrainPi2),
    /// Balance the traces of a `train-pi2` directory into a dataset.
    BuildDataset(BuildDataset),
    /// Fit the task-parameter network on a dataset.
    TrainNn(TrainNn),
    /// Score a trained network's s1 error over random task parameters.
    EvalNn(EvalNn),
    /// Write a seeded synthetic scene (cloud and poses).
    GenScene(GenScene),
    /// Run perception on a point cloud.
    Detect(Detect),
    /// Plan one motion from a point cloud.
    Plan(Plan),
    /// Seeded pick-and-drop comparison of all planners.
    Bench(Bench),
    /// Render benchmark CSV into SVG charts.
    Plot(Plot),
}

#[derive(Args, Debug)]
pub struct GenDemo {
    /// Start-goal distance in meters.
    #[arg(long, default_value_t = 1.0)]
    pub length: f64,
    #[arg(long, default_value_t = 150)]
    pub steps: usize,
    #[arg(long, default_value_t = 3.0)]
    pub duration: f64,
    /// Basis functions for the learned weights.
    #[arg(long, default_value_t = 10)]
    pub basis: usize,
    #[arg(long, default_value = "demo")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainPi2 {
    /// Preset name (1P-2D, 2P-2D, 3P-2D, 3P-3D) or a model TOML file.
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of runs; defaults to 1, `--all-runs` uses the model's count.
    #[arg(long, conflicts_with = "all_runs")]
    pub runs: Option<usize>,
    #[arg(long)]
    pub all_runs: bool,
    #[arg(long)]
    pub rollouts: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BuildDataset {
    /// Directory written by `train-pi2`.
    #[arg(long)]
    pub traces: PathBuf,
    /// Keep runs that hit the iteration limit.
    #[arg(long)]
    pub include_incomplete: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainNn {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalNn {
    /// Trained model file.
    #[arg(long)]
    pub net: PathBuf,
    /// Model family config; defaults to the preset recorded in the file.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Offset under test, fraction of L.
    #[arg(long)]
    pub offset: Option<f64>,
    /// Skip the search for a smaller clean offset.
    #[arg(long)]
    pub no_calibrate: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenScene {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Scenario {
    /// Point cloud, `.pcd` (ASCII) or `x,y,z` CSV.
    #[arg(long)]
    pub cloud: PathBuf,
    /// End-effector position `x,y,z`.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub ee: [f64; 3],
    /// End-effector box extents `x,y,z`.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub ee_dims: Option<[f64; 3]>,
    /// Offset, fraction of L.
    #[arg(long)]
    pub offset: Option<f64>,
}

#[derive(Args, Debug)]
pub struct Detect {
    #[command(flatten)]
    pub scenario: Scenario,
    /// Family whose task parameters to derive.
    #[arg(long, default_value = "3P-2D")]
    pub model: String,
    /// Report file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlannerKind {
    /// Learned planner with RRT-Connect fallback.
    Nn,
    Linear,
    Rrt,
}

#[derive(Args, Debug)]
pub struct Plan {
    #[command(flatten)]
    pub scenario: Scenario,
    #[arg(long, value_enum, default_value_t = PlannerKind::Nn)]
    pub planner: PlannerKind,
    /// Trained model file, needed for `--planner nn`.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Height of the goal above the detected object top.
    #[arg(long)]
    pub hover: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Bench {
    /// Learned methods, `NAME` or `NAME=FILE`; 3P-2D is required.
    #[arg(long = "model", default_values_t = ["3P-2D".to_string(), "1P-2D".to_string()])]
    pub models: Vec<String>,
    /// Where `NAME.model` files are looked up.
    #[arg(long, default_value = "models")]
    pub models_dir: PathBuf,
    #[arg(long)]
    pub scenes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Plot {
    /// Benchmark CSV.
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> error::Result<()> {
    let cfg = Config::layered(&cli.config)?;
    match cli.command {
        Command::GenDemo(a) => commands::gen_demo(&cfg, a),
        Command::TrainPi2(a) => commands::train_pi2(cfg, a),
        Command::BuildDataset(a) => commands::build_dataset(&cfg, a),
        Command::TrainNn(a) => commands::train_nn(cfg, a),
        Command::EvalNn(a) => commands::eval_nn(cfg, a),
        Command::GenScene(a) => commands::gen_scene(&cfg, a),
        Command::Detect(a) => commands::detect(cfg, a),
        Command::Plan(a) => commands::plan(cfg, a),
        Command::Bench(a) => commands::bench(cfg, a),
        Command::Plot(a) => commands::plot(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let err = CliError::usage(e.kind());
            eprintln!("{}", err.machine_line());
            return ExitCode::from(err.kind.code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dmp-avoid: {e}");
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.kind.code() as u8)
        }
    }
}
