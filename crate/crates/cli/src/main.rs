//! Command-line harness: run experiments, record demonstrations from joint
//! trajectories, transfer a demonstration to another robot, and emit plot
//! data from recorded trajectories.
//!
//! Exit codes: 0 success, 2 non-convergence, 3 avoidance failure,
//! 4 config/parse error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use screwplan::error::Error;
use screwplan::formats;
use screwplan::planner::PosePath;
use screwplan::sim::{
    self, ExperimentConfig, RunStatus, SimParams, TrackingMode, TrajectoryRecord,
};
use screwplan::SerialManipulator;

#[derive(Parser)]
#[command(
    name = "screwplan",
    about = "Demonstration-guided task-space planning with reactive obstacle avoidance",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment (planner + avoidance + controller).
    Run(RunArgs),
    /// Record a demonstration file from a joint-space trajectory.
    RecordDemo(RecordArgs),
    /// Replay a demonstration toward a new goal on another robot.
    Retarget(RetargetArgs),
    /// Emit plot CSV series and a plot script from a recorded trajectory.
    Plots(PlotsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (TOML); flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Robot: bundled name (planar2, planar3, spatial7) or model file path.
    #[arg(long)]
    robot: Option<String>,
    /// Demonstration file (one pose per line).
    #[arg(long)]
    demo: Option<PathBuf>,
    /// Obstacle scene file.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Goal pose: 8 or 7 comma/space separated scalars.
    #[arg(long, allow_hyphen_values = true)]
    goal: Option<String>,
    /// Start pose (8 or 7 scalars); alternative to --start-config.
    #[arg(long, allow_hyphen_values = true)]
    start_pose: Option<String>,
    /// Start joint configuration (comma/space separated).
    #[arg(long, allow_hyphen_values = true)]
    start_config: Option<String>,
    /// ScLERP step fraction per planner iteration.
    #[arg(long)]
    tau: Option<f64>,
    /// Initial guiding-pose fraction of the imitated path.
    #[arg(long)]
    guiding_fraction: Option<f64>,
    /// Escape-tree plane diagonal length (meters).
    #[arg(long)]
    k_eta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for trajectory.csv, summary.txt and plot data.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RecordArgs {
    #[arg(long)]
    robot: String,
    /// Joint trajectory file: one configuration per line.
    #[arg(long)]
    joints: PathBuf,
    /// Demonstration file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RetargetArgs {
    #[arg(long)]
    demo: PathBuf,
    /// Target robot executing the plan.
    #[arg(long)]
    robot: String,
    /// New goal pose: 8 or 7 scalars.
    #[arg(long, allow_hyphen_values = true)]
    goal: String,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the executed trajectory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotsArgs {
    /// trajectory.csv produced by `run`.
    #[arg(long)]
    trajectory: PathBuf,
    /// Directory for the plot series (defaults to the trajectory's parent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn merge_run_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut config = match &args.config {
        Some(path) => {
            let content = std::fs::read_to_string(path)?;
            ExperimentConfig::from_toml_str_partial(&content)?
        }
        None => ExperimentConfig::default(),
    };

    if let Some(robot) = &args.robot {
        config.robot = robot.clone();
    }
    if let Some(demo) = &args.demo {
        config.demo = demo.to_string_lossy().into_owned();
    }
    if let Some(scene) = &args.scene {
        config.scene = Some(scene.to_string_lossy().into_owned());
    }
    if let Some(goal) = &args.goal {
        config.goal = formats::parse_scalars(goal)?;
    }
    if let Some(pose) = &args.start_pose {
        config.start_pose = Some(formats::parse_scalars(pose)?);
        config.start_config = None;
    }
    if let Some(q) = &args.start_config {
        config.start_config = Some(formats::parse_scalars(q)?);
        config.start_pose = None;
    }
    if let Some(tau) = args.tau {
        config.planner.tau_step = tau;
    }
    if let Some(f) = args.guiding_fraction {
        config.planner.guiding_fraction = f;
    }
    if let Some(k) = args.k_eta {
        config.repet.k_eta = Some(k);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out = Some(out.to_string_lossy().into_owned());
    }

    if config.robot.is_empty() {
        return Err(Error::InvalidInput("--robot (or a config file) is required".into()));
    }
    if config.demo.is_empty() {
        return Err(Error::InvalidInput("--demo (or a config file) is required".into()));
    }
    if config.goal.is_empty() {
        return Err(Error::InvalidInput("--goal (or a config file) is required".into()));
    }
    config.validate()?;
    Ok(config)
}

fn cmd_run(args: RunArgs) -> Result<RunStatus, Error> {
    let config = merge_run_config(&args)?;
    let artifacts = sim::run_experiment(&config)?;
    eprintln!("{}", artifacts.summary.to_text());
    Ok(artifacts.summary.status)
}

fn cmd_record(args: RecordArgs) -> Result<(), Error> {
    let model = SerialManipulator::resolve(&args.robot)?;
    let trajectory = sim::read_joint_trajectory(&args.joints, model.dof())?;
    let demo = sim::record_demo(&model, &trajectory)?;
    formats::write_demo_file(&args.out, &demo)?;
    eprintln!("wrote {} poses to {}", demo.len(), args.out.display());
    Ok(())
}

fn cmd_retarget(args: RetargetArgs) -> Result<RunStatus, Error> {
    let model = SerialManipulator::resolve(&args.robot)?;
    let demo = PosePath::demonstrated(formats::read_demo_file(&args.demo)?)?;
    let goal = formats::pose_from_scalars(&formats::parse_scalars(&args.goal)?)?;
    let mut planner = screwplan::PlannerParams::default();
    if let Some(tau) = args.tau {
        planner.tau_step = tau;
    }
    let sim_params = SimParams { tracking: TrackingMode::Converge, ..Default::default() };
    let outcome = sim::retarget_demo(
        &demo,
        &model,
        &goal,
        &planner,
        &Default::default(),
        &sim_params,
        args.seed.unwrap_or(0),
    )?;

    let max_dev = outcome
        .fp_ideal
        .iter()
        .zip(outcome.fp_executed.iter())
        .map(|(a, b)| screwplan::pose_distance(a, b))
        .fold(0.0f64, f64::max);
    eprintln!(
        "task-space deviation from the robot-free plan: max {max_dev:.3e} over {} poses",
        outcome.fp_ideal.len().min(outcome.fp_executed.len())
    );
    eprintln!("{}", outcome.artifacts.summary.to_text());

    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(
            out.join("trajectory.csv"),
            outcome.artifacts.record.to_csv(model.dof()),
        )?;
        std::fs::write(out.join("summary.txt"), outcome.artifacts.summary.to_text())?;
    }
    Ok(outcome.artifacts.summary.status)
}

fn cmd_plots(args: PlotsArgs) -> Result<(), Error> {
    let content = std::fs::read_to_string(&args.trajectory)?;
    let (record, _dof) = TrajectoryRecord::from_csv(&content)?;
    let out = match &args.out {
        Some(dir) => dir.clone(),
        None => args
            .trajectory
            .parent()
            .unwrap_or(Path::new("."))
            .to_path_buf(),
    };
    sim::emit_plots(&record, &out)?;
    eprintln!("plot data written to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome: Result<RunStatus, Error> = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::RecordDemo(args) => cmd_record(args).map(|_| RunStatus::Success),
        Command::Retarget(args) => cmd_retarget(args),
        Command::Plots(args) => cmd_plots(args).map(|_| RunStatus::Success),
    };
    match outcome {
        Ok(status) => {
            if status != RunStatus::Success {
                eprintln!("run ended with: {}", status.label());
            }
            ExitCode::from(status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
