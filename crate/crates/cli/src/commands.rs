//! Command-line surface: `run`, `sweep`, `plot`, `replay`.

use std::path::PathBuf;

use anyhow::{Context, Result, bail};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use shepherding_core::{
    Policy, SweepOutcome, SweepSpec, TrialConfig, TrialRecord, aggregate_report, plan_cells,
    run_trial, run_trial_record,
};

use crate::charts;
use crate::files::{
    self, RunRecord, load_run_record, load_report, load_sweep_spec, load_trial_config,
};

/// Deterministic shepherding simulator and experiment harness.
///
/// Set RUST_LOG (e.g. `RUST_LOG=info`) to control log verbosity.
#[derive(Parser, Debug)]
#[command(name = "shepherding", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a single trial and emit its JSON record.
    Run(RunArgs),
    /// Run a full sweep and write report.json, trials.csv, and cells.csv.
    Sweep(SweepArgs),
    /// Render figures from a sweep report or a trial record.
    Plot(PlotArgs),
    /// Render the trajectory frames of a recorded trial.
    Replay(ReplayArgs),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Trial config (TOML); omitted fields take the reproduction defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the policy.
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Record downsampled trajectory frames in the output record.
    #[arg(long)]
    record_trajectory: bool,
    /// Write record.json (and trajectory.csv when recorded) into this
    /// directory instead of printing JSON to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct SweepArgs {
    /// Sweep spec (TOML); omitted fields take the full-scale defaults.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for trial execution (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(clap::Args, Debug)]
struct PlotArgs {
    /// Input file: report.json for the aggregate kinds, record.json for
    /// trajectory_frames.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// Output directory for the SVG files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct ReplayArgs {
    /// record.json of a trial run with --record-trajectory.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory for the frame SVGs.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Fat,
    Static,
    Dynamic,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Policy {
        match p {
            PolicyArg::Fat => Policy::Fat,
            PolicyArg::Static => Policy::Static,
            PolicyArg::Dynamic => Policy::Dynamic,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PlotKind {
    SuccessVsM,
    TimeVsM,
    ThresholdScatter,
    MisjudgementScatter,
    TrajectoryFrames,
}

pub fn main_impl() -> Result<()> {
    let cli = Cli::parse();
    dispatch(cli)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Plot(args) => cmd_plot(args),
        Command::Replay(args) => cmd_replay(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => load_trial_config(path)?,
        None => TrialConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(policy) = args.policy {
        cfg.policy = policy.into();
    }
    if args.record_trajectory {
        cfg.record_trajectory = true;
    }
    cfg.validate().context("invalid trial config after overrides")?;

    log::info!(
        "running trial: policy {}, N {}, M {}, seed {} stream {}",
        cfg.policy.label(),
        cfg.n_sheep,
        cfg.n_variant,
        cfg.seed,
        cfg.seed_stream
    );
    let result = run_trial(cfg.clone()).context("trial config rejected")?;
    log::info!(
        "terminated by {} at step {} with success {:.2}",
        result.terminated_by.label(),
        result.terminated_step,
        result.success_fraction
    );
    let record = RunRecord::new(cfg, result);
    match args.out {
        None => print!("{}", record.to_json()),
        Some(dir) => {
            std::fs::create_dir_all(&dir)
                .with_context(|| format!("cannot create {}", dir.display()))?;
            let record_path = dir.join("record.json");
            std::fs::write(&record_path, record.to_json())
                .with_context(|| format!("writing {}", record_path.display()))?;
            println!("{}", record_path.display());
            if record.result.trajectory.is_some() {
                let csv_path = dir.join("trajectory.csv");
                files::write_trajectory_csv(&csv_path, &record)?;
                println!("{}", csv_path.display());
            }
        }
    }
    Ok(())
}

/// Trials are independent; fan them out over the worker pool and fold the
/// records in pinned cell order.
pub fn run_sweep_parallel(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepOutcome> {
    if let Some(jobs) = jobs {
        // Ignore the error when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    spec.validate()?;
    let cells = plan_cells(spec);
    let mut records: Vec<TrialRecord> = cells
        .par_iter()
        .flat_map_iter(|cell| (0..spec.trials_per_cell).map(move |trial| (cell, trial)))
        .map(|(cell, trial)| run_trial_record(spec, cell, trial))
        .collect();
    let report = aggregate_report(spec, &mut records);
    Ok(SweepOutcome { report, trials: records })
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let spec = load_sweep_spec(&args.spec)?;
    let cells = plan_cells(&spec).len();
    log::info!(
        "sweep: {cells} cells x {} trials (config hash {})",
        spec.trials_per_cell,
        spec.config_hash()
    );
    let started = std::time::Instant::now();
    let outcome = run_sweep_parallel(&spec, args.jobs)?;
    log::info!("sweep finished in {:.1}s", started.elapsed().as_secs_f64());
    files::write_sweep_outputs(&args.out, &outcome)?;
    println!("{}", args.out.join("report.json").display());
    println!("{}", args.out.join("trials.csv").display());
    println!("{}", args.out.join("cells.csv").display());
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let files = match args.kind {
        PlotKind::TrajectoryFrames => {
            let record = load_run_record(&args.input)?;
            charts::emit_trajectory_frames(&record, &args.out)?
        }
        kind => {
            let report = load_report(&args.input)?;
            if report.cells.is_empty() {
                bail!("report {} holds no cells", args.input.display());
            }
            match kind {
                PlotKind::SuccessVsM => charts::emit_success_vs_m(&report, &args.out)?,
                PlotKind::TimeVsM => charts::emit_time_vs_m(&report, &args.out)?,
                PlotKind::ThresholdScatter => charts::emit_threshold_scatter(&report, &args.out)?,
                PlotKind::MisjudgementScatter => {
                    charts::emit_misjudgement_scatter(&report, &args.out)?
                }
                PlotKind::TrajectoryFrames => unreachable!(),
            }
        }
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let record = load_run_record(&args.input)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let files = charts::emit_trajectory_frames(&record, &args.out)?;
    log::info!("rendered {} frames", files.len());
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}
