//! Config loading and result persistence.
//!
//! Inputs are TOML (trial configs and sweep specs; unknown keys are
//! rejected and every field has a reproduction default). Outputs are a
//! pretty-printed JSON report plus flat CSV files; every output carries
//! the content hash of the configuration that produced it.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use shepherding_core::{
    CellStats, SweepOutcome, SweepSpec, TrialConfig, TrialRecord, TrialResult,
};

/// Self-contained output of a single trial: the fully resolved config is
/// echoed for provenance, so the record can be replayed or plotted without
/// the original config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub config: TrialConfig,
    pub result: TrialResult,
}

impl RunRecord {
    pub fn new(config: TrialConfig, result: TrialResult) -> RunRecord {
        RunRecord {
            config_hash: format!("{:016x}", config.content_hash()),
            config,
            result,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }
}

pub fn load_trial_config(path: &Path) -> Result<TrialConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let cfg: TrialConfig = toml::from_str(&text)
        .with_context(|| format!("malformed config file {}", path.display()))?;
    cfg.validate().with_context(|| format!("invalid config in {}", path.display()))?;
    Ok(cfg)
}

pub fn load_sweep_spec(path: &Path) -> Result<SweepSpec> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read sweep spec {}", path.display()))?;
    let spec: SweepSpec = toml::from_str(&text)
        .with_context(|| format!("malformed sweep spec {}", path.display()))?;
    spec.validate().with_context(|| format!("invalid sweep spec in {}", path.display()))?;
    Ok(spec)
}

pub fn load_run_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read trial record {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("{} is not a trial record produced by `run`", path.display()))
}

pub fn load_report(path: &Path) -> Result<shepherding_core::SweepReport> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read report {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("{} is not a report produced by `sweep`", path.display()))
}

/// Writes report.json, trials.csv, and cells.csv into `dir`.
pub fn write_sweep_outputs(dir: &Path, outcome: &SweepOutcome) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let hash = &outcome.report.provenance.config_hash;

    let mut report_json =
        serde_json::to_string_pretty(&outcome.report).expect("report serializes");
    report_json.push('\n');
    fs::write(dir.join("report.json"), report_json).context("writing report.json")?;

    write_trials_csv(&dir.join("trials.csv"), hash, &outcome.trials)?;
    write_cells_csv(&dir.join("cells.csv"), hash, &outcome.report.cells)?;
    Ok(())
}

fn write_trials_csv(path: &Path, config_hash: &str, trials: &[TrialRecord]) -> Result<()> {
    let mut file = fs::File::create(path).context("creating trials.csv")?;
    writeln!(file, "# config_hash={config_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "cell",
        "alpha",
        "m",
        "policy",
        "trial",
        "seed_stream",
        "spawn_hash",
        "terminated_step",
        "terminated_by",
        "normal_in_goal",
        "success_fraction",
        "misjudgement_count",
        "flag_count",
        "flag_threshold_sum",
    ])?;
    for t in trials {
        w.write_record([
            t.cell.to_string(),
            t.alpha.label(),
            t.m.to_string(),
            t.policy.label().to_string(),
            t.trial.to_string(),
            t.seed_stream.to_string(),
            format!("{:016x}", t.spawn_hash),
            t.terminated_step.to_string(),
            t.terminated_by.label().to_string(),
            t.normal_in_goal.to_string(),
            t.success_fraction.to_string(),
            t.misjudgement_count.to_string(),
            t.flag_count.to_string(),
            t.flag_threshold_sum.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_cells_csv(path: &Path, config_hash: &str, cells: &[CellStats]) -> Result<()> {
    let mut file = fs::File::create(path).context("creating cells.csv")?;
    writeln!(file, "# config_hash={config_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "cell",
        "alpha",
        "m",
        "policy",
        "trials",
        "success_rate",
        "mean_steps",
        "mean_misjudgements",
        "mean_flag_threshold",
        "guided_set_empty",
        "aborted",
    ])?;
    for c in cells {
        w.write_record([
            c.cell.to_string(),
            c.alpha.label(),
            c.m.to_string(),
            c.policy.label().to_string(),
            c.trials.to_string(),
            c.success_rate.to_string(),
            c.mean_steps.to_string(),
            c.mean_misjudgements.to_string(),
            c.mean_flag_threshold.map(|t| t.to_string()).unwrap_or_default(),
            c.guided_set_empty.to_string(),
            c.aborted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Trajectory stream export: one row per agent per recorded frame.
pub fn write_trajectory_csv(path: &Path, record: &RunRecord) -> Result<()> {
    let frames = record
        .result
        .trajectory
        .as_ref()
        .context("record has no trajectory; rerun with --record-trajectory")?;
    let n_normal = record.config.n_sheep - record.config.n_variant;
    let mut file = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "# config_hash={}", record.config_hash)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["step", "agent", "kind", "x", "y"])?;
    for frame in frames {
        w.write_record([
            frame.step.to_string(),
            "0".to_string(),
            "shepherd".to_string(),
            frame.shepherd.x.to_string(),
            frame.shepherd.y.to_string(),
        ])?;
        for (i, p) in frame.positions.iter().enumerate() {
            let kind = if i < n_normal { "normal" } else { "variant" };
            w.write_record([
                frame.step.to_string(),
                (i + 1).to_string(),
                kind.to_string(),
                p.x.to_string(),
                p.y.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
