//! Sweep planning, execution, and aggregation.
//!
//! A sweep runs every (variant mask, variant count, policy) cell over a set
//! of seeded trials. Trial `j` of every cell uses stream `j` of the master
//! seed, so all cells and all policies see the same initial arrangements
//! and results are comparable across methods. Aggregation is a
//! deterministic fold in cell order, independent of execution order.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::{Policy, TrialConfig};
use crate::discrimination::DiscriminationAction;
use crate::engine::{Termination, Trial, count_misjudgements};
use crate::error::ConfigError;
use crate::flock::ForceMask;
use crate::fnv::Fnv64;

/// Description of a full sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Variant masks to sweep; defaults to all 14 non-trivial masks.
    pub alpha_set: Vec<ForceMask>,
    /// Variant counts to sweep.
    pub m_values: Vec<usize>,
    /// Policies to compare on matched arrangements.
    pub policies: Vec<Policy>,
    pub trials_per_cell: usize,
    pub master_seed: u64,
    /// Base trial configuration; the sweep overrides mask, variant count,
    /// policy, seed, and stream per trial.
    pub base: TrialConfig,
}

impl Default for SweepSpec {
    /// Full-scale reproduction: 100 arrangements per cell, M from 1 to 10.
    fn default() -> Self {
        SweepSpec {
            alpha_set: ForceMask::all_non_trivial(),
            m_values: (1..=10).collect(),
            policies: alloc::vec![Policy::Fat, Policy::Static, Policy::Dynamic],
            trials_per_cell: 100,
            master_seed: 0,
            base: TrialConfig::default(),
        }
    }
}

impl SweepSpec {
    /// Reduced preset for desk runs and CI: 20 arrangements per cell,
    /// M in {1, 4, 7, 10}.
    pub fn desk_scale() -> Self {
        SweepSpec {
            m_values: alloc::vec![1, 4, 7, 10],
            trials_per_cell: 20,
            ..SweepSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.alpha_set.is_empty() {
            return Err(ConfigError::new("alpha_set", "must list at least one variant mask"));
        }
        if self.m_values.is_empty() {
            return Err(ConfigError::new("m_values", "must list at least one variant count"));
        }
        if self.policies.is_empty() {
            return Err(ConfigError::new("policies", "must list at least one policy"));
        }
        if self.trials_per_cell == 0 {
            return Err(ConfigError::new("trials_per_cell", "must be at least 1"));
        }
        for (idx, mask) in self.alpha_set.iter().enumerate() {
            if mask.is_trivial() && self.m_values.iter().any(|&m| m > 0) {
                return Err(ConfigError::new(
                    "alpha_set",
                    alloc::format!("entry {idx} is a trivial mask ({})", mask.label()),
                ));
            }
        }
        self.base.validate()?;
        let max_m = self.m_values.iter().copied().max().unwrap_or(0);
        if max_m > self.base.n_sheep {
            return Err(ConfigError::new(
                "m_values",
                alloc::format!("largest variant count {} exceeds n_sheep {}", max_m, self.base.n_sheep),
            ));
        }
        Ok(())
    }

    /// Stable content hash tagging every file derived from this spec.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        for mask in &self.alpha_set {
            for f in mask.flags() {
                h.write_u8(f as u8);
            }
        }
        for &m in &self.m_values {
            h.write_usize(m);
        }
        for p in &self.policies {
            h.write(p.label().as_bytes());
        }
        h.write_usize(self.trials_per_cell);
        h.write_u64(self.master_seed);
        h.write_u64(self.base.content_hash());
        h.finish()
    }

    pub fn config_hash(&self) -> String {
        alloc::format!("{:016x}", self.content_hash())
    }
}

/// One (mask, variant count, policy) combination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub alpha: ForceMask,
    pub m: usize,
    pub policy: Policy,
}

/// Cells in their pinned order: mask-major, then variant count, then policy.
pub fn plan_cells(spec: &SweepSpec) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &alpha in &spec.alpha_set {
        for &m in &spec.m_values {
            for &policy in &spec.policies {
                cells.push(Cell { index: cells.len(), alpha, m, policy });
            }
        }
    }
    cells
}

/// The fully resolved config of trial `trial` in `cell`.
pub fn trial_config(spec: &SweepSpec, cell: &Cell, trial: usize) -> TrialConfig {
    TrialConfig {
        alpha: cell.alpha,
        n_variant: cell.m,
        policy: cell.policy,
        seed: spec.master_seed,
        seed_stream: trial as u64,
        beta: spec.base.beta,
        ..spec.base.clone()
    }
}

/// Flat summary of one sweep trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: usize,
    pub alpha: ForceMask,
    pub m: usize,
    pub policy: Policy,
    pub trial: usize,
    pub seed_stream: u64,
    pub spawn_hash: u64,
    pub terminated_step: u64,
    pub terminated_by: Termination,
    pub normal_in_goal: usize,
    pub success_fraction: f64,
    pub misjudgement_count: usize,
    /// Number of flag events (including removals).
    pub flag_count: usize,
    /// Sum of the thresholds in force at those flag events.
    pub flag_threshold_sum: f64,
}

/// Runs one sweep trial and summarizes it.
pub fn run_trial_record(spec: &SweepSpec, cell: &Cell, trial: usize) -> TrialRecord {
    let cfg = trial_config(spec, cell, trial);
    let result = Trial::new(cfg).expect("sweep spec was validated").run();
    let flags: Vec<f64> = result
        .events
        .iter()
        .filter(|e| e.action != DiscriminationAction::Reincluded)
        .map(|e| e.threshold)
        .collect();
    debug_assert_eq!(result.misjudgement_count, count_misjudgements(&result.events));
    TrialRecord {
        cell: cell.index,
        alpha: cell.alpha,
        m: cell.m,
        policy: cell.policy,
        trial,
        seed_stream: trial as u64,
        spawn_hash: result.spawn_hash,
        terminated_step: result.terminated_step,
        terminated_by: result.terminated_by,
        normal_in_goal: result.normal_in_goal,
        success_fraction: result.success_fraction,
        misjudgement_count: result.misjudgement_count,
        flag_count: flags.len(),
        flag_threshold_sum: flags.iter().sum(),
    }
}

/// Aggregated statistics of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub cell: usize,
    pub alpha: ForceMask,
    pub m: usize,
    pub policy: Policy,
    pub trials: usize,
    /// Mean success fraction as a percentage.
    pub success_rate: f64,
    pub mean_steps: f64,
    pub mean_misjudgements: f64,
    /// Mean threshold over the cell's flag events. For the static policy
    /// this is the configured threshold even when no flag occurred; for the
    /// dynamic policy it is undefined (absent) without flags.
    pub mean_flag_threshold: Option<f64>,
    /// Trials that ended by emptying the guided set.
    pub guided_set_empty: usize,
    /// Trials aborted on non-finite state.
    pub aborted: usize,
}

/// Folds the per-trial records of one cell.
pub fn aggregate_cell(cell: &Cell, base: &TrialConfig, records: &[TrialRecord]) -> CellStats {
    assert!(!records.is_empty(), "a cell must hold at least one trial");
    debug_assert!(records.iter().all(|r| r.cell == cell.index));
    let n = records.len() as f64;
    let success_rate = 100.0 * records.iter().map(|r| r.success_fraction).sum::<f64>() / n;
    let mean_steps = records.iter().map(|r| r.terminated_step as f64).sum::<f64>() / n;
    let mean_misjudgements = records.iter().map(|r| r.misjudgement_count as f64).sum::<f64>() / n;
    let flag_count: usize = records.iter().map(|r| r.flag_count).sum();
    let flag_threshold_sum: f64 = records.iter().map(|r| r.flag_threshold_sum).sum();
    let mean_flag_threshold = if flag_count > 0 {
        Some(flag_threshold_sum / flag_count as f64)
    } else if cell.policy == Policy::Static {
        Some(base.static_threshold)
    } else {
        None
    };
    CellStats {
        cell: cell.index,
        alpha: cell.alpha,
        m: cell.m,
        policy: cell.policy,
        trials: records.len(),
        success_rate,
        mean_steps,
        mean_misjudgements,
        mean_flag_threshold,
        guided_set_empty: records
            .iter()
            .filter(|r| r.terminated_by == Termination::GuidedSetEmpty)
            .count(),
        aborted: records.iter().filter(|r| r.terminated_by == Termination::NonFinite).count(),
    }
}

/// Provenance block carried by every sweep output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub code_version: String,
    pub master_seed: u64,
    /// Per-trial stream indices (shared by every cell).
    pub seed_streams: Vec<u64>,
}

/// Aggregated sweep output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub spec: SweepSpec,
    pub cells: Vec<CellStats>,
}

/// Report plus the flat per-trial records behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub report: SweepReport,
    pub trials: Vec<TrialRecord>,
}

/// Builds the report from records in any order; the fold itself is pinned
/// to (cell, trial) order.
pub fn aggregate_report(spec: &SweepSpec, records: &mut [TrialRecord]) -> SweepReport {
    records.sort_unstable_by_key(|r| (r.cell, r.trial));
    let cells = plan_cells(spec);
    let stats = cells
        .iter()
        .map(|cell| {
            let lo = records.partition_point(|r| r.cell < cell.index);
            let hi = records.partition_point(|r| r.cell <= cell.index);
            aggregate_cell(cell, &spec.base, &records[lo..hi])
        })
        .collect();
    SweepReport {
        provenance: Provenance {
            config_hash: spec.config_hash(),
            code_version: String::from(env!("CARGO_PKG_VERSION")),
            master_seed: spec.master_seed,
            seed_streams: (0..spec.trials_per_cell as u64).collect(),
        },
        spec: spec.clone(),
        cells: stats,
    }
}

/// Runs the whole sweep serially. Trials are independent, so drivers that
/// want parallelism can map [`run_trial_record`] over
/// `plan_cells x trials_per_cell` themselves and feed [`aggregate_report`].
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome, ConfigError> {
    spec.validate()?;
    let cells = plan_cells(spec);
    let mut records = Vec::with_capacity(cells.len() * spec.trials_per_cell);
    for cell in &cells {
        for trial in 0..spec.trials_per_cell {
            records.push(run_trial_record(spec, cell, trial));
        }
    }
    let report = aggregate_report(spec, &mut records);
    Ok(SweepOutcome { report, trials: records })
}

/// One point of the threshold-versus-success scatter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub alpha: ForceMask,
    pub m: usize,
    pub policy: Policy,
    /// Mean threshold at flag events; `None` marks threshold-undefined
    /// dynamic cells (no flags ever occurred).
    pub threshold: Option<f64>,
    pub success_rate: f64,
}

/// Scatter data per variant count: one point per (mask, threshold mode).
pub fn threshold_scatter(cells: &[CellStats]) -> Vec<ScatterPoint> {
    cells
        .iter()
        .filter(|c| c.policy.discriminates())
        .map(|c| ScatterPoint {
            alpha: c.alpha,
            m: c.m,
            policy: c.policy,
            threshold: c.mean_flag_threshold,
            success_rate: c.success_rate,
        })
        .collect()
}

/// Product-moment correlation; `None` when either variance vanishes or
/// fewer than two points are given.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / libm::sqrt(sxx * syy))
}

/// Per-cell (success rate, misjudgement count) pairs of one policy, plus
/// their correlation. Needs at least three cells to be meaningful.
pub fn misjudgement_correlation(
    cells: &[CellStats],
    policy: Policy,
) -> (Vec<(f64, f64)>, Option<f64>) {
    let points: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.policy == policy)
        .map(|c| (c.success_rate, c.mean_misjudgements))
        .collect();
    if points.len() < 3 {
        return (points, None);
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let r = pearson(&xs, &ys);
    (points, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SweepSpec {
        SweepSpec {
            alpha_set: alloc::vec![ForceMask::new(true, false, false, false)],
            m_values: alloc::vec![1, 4],
            policies: alloc::vec![Policy::Fat, Policy::Static],
            trials_per_cell: 2,
            master_seed: 7,
            base: TrialConfig { max_steps: 60, ..TrialConfig::default() },
        }
    }

    #[test]
    fn cell_planning_cardinality() {
        let spec = SweepSpec {
            m_values: alloc::vec![1, 4, 7, 10],
            ..tiny_spec()
        };
        // 1 mask x 4 variant counts x 2 policies.
        assert_eq!(plan_cells(&spec).len(), 8);
        let full = SweepSpec::default();
        assert_eq!(plan_cells(&full).len(), 14 * 10 * 3);
        for (i, cell) in plan_cells(&spec).iter().enumerate() {
            assert_eq!(cell.index, i);
        }
    }

    #[test]
    fn single_trial_cell_reports_that_trial() {
        let spec = SweepSpec { trials_per_cell: 1, ..tiny_spec() };
        let outcome = run_sweep(&spec).unwrap();
        for stats in &outcome.report.cells {
            let record = outcome.trials.iter().find(|r| r.cell == stats.cell).unwrap();
            assert_eq!(stats.trials, 1);
            assert_eq!(stats.success_rate, 100.0 * record.success_fraction);
            assert_eq!(stats.mean_steps, record.terminated_step as f64);
            assert_eq!(stats.mean_misjudgements, record.misjudgement_count as f64);
        }
    }

    #[test]
    fn arrangements_match_across_cells_and_policies() {
        let outcome = run_sweep(&tiny_spec()).unwrap();
        for trial in 0..2 {
            let hashes: Vec<u64> = outcome
                .trials
                .iter()
                .filter(|r| r.trial == trial)
                .map(|r| r.spawn_hash)
                .collect();
            assert!(hashes.len() >= 4);
            assert!(hashes.windows(2).all(|w| w[0] == w[1]), "trial {trial} arrangements differ");
        }
    }

    #[test]
    fn cell_means_match_persisted_records() {
        let outcome = run_sweep(&tiny_spec()).unwrap();
        for stats in &outcome.report.cells {
            let records: Vec<&TrialRecord> =
                outcome.trials.iter().filter(|r| r.cell == stats.cell).collect();
            let mean_success =
                100.0 * records.iter().map(|r| r.success_fraction).sum::<f64>() / records.len() as f64;
            assert!((stats.success_rate - mean_success).abs() < 1e-12);
        }
    }

    #[test]
    fn report_is_reproducible() {
        let spec = tiny_spec();
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep(&spec).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.trials, b.trials);
    }

    #[test]
    fn static_scatter_sits_on_the_configured_threshold() {
        let spec = SweepSpec {
            policies: alloc::vec![Policy::Static, Policy::Dynamic],
            ..tiny_spec()
        };
        let outcome = run_sweep(&spec).unwrap();
        let points = threshold_scatter(&outcome.report.cells);
        // One point per (mask, mode) per variant count.
        assert_eq!(points.len(), 4);
        for p in &points {
            if p.policy == Policy::Static {
                assert_eq!(p.threshold, Some(5.0));
            }
        }
    }

    #[test]
    fn pearson_known_cases() {
        assert_eq!(pearson(&[1.0, 2.0], &[2.0, 1.0]), Some(-1.0));
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), None);
        let (points, r) = misjudgement_correlation(&[], Policy::Static);
        assert!(points.is_empty());
        assert_eq!(r, None);
    }

    #[test]
    fn spec_validation_rejects_oversized_m() {
        let spec = SweepSpec { m_values: alloc::vec![25], ..tiny_spec() };
        assert_eq!(spec.validate().unwrap_err().field, "m_values");
    }
}
