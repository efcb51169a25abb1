//! Variant discrimination from prediction errors.
//!
//! At every observation instant the shepherd compares each sheep's observed
//! position against its virtual twin and flags the sheep whose distance
//! exceeds a threshold. The threshold is either a fixed value or the
//! boxplot outlier fence `q3 + 1.5 * IQR` computed over all N distances.
//! Flagged sheep leave the guided set; a sheep flagged more than the strike
//! limit is removed for good, otherwise it rejoins after a fixed delay.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;

/// Threshold selection for flagging.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Fixed distance threshold.
    Static,
    /// Per-instant boxplot fence over the current distance set.
    Dynamic,
}

/// Parameters of the discrimination process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationConfig {
    pub mode: ThresholdMode,
    /// Threshold used in `Static` mode.
    pub static_threshold: f64,
    /// Strikes a sheep may survive; strike `strike_limit + 1` removes it
    /// permanently.
    pub strike_limit: u32,
    /// Steps a benched sheep waits before rejoining the guided set.
    pub reinclusion_delay: u64,
    /// Observation period in steps.
    pub period: u64,
}

/// Membership state of one sheep in the guided set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SheepStatus {
    /// In the guided set.
    Active,
    /// Temporarily excluded after a flag.
    Benched,
    /// Permanently excluded.
    Removed,
}

/// Per-sheep bookkeeping behind the guided set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub status: SheepStatus,
    pub strikes: u32,
    pub last_flagged_step: Option<u64>,
}

/// What happened to a sheep at an observation instant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminationAction {
    /// Flagged as variant and benched.
    Flagged,
    /// Flagged past the strike limit and removed permanently.
    Removed,
    /// Re-included into the guided set after the bench delay.
    Reincluded,
}

/// Log record of one flag, removal, or re-inclusion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationEvent {
    pub step: u64,
    pub sheep: usize,
    pub distance: f64,
    pub threshold: f64,
    pub action: DiscriminationAction,
    /// Ground truth, recorded for metric extraction only; the shepherd
    /// never reads it.
    pub is_variant: bool,
}

/// Linear-interpolation quantile at fractional rank `p * (n - 1)` over a
/// sorted sample.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Boxplot outlier fence `q3 + 1.5 * (q3 - q1)` over the distance set.
pub fn dynamic_threshold(distances: &[f64]) -> f64 {
    debug_assert!(!distances.is_empty());
    let mut sorted = distances.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    q3 + 1.5 * (q3 - q1)
}

/// The guided-set state machine over all N sheep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
}

impl Ledger {
    /// Every sheep starts in the guided set.
    pub fn new(n: usize) -> Self {
        Ledger {
            entries: alloc::vec![
                LedgerEntry { status: SheepStatus::Active, strikes: 0, last_flagged_step: None };
                n
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, i: usize) -> &LedgerEntry {
        &self.entries[i]
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.entries[i].status == SheepStatus::Active
    }

    /// Indices currently in the guided set, ascending.
    pub fn guided_set(&self) -> Vec<usize> {
        (0..self.entries.len()).filter(|&i| self.is_active(i)).collect()
    }

    pub fn active_count(&self) -> usize {
        self.entries.iter().filter(|e| e.status == SheepStatus::Active).count()
    }

    /// One discrimination round at observation step `step` (> 0, on the
    /// period). Returns the threshold used and appends one event per flag,
    /// removal, or re-inclusion.
    ///
    /// Phase 1 flags every active sheep whose distance strictly exceeds the
    /// threshold; phase 2 then re-includes benched sheep whose delay has
    /// passed. The phases never interleave, so a sheep benched in phase 1
    /// of the same round is not immediately re-included (its delay starts
    /// now), and a sheep re-included in phase 2 cannot be flagged until the
    /// next round.
    pub fn discriminate(
        &mut self,
        distances: &[f64],
        step: u64,
        cfg: &DiscriminationConfig,
        first_variant_index: usize,
        events: &mut Vec<DiscriminationEvent>,
    ) -> Result<f64, ScheduleError> {
        if step == 0 || !step.is_multiple_of(cfg.period) {
            return Err(ScheduleError { step, period: cfg.period, context: "discrimination" });
        }
        assert_eq!(distances.len(), self.entries.len(), "distance set must cover all sheep");

        let threshold = match cfg.mode {
            ThresholdMode::Static => cfg.static_threshold,
            ThresholdMode::Dynamic => dynamic_threshold(distances),
        };

        // Phase 1: flag active sheep, ascending index. The boundary is
        // strict: a distance equal to the threshold is not a flag.
        for (i, entry) in self.entries.iter_mut().enumerate() {
            let exceeds = distances[i] > threshold;
            if entry.status != SheepStatus::Active || !exceeds {
                continue;
            }
            entry.strikes += 1;
            entry.last_flagged_step = Some(step);
            let action = if entry.strikes > cfg.strike_limit {
                entry.status = SheepStatus::Removed;
                DiscriminationAction::Removed
            } else {
                entry.status = SheepStatus::Benched;
                DiscriminationAction::Flagged
            };
            events.push(DiscriminationEvent {
                step,
                sheep: i,
                distance: distances[i],
                threshold,
                action,
                is_variant: i >= first_variant_index,
            });
        }

        // Phase 2: re-include benched sheep whose delay has elapsed.
        for (i, entry) in self.entries.iter_mut().enumerate() {
            if entry.status != SheepStatus::Benched {
                continue;
            }
            let flagged = entry.last_flagged_step.expect("benched sheep carries a flag step");
            if step - flagged >= cfg.reinclusion_delay {
                entry.status = SheepStatus::Active;
                events.push(DiscriminationEvent {
                    step,
                    sheep: i,
                    distance: distances[i],
                    threshold,
                    action: DiscriminationAction::Reincluded,
                    is_variant: i >= first_variant_index,
                });
            }
        }

        Ok(threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mode: ThresholdMode) -> DiscriminationConfig {
        DiscriminationConfig {
            mode,
            static_threshold: 5.0,
            strike_limit: 5,
            reinclusion_delay: 20,
            period: 10,
        }
    }

    #[test]
    fn all_equal_distances_yield_threshold_equal_to_value() {
        let d = [3.25; 20];
        assert_eq!(dynamic_threshold(&d), 3.25);
        // No distance strictly exceeds it, so nothing can be flagged.
        assert!(!d.iter().any(|&x| x > dynamic_threshold(&d)));
    }

    #[test]
    fn dynamic_threshold_outlier_fence() {
        // q1 = 2, q3 = 4, IQR = 2, fence = 7.
        let d = [1.0, 2.0, 3.0, 4.0, 100.0];
        assert_eq!(dynamic_threshold(&d), 7.0);
        assert_eq!(d.iter().filter(|&&x| x > 7.0).count(), 1);
    }

    #[test]
    fn dynamic_threshold_degenerate_quartiles() {
        // q1 = q3 = 0, fence = 0; only the 10 exceeds.
        let d = [0.0, 0.0, 0.0, 0.0, 10.0];
        assert_eq!(dynamic_threshold(&d), 0.0);
        assert_eq!(d.iter().filter(|&&x| x > 0.0).count(), 1);
    }

    #[test]
    fn distance_equal_to_threshold_is_not_flagged() {
        let mut ledger = Ledger::new(3);
        let mut events = Vec::new();
        let distances = [5.0, 1.0, 1.0];
        ledger.discriminate(&distances, 10, &cfg(ThresholdMode::Static), 3, &mut events).unwrap();
        assert!(events.is_empty());
        assert_eq!(ledger.guided_set(), vec![0, 1, 2]);
    }

    #[test]
    fn initial_guided_set_is_all_sheep() {
        let ledger = Ledger::new(5);
        assert_eq!(ledger.guided_set(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn off_schedule_call_is_rejected() {
        let mut ledger = Ledger::new(2);
        let mut events = Vec::new();
        let c = cfg(ThresholdMode::Static);
        assert!(ledger.discriminate(&[0.0, 0.0], 7, &c, 2, &mut events).is_err());
        assert!(ledger.discriminate(&[0.0, 0.0], 0, &c, 2, &mut events).is_err());
    }

    #[test]
    fn strike_limit_plus_one_flags_remove_permanently() {
        let c = cfg(ThresholdMode::Static);
        let mut ledger = Ledger::new(2);
        let mut events = Vec::new();
        // Flag sheep 1 at six distinct observation instants. With h = 20 and
        // T = 10 it is benched for two periods after each flag, so flags can
        // land every third instant.
        let mut step = 10;
        while ledger.entry(1).strikes < 6 {
            ledger.discriminate(&[0.0, 9.0], step, &c, 1, &mut events).unwrap();
            step += 10;
        }
        assert_eq!(ledger.entry(1).status, SheepStatus::Removed);
        assert_eq!(ledger.entry(1).strikes, 6);
        // Removed is absorbing: run many more rounds, nothing changes.
        for _ in 0..10 {
            ledger.discriminate(&[0.0, 9.0], step, &c, 1, &mut events).unwrap();
            step += 10;
        }
        assert_eq!(ledger.entry(1).status, SheepStatus::Removed);
        assert_eq!(ledger.entry(1).strikes, 6);
    }

    #[test]
    fn reinclusion_waits_for_the_full_delay() {
        // Benched at k = 10 with h = 20: still out at k = 20, back at k = 30.
        let c = cfg(ThresholdMode::Static);
        let mut ledger = Ledger::new(2);
        let mut events = Vec::new();

        ledger.discriminate(&[0.0, 9.0], 10, &c, 1, &mut events).unwrap();
        assert_eq!(ledger.entry(1).status, SheepStatus::Benched);

        ledger.discriminate(&[0.0, 0.0], 20, &c, 1, &mut events).unwrap();
        assert_eq!(ledger.entry(1).status, SheepStatus::Benched);

        ledger.discriminate(&[0.0, 0.0], 30, &c, 1, &mut events).unwrap();
        assert_eq!(ledger.entry(1).status, SheepStatus::Active);
        assert_eq!(events.last().unwrap().action, DiscriminationAction::Reincluded);
    }

    #[test]
    fn benched_sheep_do_not_accrue_strikes() {
        let c = cfg(ThresholdMode::Static);
        let mut ledger = Ledger::new(2);
        let mut events = Vec::new();

        ledger.discriminate(&[0.0, 9.0], 10, &c, 1, &mut events).unwrap();
        assert_eq!(ledger.entry(1).strikes, 1);

        // Exceeds the threshold again while benched: no new strike, and the
        // sheep still re-includes on schedule at k = 30.
        ledger.discriminate(&[0.0, 9.0], 20, &c, 1, &mut events).unwrap();
        assert_eq!(ledger.entry(1).strikes, 1);

        ledger.discriminate(&[0.0, 9.0], 30, &c, 1, &mut events).unwrap();
        assert_eq!(ledger.entry(1).strikes, 1);
        assert_eq!(ledger.entry(1).status, SheepStatus::Active);

        // Active again: the next exceedance is a real strike.
        ledger.discriminate(&[0.0, 9.0], 40, &c, 1, &mut events).unwrap();
        assert_eq!(ledger.entry(1).strikes, 2);
    }

    #[test]
    fn replaying_the_same_inputs_reproduces_the_ledger() {
        let c = cfg(ThresholdMode::Dynamic);
        let rounds: Vec<(u64, Vec<f64>)> = (1..8)
            .map(|k| (k * 10, (0..6).map(|i| ((i * 7 + k as usize) % 11) as f64).collect()))
            .collect();
        let run = |rounds: &[(u64, Vec<f64>)]| {
            let mut ledger = Ledger::new(6);
            let mut events = Vec::new();
            for (step, d) in rounds {
                ledger.discriminate(d, *step, &c, 4, &mut events).unwrap();
            }
            (ledger, events)
        };
        assert_eq!(run(&rounds), run(&rounds));
    }

    #[test]
    fn events_carry_ground_truth() {
        let c = cfg(ThresholdMode::Static);
        let mut ledger = Ledger::new(3);
        let mut events = Vec::new();
        ledger.discriminate(&[9.0, 0.0, 9.0], 10, &c, 2, &mut events).unwrap();
        assert_eq!(events.len(), 2);
        assert!(!events[0].is_variant); // sheep 0 is ground-truth normal
        assert!(events[1].is_variant); // sheep 2 is ground-truth variant
    }
}
