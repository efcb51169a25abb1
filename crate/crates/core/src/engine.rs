//! One trial: spawn, the per-step schedule, termination, and metrics.
//!
//! Step `k` proceeds as: (1) on observation instants, discriminate against
//! the virtual flock (pre-reposition distances) and refresh the target over
//! the guided set; (2) compute the shepherd, sheep, and virtual
//! displacements from the time-`k` snapshot; (3) commit all updates at
//! once, including the virtual re-positioning; (4) check termination on the
//! new state. Everything is a pure function of the config, so a trial
//! replays bit-identically.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::TrialConfig;
use crate::discrimination::{DiscriminationAction, DiscriminationConfig, DiscriminationEvent, Ledger};
use crate::error::ConfigError;
use crate::flock::Flock;
use crate::fnv::Fnv64;
use crate::rng::TrialRng;
use crate::shepherd::{farthest_from_goal, nearest_sheep, shepherd_displacement};
use crate::vec2::Vec2;
use crate::virtual_flock::{RepositionMode, VirtualFlock};

/// How a trial ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every guided sheep is strictly inside the goal disk.
    GoalReached,
    /// Discrimination emptied the guided set; no target can be selected.
    GuidedSetEmpty,
    /// The step budget ran out.
    MaxSteps,
    /// A position or displacement overflowed to a non-finite value
    /// (near-collision blow-up); counted as a failure.
    NonFinite,
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::GoalReached => "goal_reached",
            Termination::GuidedSetEmpty => "guided_set_empty",
            Termination::MaxSteps => "max_steps",
            Termination::NonFinite => "non_finite",
        }
    }
}

/// One downsampled trajectory snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub step: u64,
    pub shepherd: Vec2,
    /// Current target sheep, when one is selected.
    pub target: Option<usize>,
    pub positions: Vec<Vec2>,
}

/// Outcome and metrics of a completed trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub terminated_step: u64,
    pub terminated_by: Termination,
    /// Ground-truth-normal sheep strictly inside the goal at the end.
    pub normal_in_goal: usize,
    /// `normal_in_goal / (N - M)`; 1.0 when there are no normal sheep.
    pub success_fraction: f64,
    /// Flag events on ground-truth-normal sheep.
    pub misjudgement_count: usize,
    pub events: Vec<DiscriminationEvent>,
    pub trajectory: Option<Vec<Frame>>,
    /// Fingerprint of the initial arrangement.
    pub spawn_hash: u64,
}

/// Number of flag events (including removals) on ground-truth-normal sheep.
pub fn count_misjudgements(events: &[DiscriminationEvent]) -> usize {
    events
        .iter()
        .filter(|e| !e.is_variant && e.action != DiscriminationAction::Reincluded)
        .count()
}

/// Number of distinct ground-truth-normal sheep ever flagged.
pub fn count_misjudged_sheep(events: &[DiscriminationEvent]) -> usize {
    let mut seen: Vec<usize> = events
        .iter()
        .filter(|e| !e.is_variant && e.action != DiscriminationAction::Reincluded)
        .map(|e| e.sheep)
        .collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Uniform positions on the open disk of `radius` about the origin, via the
/// square-root radius transform. Two draws per sheep, in index order.
pub fn spawn_positions(n: usize, radius: f64, rng: &mut TrialRng) -> Vec<Vec2> {
    (0..n)
        .map(|_| {
            let r = radius * libm::sqrt(rng.uniform());
            let theta = core::f64::consts::TAU * rng.uniform();
            Vec2::new(r * libm::cos(theta), r * libm::sin(theta))
        })
        .collect()
}

/// Order-sensitive fingerprint of an arrangement.
pub fn spawn_hash(positions: &[Vec2]) -> u64 {
    let mut h = Fnv64::new();
    for p in positions {
        h.write_f64(p.x);
        h.write_f64(p.y);
    }
    h.finish()
}

/// A single trial in progress.
pub struct Trial {
    cfg: TrialConfig,
    disc: DiscriminationConfig,
    estimated_gains: [f64; 4],
    flock: Flock,
    virtual_flock: VirtualFlock,
    shepherd: Vec2,
    target: usize,
    ledger: Ledger,
    step: u64,
    events: Vec<DiscriminationEvent>,
    trajectory: Option<Vec<Frame>>,
    spawn_hash: u64,
    outcome: Option<(Termination, u64)>,
}

impl Trial {
    /// Spawns a trial from its config using the pinned generator.
    pub fn new(cfg: TrialConfig) -> Result<Trial, ConfigError> {
        cfg.validate()?;
        let mut rng = TrialRng::new(cfg.seed, cfg.seed_stream);
        let positions = spawn_positions(cfg.n_sheep, cfg.spawn_radius, &mut rng);
        Ok(Self::from_positions(cfg, positions))
    }

    /// Builds a trial on explicit initial positions (replays, tests).
    pub fn with_positions(cfg: TrialConfig, positions: Vec<Vec2>) -> Result<Trial, ConfigError> {
        cfg.validate()?;
        if positions.len() != cfg.n_sheep {
            return Err(ConfigError::new(
                "n_sheep",
                alloc::format!("{} initial positions given for {} sheep", positions.len(), cfg.n_sheep),
            ));
        }
        Ok(Self::from_positions(cfg, positions))
    }

    fn from_positions(cfg: TrialConfig, positions: Vec<Vec2>) -> Trial {
        let hash = spawn_hash(&positions);
        let virtual_flock = VirtualFlock::new(&positions);
        let flock = Flock::new(positions, cfg.normal_profile, cfg.alpha, cfg.n_variant);
        let ledger = Ledger::new(cfg.n_sheep);
        let estimated_gains = cfg.gain_estimate().scaled_gains(&cfg.normal_profile);
        let trajectory = cfg.record_trajectory.then(Vec::new);
        Trial {
            disc: cfg.discrimination(),
            shepherd: cfg.shepherd_start,
            estimated_gains,
            cfg,
            flock,
            virtual_flock,
            target: 0,
            ledger,
            step: 0,
            events: Vec::new(),
            trajectory,
            spawn_hash: hash,
            outcome: None,
        }
    }

    pub fn config(&self) -> &TrialConfig {
        &self.cfg
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn flock(&self) -> &Flock {
        &self.flock
    }

    pub fn virtual_flock(&self) -> &VirtualFlock {
        &self.virtual_flock
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn shepherd_position(&self) -> Vec2 {
        self.shepherd
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn guided_set(&self) -> Vec<usize> {
        self.ledger.guided_set()
    }

    pub fn events(&self) -> &[DiscriminationEvent] {
        &self.events
    }

    /// Current prediction-error distances against the virtual flock.
    pub fn prediction_errors(&self) -> Vec<f64> {
        self.virtual_flock.prediction_errors(self.flock.positions())
    }

    pub fn finished(&self) -> Option<(Termination, u64)> {
        self.outcome
    }

    fn in_goal(&self, p: Vec2) -> bool {
        self.cfg.goal_center.distance(p) < self.cfg.goal_radius
    }

    fn record_frame(&mut self, target: Option<usize>) {
        let step = self.step;
        let shepherd = self.shepherd;
        let positions = self.flock.positions().to_vec();
        if let Some(frames) = self.trajectory.as_mut() {
            frames.push(Frame { step, shepherd, target, positions });
        }
    }

    fn finish(&mut self, by: Termination, at: u64) {
        self.outcome = Some((by, at));
        let target = (by != Termination::GuidedSetEmpty).then_some(self.target);
        self.record_frame(target);
    }

    /// Executes one step; returns `false` once the trial has terminated.
    pub fn step(&mut self) -> bool {
        if self.outcome.is_some() {
            return false;
        }
        let k = self.step;
        let period = self.cfg.observation_period;
        let discriminates = self.cfg.policy.discriminates();

        // (1) Global observation: discriminate, then refresh the target.
        if k.is_multiple_of(period) {
            if discriminates && k > 0 {
                let distances = self.prediction_errors();
                self.ledger
                    .discriminate(&distances, k, &self.disc, self.flock.n_normal(), &mut self.events)
                    .expect("engine drives discrimination on schedule");
                if self.ledger.active_count() == 0 {
                    self.finish(Termination::GuidedSetEmpty, k);
                    return false;
                }
            }
            if discriminates && self.cfg.reposition_mode == RepositionMode::ZeroLag {
                self.virtual_flock.snap_to(self.flock.positions());
            }
            let guided = self.ledger.guided_set();
            match farthest_from_goal(self.flock.positions(), &guided, self.cfg.goal_center) {
                Some(t) => self.target = t,
                None => {
                    self.finish(Termination::GuidedSetEmpty, k);
                    return false;
                }
            }
            self.record_frame(Some(self.target));
        }

        // (2) All displacements from the time-k snapshot.
        let nearest = nearest_sheep(self.shepherd, self.flock.positions());
        let shepherd_delta = shepherd_displacement(
            self.shepherd,
            self.flock.position(self.target),
            self.flock.position(nearest),
            self.cfg.goal_center,
            &self.cfg.shepherd_gains,
            self.cfg.sign_convention,
        );
        let sheep_deltas: Vec<Vec2> =
            (0..self.flock.len()).map(|i| self.flock.displacement(i, self.shepherd)).collect();

        // (3) Commit. The virtual flock goes first so its reposition branch
        // reads the time-k actual positions.
        if discriminates {
            let radius = self.cfg.normal_profile.perception_radius;
            if k.is_multiple_of(period) && self.cfg.reposition_mode == RepositionMode::AsPublished {
                self.virtual_flock
                    .advance_or_reposition(
                        Some(self.flock.positions()),
                        k,
                        period,
                        self.shepherd,
                        self.estimated_gains,
                        radius,
                    )
                    .expect("engine repositions on schedule");
            } else {
                self.virtual_flock.advance(self.shepherd, self.estimated_gains, radius);
            }
        }
        self.flock.apply(sheep_deltas, self.cfg.max_step_norm);
        self.shepherd += shepherd_delta;
        self.step = k + 1;

        // (4) Termination on the committed state.
        let finite = self.flock.all_finite()
            && self.shepherd.is_finite()
            && (!discriminates || self.virtual_flock.all_finite());
        if !finite {
            self.finish(Termination::NonFinite, self.step);
        } else if self.ledger.guided_set().iter().all(|&i| self.in_goal(self.flock.position(i))) {
            self.finish(Termination::GoalReached, self.step);
        } else if self.step >= self.cfg.max_steps {
            self.finish(Termination::MaxSteps, self.cfg.max_steps);
        }
        self.outcome.is_none()
    }

    /// Runs to termination and extracts the metrics.
    pub fn run(mut self) -> TrialResult {
        while self.step() {}
        let (terminated_by, terminated_step) = self.outcome.expect("trial has terminated");
        let normal_in_goal =
            (0..self.flock.n_normal()).filter(|&i| self.in_goal(self.flock.position(i))).count();
        let success_fraction = if self.flock.n_normal() == 0 {
            1.0
        } else {
            normal_in_goal as f64 / self.flock.n_normal() as f64
        };
        TrialResult {
            terminated_step,
            terminated_by,
            normal_in_goal,
            success_fraction,
            misjudgement_count: count_misjudgements(&self.events),
            events: self.events,
            trajectory: self.trajectory,
            spawn_hash: self.spawn_hash,
        }
    }
}

/// Convenience wrapper: spawn and run one trial.
pub fn run_trial(cfg: TrialConfig) -> Result<TrialResult, ConfigError> {
    Ok(Trial::new(cfg)?.run())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Policy;
    use crate::discrimination::SheepStatus;
    use crate::flock::ForceMask;

    #[test]
    fn spawn_is_deterministic() {
        let mut a = TrialRng::new(42, 7);
        let mut b = TrialRng::new(42, 7);
        let pa = spawn_positions(20, 60.0, &mut a);
        let pb = spawn_positions(20, 60.0, &mut b);
        assert_eq!(spawn_hash(&pa), spawn_hash(&pb));
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(x.x.to_bits(), y.x.to_bits());
            assert_eq!(x.y.to_bits(), y.y.to_bits());
        }
    }

    #[test]
    fn spawn_mean_radius_matches_uniform_disk() {
        // Mean radius of a uniform disk sample is 2R/3 = 40.
        let mut rng = TrialRng::new(1, 0);
        let samples = spawn_positions(100_000, 60.0, &mut rng);
        let mean = samples.iter().map(|p| p.norm()).sum::<f64>() / samples.len() as f64;
        assert!((mean - 40.0).abs() < 0.4, "mean radius {mean}");
        assert!(samples.iter().all(|p| p.norm() < 60.0));
    }

    #[test]
    fn all_agents_normal_when_no_variants() {
        let trial = Trial::new(TrialConfig { n_variant: 0, ..TrialConfig::default() }).unwrap();
        assert_eq!(trial.flock().n_normal(), 20);
        assert!((0..20).all(|i| !trial.flock().is_variant(i)));
    }

    #[test]
    fn sheep_spawned_inside_goal_terminates_immediately() {
        let cfg = TrialConfig {
            n_sheep: 1,
            goal_center: Vec2::ZERO,
            goal_radius: 15.0,
            spawn_radius: 5.0,
            shepherd_start: Vec2::new(1000.0, 1000.0),
            ..TrialConfig::default()
        };
        let result = run_trial(cfg).unwrap();
        assert_eq!(result.terminated_by, Termination::GoalReached);
        assert_eq!(result.terminated_step, 1);
        assert_eq!(result.normal_in_goal, 1);
        assert_eq!(result.success_fraction, 1.0);
    }

    #[test]
    fn fat_policy_never_modifies_the_guided_set() {
        let cfg = TrialConfig {
            policy: Policy::Fat,
            n_variant: 4,
            alpha: ForceMask::new(true, false, false, false),
            max_steps: 200,
            seed: 3,
            ..TrialConfig::default()
        };
        let mut trial = Trial::new(cfg).unwrap();
        while trial.step() {
            assert_eq!(trial.guided_set().len(), 20);
        }
        let result = trial.run();
        assert!(result.events.is_empty());
        assert_eq!(result.misjudgement_count, 0);
    }

    #[test]
    fn single_strike_limit_removes_on_first_flag() {
        // The variant is farthest from the goal, so the shepherd closes in
        // on it immediately. The variant ignores the shepherd while its
        // virtual twin is kicked away, so its first observation distance is
        // far above the threshold.
        let cfg = TrialConfig {
            n_sheep: 3,
            n_variant: 1,
            alpha: ForceMask::new(true, false, false, false),
            policy: Policy::Static,
            strike_limit: 0,
            max_steps: 11,
            ..TrialConfig::default()
        };
        let positions = vec![Vec2::new(15.0, 15.0), Vec2::new(25.0, 25.0), Vec2::new(-30.0, -40.0)];
        let mut trial = Trial::with_positions(cfg, positions).unwrap();
        while trial.step() {}
        assert_eq!(trial.ledger().entry(2).status, SheepStatus::Removed);
        assert_ne!(trial.target(), 2);
        let events = trial.events();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].action, DiscriminationAction::Removed);
        assert_eq!(events[0].step, 10);
        assert!(events[0].is_variant);
    }

    #[test]
    fn trial_replays_bit_identically() {
        let cfg = TrialConfig {
            n_variant: 2,
            alpha: ForceMask::new(false, true, true, false),
            policy: Policy::Dynamic,
            max_steps: 300,
            seed: 9,
            record_trajectory: true,
            ..TrialConfig::default()
        };
        let a = run_trial(cfg.clone()).unwrap();
        let b = run_trial(cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn misjudgement_count_matches_event_log() {
        let cfg = TrialConfig {
            n_variant: 4,
            alpha: ForceMask::new(true, true, false, false),
            policy: Policy::Static,
            max_steps: 2000,
            seed: 5,
            ..TrialConfig::default()
        };
        let result = run_trial(cfg).unwrap();
        assert_eq!(result.misjudgement_count, count_misjudgements(&result.events));
        assert!(count_misjudged_sheep(&result.events) <= result.misjudgement_count);
    }

    #[test]
    fn count_misjudgements_definition() {
        use DiscriminationAction::*;
        let ev = |sheep: usize, action, is_variant| DiscriminationEvent {
            step: 10,
            sheep,
            distance: 9.0,
            threshold: 5.0,
            action,
            is_variant,
        };
        assert_eq!(count_misjudgements(&[]), 0);
        // One normal flag, one variant flag.
        assert_eq!(count_misjudgements(&[ev(2, Flagged, false), ev(19, Flagged, true)]), 1);
        // The same normal sheep flagged three times counts three times.
        let repeated = [ev(2, Flagged, false), ev(2, Flagged, false), ev(2, Removed, false)];
        assert_eq!(count_misjudgements(&repeated), 3);
        assert_eq!(count_misjudged_sheep(&repeated), 1);
        // Re-inclusions are not flags.
        assert_eq!(count_misjudgements(&[ev(2, Reincluded, false)]), 0);
    }

    #[test]
    fn trajectory_frames_follow_the_observation_grid() {
        let cfg = TrialConfig {
            max_steps: 95,
            record_trajectory: true,
            seed: 11,
            ..TrialConfig::default()
        };
        let result = run_trial(cfg).unwrap();
        let frames = result.trajectory.as_ref().unwrap();
        assert_eq!(frames[0].step, 0);
        assert!(frames[0].positions.iter().all(|p| p.norm() < 60.0));
        assert_eq!(frames[0].shepherd, Vec2::new(-30.0, -50.0));
        for w in frames.windows(2) {
            assert!(w[1].step > w[0].step);
        }
        // Interior frames sit on observation instants; the last frame is
        // the terminal state.
        for f in &frames[..frames.len() - 1] {
            assert_eq!(f.step % 10, 0);
        }
        assert_eq!(frames.last().unwrap().step, result.terminated_step);
    }
}
