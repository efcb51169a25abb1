//! Deterministic simulator for shepherding a heterogeneous flock.
//!
//! A single shepherd drives a flock of Boid-like sheep into a goal disk
//! using farthest-agent targeting. Part of the flock may be *variant*:
//! those sheep respond to only a subset of the four forces (separation,
//! alignment, attraction, shepherd repulsion) and are unknown to the
//! shepherd. The shepherd runs a predictive twin of every sheep (the
//! virtual flock) from an inexact estimate of the normal dynamics,
//! discriminates variants by their prediction error, and guides only the
//! sheep currently judged normal.
//!
//! The crate is `no_std`-compatible (with `alloc`); all floating-point
//! special functions go through `libm`, so simulations replay
//! bit-identically regardless of the `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod config;
pub mod discrimination;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod flock;
mod fnv;
pub mod rng;
pub mod shepherd;
pub mod vec2;
pub mod virtual_flock;

pub use config::{Policy, TrialConfig};
pub use discrimination::{
    DiscriminationAction, DiscriminationConfig, DiscriminationEvent, Ledger, SheepStatus,
    ThresholdMode, dynamic_threshold,
};
pub use engine::{
    Frame, Termination, Trial, TrialResult, count_misjudged_sheep, count_misjudgements, run_trial,
    spawn_hash, spawn_positions,
};
pub use error::{ConfigError, ScheduleError};
pub use experiment::{
    Cell, CellStats, ScatterPoint, SweepOutcome, SweepReport, SweepSpec, TrialRecord,
    aggregate_report, misjudgement_correlation, pearson, plan_cells, run_sweep, run_trial_record,
    threshold_scatter, trial_config,
};
pub use flock::{Flock, ForceMask, ForceProfile, SheepAgent};
pub use rng::TrialRng;
pub use shepherd::{
    ShepherdGains, SignConvention, farthest_from_goal, nearest_sheep, shepherd_displacement,
};
pub use vec2::Vec2;
pub use virtual_flock::{GainEstimate, RepositionMode, VirtualFlock};
