//! Trial configuration and validation.
//!
//! Every field has a reproduction default, so an empty config runs the
//! reference setup: 20 sheep spawned uniformly on the radius-60 disk,
//! shepherd starting at (-30, -50), goal disk of radius 15 at (20, 20),
//! observation period 10, bench delay 20, strike limit 5, and a fixed
//! threshold of 5 for the static discrimination mode.

use serde::{Deserialize, Serialize};

use crate::discrimination::{DiscriminationConfig, ThresholdMode};
use crate::error::ConfigError;
use crate::flock::{ForceMask, ForceProfile};
use crate::shepherd::{ShepherdGains, SignConvention};
use crate::vec2::Vec2;
use crate::virtual_flock::{GainEstimate, RepositionMode};

/// Guidance policy run by the shepherd.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Plain farthest-agent targeting over all sheep; no discrimination.
    Fat,
    /// Discrimination with the fixed threshold.
    #[default]
    Static,
    /// Discrimination with the per-instant boxplot fence.
    Dynamic,
}

impl Policy {
    /// Whether the policy maintains the virtual flock and the guided set.
    pub fn discriminates(&self) -> bool {
        !matches!(self, Policy::Fat)
    }

    pub fn threshold_mode(&self) -> Option<ThresholdMode> {
        match self {
            Policy::Fat => None,
            Policy::Static => Some(ThresholdMode::Static),
            Policy::Dynamic => Some(ThresholdMode::Dynamic),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Policy::Fat => "fat",
            Policy::Static => "static",
            Policy::Dynamic => "dynamic",
        }
    }
}

/// Full description of one seeded trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    /// Total number of sheep (N).
    pub n_sheep: usize,
    /// Number of variant sheep (M); the last M indices are variant.
    pub n_variant: usize,
    /// Force mask of the variant sheep.
    pub alpha: ForceMask,
    /// Gain-estimate multipliers given to the shepherd. When absent, the
    /// estimate derives from `alpha`: 1.0 on forces the variant receives,
    /// 0.9 on forces it lacks.
    pub beta: Option<GainEstimate>,
    /// Gains and perception radius of normal sheep.
    pub normal_profile: ForceProfile,
    /// Gains of the shepherd movement terms.
    pub shepherd_gains: ShepherdGains,
    pub policy: Policy,
    /// Fixed threshold (L) used by the static mode.
    pub static_threshold: f64,
    /// Strikes survived before permanent removal (tau).
    pub strike_limit: u32,
    /// Bench delay in steps before re-inclusion (h).
    pub reinclusion_delay: u64,
    /// Global observation period in steps (T).
    pub observation_period: u64,
    pub goal_center: Vec2,
    pub goal_radius: f64,
    /// Sheep spawn uniformly on the open disk of this radius at the origin.
    pub spawn_radius: f64,
    pub shepherd_start: Vec2,
    pub max_steps: u64,
    /// Master seed of the pinned ChaCha8 generator.
    pub seed: u64,
    /// Stream index within the master seed; sweeps set this to the trial
    /// index so every cell shares the same initial arrangements.
    pub seed_stream: u64,
    pub reposition_mode: RepositionMode,
    pub sign_convention: SignConvention,
    /// Optional cap on per-step sheep displacement norms. Exploratory only;
    /// unset in every reproduction run.
    pub max_step_norm: Option<f64>,
    /// Record downsampled position frames (one per observation period).
    pub record_trajectory: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            n_sheep: 20,
            n_variant: 0,
            alpha: ForceMask::new(true, false, false, false),
            beta: None,
            normal_profile: ForceProfile::default(),
            shepherd_gains: ShepherdGains::default(),
            policy: Policy::Static,
            static_threshold: 5.0,
            strike_limit: 5,
            reinclusion_delay: 20,
            observation_period: 10,
            goal_center: Vec2::new(20.0, 20.0),
            goal_radius: 15.0,
            spawn_radius: 60.0,
            shepherd_start: Vec2::new(-30.0, -50.0),
            max_steps: 10_000,
            seed: 0,
            seed_stream: 0,
            reposition_mode: RepositionMode::ZeroLag,
            sign_convention: SignConvention::LabelFaithful,
            max_step_norm: None,
            record_trajectory: false,
        }
    }
}

impl TrialConfig {
    /// The gain estimate actually used: the explicit override, or the
    /// mask-derived default.
    pub fn gain_estimate(&self) -> GainEstimate {
        self.beta.unwrap_or_else(|| GainEstimate::from_mask(self.alpha))
    }

    pub fn discrimination(&self) -> DiscriminationConfig {
        DiscriminationConfig {
            mode: self.policy.threshold_mode().unwrap_or(ThresholdMode::Static),
            static_threshold: self.static_threshold,
            strike_limit: self.strike_limit,
            reinclusion_delay: self.reinclusion_delay,
            period: self.observation_period,
        }
    }

    pub fn n_normal(&self) -> usize {
        self.n_sheep - self.n_variant
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(v: f64) -> bool {
            v.is_finite() && v > 0.0
        }
        if self.n_sheep == 0 {
            return Err(ConfigError::new("n_sheep", "must be at least 1"));
        }
        if self.n_variant > self.n_sheep {
            return Err(ConfigError::new(
                "n_variant",
                alloc::format!("must be <= n_sheep ({} > {})", self.n_variant, self.n_sheep),
            ));
        }
        if self.n_variant > 0 && self.alpha.is_trivial() {
            return Err(ConfigError::new(
                "alpha",
                "variant mask must enable at least one force and disable at least one",
            ));
        }
        if let Some(beta) = &self.beta
            && !beta.factors().iter().all(|&b| positive(b))
        {
            return Err(ConfigError::new("beta", "all estimate factors must be positive"));
        }
        let profile = &self.normal_profile;
        if !positive(profile.perception_radius) {
            return Err(ConfigError::new("normal_profile.perception_radius", "must be positive"));
        }
        for (field, gain) in [
            ("normal_profile.k1", profile.k1),
            ("normal_profile.k2", profile.k2),
            ("normal_profile.k3", profile.k3),
            ("normal_profile.k4", profile.k4),
        ] {
            if !(gain.is_finite() && gain >= 0.0) {
                return Err(ConfigError::new(field, "must be non-negative"));
            }
        }
        let gains = &self.shepherd_gains;
        if ![gains.target_attraction, gains.nearest_separation, gains.goal_repulsion]
            .iter()
            .all(|&g| positive(g))
        {
            return Err(ConfigError::new("shepherd_gains", "all gains must be positive"));
        }
        if !positive(self.static_threshold) {
            return Err(ConfigError::new("static_threshold", "must be positive"));
        }
        if self.reinclusion_delay == 0 {
            return Err(ConfigError::new("reinclusion_delay", "must be positive"));
        }
        if self.observation_period == 0 {
            return Err(ConfigError::new("observation_period", "must be positive"));
        }
        if !positive(self.goal_radius) {
            return Err(ConfigError::new("goal_radius", "must be positive"));
        }
        if !positive(self.spawn_radius) {
            return Err(ConfigError::new("spawn_radius", "must be positive"));
        }
        if self.max_steps == 0 {
            return Err(ConfigError::new("max_steps", "must be positive"));
        }
        if let Some(cap) = self.max_step_norm
            && !positive(cap)
        {
            return Err(ConfigError::new("max_step_norm", "must be positive when set"));
        }
        Ok(())
    }

    /// Stable 64-bit content hash for provenance tagging of result files.
    pub fn content_hash(&self) -> u64 {
        let mut h = crate::fnv::Fnv64::new();
        h.write_usize(self.n_sheep);
        h.write_usize(self.n_variant);
        for f in self.alpha.flags() {
            h.write_u8(f as u8);
        }
        match &self.beta {
            None => h.write_u8(0),
            Some(b) => {
                h.write_u8(1);
                for v in b.factors() {
                    h.write_f64(v);
                }
            }
        }
        for v in self.normal_profile.gains() {
            h.write_f64(v);
        }
        h.write_f64(self.normal_profile.perception_radius);
        h.write_f64(self.shepherd_gains.target_attraction);
        h.write_f64(self.shepherd_gains.nearest_separation);
        h.write_f64(self.shepherd_gains.goal_repulsion);
        h.write_u8(match self.policy {
            Policy::Fat => 0,
            Policy::Static => 1,
            Policy::Dynamic => 2,
        });
        h.write_f64(self.static_threshold);
        h.write_u64(self.strike_limit as u64);
        h.write_u64(self.reinclusion_delay);
        h.write_u64(self.observation_period);
        h.write_f64(self.goal_center.x);
        h.write_f64(self.goal_center.y);
        h.write_f64(self.goal_radius);
        h.write_f64(self.spawn_radius);
        h.write_f64(self.shepherd_start.x);
        h.write_f64(self.shepherd_start.y);
        h.write_u64(self.max_steps);
        h.write_u64(self.seed);
        h.write_u64(self.seed_stream);
        h.write_u8(matches!(self.reposition_mode, RepositionMode::ZeroLag) as u8);
        h.write_u8(matches!(self.sign_convention, SignConvention::Verbatim) as u8);
        match self.max_step_norm {
            None => h.write_u8(0),
            Some(cap) => {
                h.write_u8(1);
                h.write_f64(cap);
            }
        }
        h.finish()
    }
}
