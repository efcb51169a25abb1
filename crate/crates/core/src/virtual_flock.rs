//! The shepherd's internal predictive model.
//!
//! One virtual sheep shadows each actual sheep. Between global observations
//! the virtual flock evolves purely on its own state (plus the shepherd's
//! true position), using the gain estimates given to the shepherd. At every
//! observation the virtual sheep are re-positioned onto the observed actual
//! positions, which bounds the prediction error used for discrimination.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;
use crate::flock::{ForceMask, ForceProfile, boid_forces, weighted_displacement};
use crate::vec2::Vec2;

/// Multipliers on the nominal gains forming the shepherd's estimate of the
/// normal-sheep dynamics. All ones means the estimate is exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct GainEstimate {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
}

impl GainEstimate {
    pub const fn new(b1: f64, b2: f64, b3: f64, b4: f64) -> Self {
        GainEstimate { b1, b2, b3, b4 }
    }

    pub const fn exact() -> Self {
        GainEstimate::new(1.0, 1.0, 1.0, 1.0)
    }

    /// Default estimate derived from the variant mask: exact (1.0) on the
    /// forces the variant responds to, 0.9 on the forces it lacks.
    pub fn from_mask(mask: ForceMask) -> Self {
        let f = mask.flags();
        let b = |on: bool| if on { 1.0 } else { 0.9 };
        GainEstimate::new(b(f[0]), b(f[1]), b(f[2]), b(f[3]))
    }

    pub fn factors(&self) -> [f64; 4] {
        [self.b1, self.b2, self.b3, self.b4]
    }

    /// Estimated gains: the element-wise product with the nominal profile.
    pub fn scaled_gains(&self, normal: &ForceProfile) -> [f64; 4] {
        let k = normal.gains();
        let b = self.factors();
        [b[0] * k[0], b[1] * k[1], b[2] * k[2], b[3] * k[3]]
    }
}

impl From<[f64; 4]> for GainEstimate {
    fn from(v: [f64; 4]) -> Self {
        GainEstimate::new(v[0], v[1], v[2], v[3])
    }
}

impl From<GainEstimate> for [f64; 4] {
    fn from(b: GainEstimate) -> Self {
        b.factors()
    }
}

/// How the virtual flock consumes a global observation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepositionMode {
    /// Snap the virtual positions onto the observation at the instant
    /// itself (after the discrimination distances are taken), then advance
    /// normally. An exact model then tracks the flock with zero error.
    #[default]
    ZeroLag,
    /// Re-position one step behind instead: the virtual position for step
    /// `k+1` is the actual position observed at step `k`. This leaves a
    /// one-step floor on the prediction error even for an exact model,
    /// which inflates misjudgements whenever sheep are driven hard.
    AsPublished,
}

/// Positions and previous displacements of the virtual sheep.
#[derive(Clone, Debug)]
pub struct VirtualFlock {
    positions: Vec<Vec2>,
    prev_displacements: Vec<Vec2>,
}

impl VirtualFlock {
    /// At step 0 every virtual sheep coincides with its actual sheep and
    /// carries a zero previous displacement.
    pub fn new(actual_positions: &[Vec2]) -> Self {
        VirtualFlock {
            positions: actual_positions.to_vec(),
            prev_displacements: alloc::vec![Vec2::ZERO; actual_positions.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn prev_displacements(&self) -> &[Vec2] {
        &self.prev_displacements
    }

    pub fn position(&self, i: usize) -> Vec2 {
        self.positions[i]
    }

    /// Predicted displacement of virtual sheep `i`: the same four-force sum
    /// as the actual sheep, evaluated on virtual state with the estimated
    /// gains and the shepherd's true position.
    pub fn displacement(
        &self,
        i: usize,
        shepherd: Vec2,
        estimated_gains: [f64; 4],
        radius: f64,
    ) -> Vec2 {
        let forces =
            boid_forces(&self.positions, &self.prev_displacements, i, radius, shepherd);
        weighted_displacement(forces, estimated_gains)
    }

    /// Prediction-error distances `|x_i - xi_i|` against the actual flock.
    pub fn prediction_errors(&self, actual_positions: &[Vec2]) -> Vec<f64> {
        self.positions
            .iter()
            .zip(actual_positions)
            .map(|(xi, x)| xi.distance(*x))
            .collect()
    }

    /// Snaps the virtual positions onto the actual ones, retaining the
    /// previous displacements (zero-lag observation handling).
    pub fn snap_to(&mut self, actual_positions: &[Vec2]) {
        self.positions.copy_from_slice(actual_positions);
    }

    /// One scheduled update. On observation steps (`k % period == 0`) the
    /// caller must supply the observed actual positions and the virtual
    /// sheep re-position onto them; otherwise the observation must be
    /// absent and each virtual sheep advances by its predicted
    /// displacement. Previous displacements update only in the advance
    /// branch.
    pub fn advance_or_reposition(
        &mut self,
        observation: Option<&[Vec2]>,
        step: u64,
        period: u64,
        shepherd: Vec2,
        estimated_gains: [f64; 4],
        radius: f64,
    ) -> Result<(), ScheduleError> {
        let on_schedule = step.is_multiple_of(period);
        match observation {
            Some(actual) => {
                if !on_schedule {
                    return Err(ScheduleError { step, period, context: "virtual flock reposition" });
                }
                self.snap_to(actual);
                Ok(())
            }
            None => {
                if on_schedule {
                    return Err(ScheduleError {
                        step,
                        period,
                        context: "virtual flock advance without observation",
                    });
                }
                self.advance(shepherd, estimated_gains, radius);
                Ok(())
            }
        }
    }

    /// Synchronous advance by the predicted displacements.
    pub fn advance(&mut self, shepherd: Vec2, estimated_gains: [f64; 4], radius: f64) {
        let displacements: Vec<Vec2> = (0..self.len())
            .map(|i| self.displacement(i, shepherd, estimated_gains, radius))
            .collect();
        for (i, d) in displacements.iter().enumerate() {
            self.positions[i] += *d;
        }
        self.prev_displacements = displacements;
    }

    pub fn all_finite(&self) -> bool {
        self.positions.iter().all(|p| p.is_finite())
            && self.prev_displacements.iter().all(|d| d.is_finite())
    }
}
