//! Shepherd movement: farthest-agent targeting restricted to the guided set.
//!
//! Per step the shepherd adds three terms: unit attraction toward the
//! current target sheep, inverse-cube separation from the nearest sheep,
//! and unit repulsion from the goal. The combination parks the shepherd a
//! short distance behind the target on the side opposite the goal, so its
//! repulsion drives the target goal-ward. The target index refreshes only
//! at observation instants; the nearest sheep is re-measured every step.

use serde::{Deserialize, Serialize};

use crate::flock::EPS_DIST;
use crate::vec2::Vec2;

/// Gains of the three shepherd movement terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShepherdGains {
    /// Attraction to the target sheep.
    pub target_attraction: f64,
    /// Separation from the nearest sheep.
    pub nearest_separation: f64,
    /// Repulsion from the goal.
    pub goal_repulsion: f64,
}

impl Default for ShepherdGains {
    fn default() -> Self {
        ShepherdGains { target_attraction: 10.0, nearest_separation: 200.0, goal_repulsion: 4.0 }
    }
}

/// Sign convention of the three movement terms.
///
/// The two conventions are exact negations of each other. `LabelFaithful`
/// realizes the documented semantics (approach the target from the side
/// away from the goal) and is the convention under which guidance works;
/// `Verbatim` keeps the opposite orientation available for comparison.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    #[default]
    LabelFaithful,
    Verbatim,
}

/// Index of the sheep closest to the shepherd, over all sheep. Ties break
/// to the lowest index.
pub fn nearest_sheep(shepherd: Vec2, positions: &[Vec2]) -> usize {
    debug_assert!(!positions.is_empty());
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, &p) in positions.iter().enumerate() {
        let d = shepherd.distance(p);
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

/// Index of the guided sheep farthest from the goal, or `None` when the
/// guided set is empty. Ties break to the lowest index.
pub fn farthest_from_goal(positions: &[Vec2], guided: &[usize], goal: Vec2) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &i in guided {
        let d = goal.distance(positions[i]);
        match best {
            Some((_, best_d)) if d <= best_d => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i)
}

fn clamped_norm(v: Vec2) -> f64 {
    let n = v.norm();
    if n < EPS_DIST { EPS_DIST } else { n }
}

/// The shepherd's displacement for one step.
pub fn shepherd_displacement(
    shepherd: Vec2,
    target: Vec2,
    nearest: Vec2,
    goal: Vec2,
    gains: &ShepherdGains,
    convention: SignConvention,
) -> Vec2 {
    // LabelFaithful terms; Verbatim negates each one.
    let to_target = target - shepherd;
    let v1 = to_target * (1.0 / clamped_norm(to_target));
    let to_nearest = nearest - shepherd;
    let n2 = clamped_norm(to_nearest);
    let v2 = -to_nearest * (1.0 / (n2 * n2 * n2));
    let from_goal = shepherd - goal;
    let v3 = from_goal * (1.0 / clamped_norm(from_goal));

    let v = v1 * gains.target_attraction
        + v2 * gains.nearest_separation
        + v3 * gains.goal_repulsion;
    match convention {
        SignConvention::LabelFaithful => v,
        SignConvention::Verbatim => -v,
    }
}

/// Position and current target of the shepherd.
#[derive(Clone, Copy, Debug)]
pub struct Shepherd {
    pub position: Vec2,
    pub target: usize,
}
