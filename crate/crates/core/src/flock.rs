//! Ground-truth dynamics of the sheep flock.
//!
//! Each sheep moves by a weighted sum of four force vectors: inverse-cube
//! separation from neighbors, alignment with the neighbors' previous
//! velocities, unit-vector attraction toward neighbors, and inverse-cube
//! repulsion from the shepherd. Normal sheep apply all four with the
//! nominal gains; variant sheep apply a binary mask over the same gains.
//!
//! All sheep read the same time-`k` snapshot and commit simultaneously, so
//! evaluation order never matters.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::vec2::Vec2;

/// Lower clamp on distances in inverse-norm expressions. Coincident agents
/// produce a huge but finite, deterministic force instead of a division by
/// zero.
pub const EPS_DIST: f64 = 1e-9;

/// Force gains and perception radius of a sheep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceProfile {
    /// Separation gain.
    pub k1: f64,
    /// Alignment gain.
    pub k2: f64,
    /// Attraction gain.
    pub k3: f64,
    /// Shepherd-repulsion gain.
    pub k4: f64,
    /// Radius of the recognition range.
    pub perception_radius: f64,
}

impl ForceProfile {
    pub fn gains(&self) -> [f64; 4] {
        [self.k1, self.k2, self.k3, self.k4]
    }

    /// Profile of a variant sheep: gains zeroed wherever the mask is off.
    pub fn masked(&self, mask: ForceMask) -> ForceProfile {
        let m = mask.flags();
        ForceProfile {
            k1: if m[0] { self.k1 } else { 0.0 },
            k2: if m[1] { self.k2 } else { 0.0 },
            k3: if m[2] { self.k3 } else { 0.0 },
            k4: if m[3] { self.k4 } else { 0.0 },
            perception_radius: self.perception_radius,
        }
    }
}

impl Default for ForceProfile {
    /// Nominal gains of a normal sheep.
    fn default() -> Self {
        ForceProfile { k1: 100.0, k2: 0.5, k3: 2.0, k4: 500.0, perception_radius: 20.0 }
    }
}

/// Binary mask over (separation, alignment, attraction, shepherd repulsion)
/// characterizing which forces a variant sheep responds to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u8; 4]", into = "[u8; 4]")]
pub struct ForceMask {
    pub separation: bool,
    pub alignment: bool,
    pub attraction: bool,
    pub repulsion: bool,
}

impl ForceMask {
    pub const fn new(separation: bool, alignment: bool, attraction: bool, repulsion: bool) -> Self {
        ForceMask { separation, alignment, attraction, repulsion }
    }

    pub fn flags(&self) -> [bool; 4] {
        [self.separation, self.alignment, self.attraction, self.repulsion]
    }

    /// Number of forces the variant responds to.
    pub fn force_count(&self) -> usize {
        self.flags().iter().filter(|&&f| f).count()
    }

    /// A mask is trivial when it selects all forces (a normal sheep) or none
    /// (an inert sheep); neither is a valid variant profile.
    pub fn is_trivial(&self) -> bool {
        let c = self.force_count();
        c == 0 || c == 4
    }

    /// The 14 non-trivial masks, in ascending binary order of
    /// (separation, alignment, attraction, repulsion).
    pub fn all_non_trivial() -> Vec<ForceMask> {
        (1u8..15)
            .map(|bits| {
                ForceMask::new(bits & 8 != 0, bits & 4 != 0, bits & 2 != 0, bits & 1 != 0)
            })
            .collect()
    }

    /// Compact label such as `1010`, ordered as the flags.
    pub fn label(&self) -> alloc::string::String {
        self.flags().iter().map(|&f| if f { '1' } else { '0' }).collect()
    }
}

impl TryFrom<[u8; 4]> for ForceMask {
    type Error = &'static str;
    fn try_from(v: [u8; 4]) -> Result<Self, Self::Error> {
        if v.iter().any(|&b| b > 1) {
            return Err("force mask entries must be 0 or 1");
        }
        Ok(ForceMask::new(v[0] == 1, v[1] == 1, v[2] == 1, v[3] == 1))
    }
}

impl From<ForceMask> for [u8; 4] {
    fn from(m: ForceMask) -> Self {
        let f = m.flags();
        [f[0] as u8, f[1] as u8, f[2] as u8, f[3] as u8]
    }
}

/// Snapshot view of one sheep.
#[derive(Clone, Copy, Debug)]
pub struct SheepAgent {
    pub index: usize,
    pub position: Vec2,
    pub prev_displacement: Vec2,
    pub profile: ForceProfile,
    pub is_variant: bool,
}

/// Indices of the sheep within `radius` of sheep `i` (inclusive boundary,
/// excluding `i` itself), in ascending order.
pub fn neighbor_set(positions: &[Vec2], i: usize, radius: f64) -> Vec<usize> {
    positions
        .iter()
        .enumerate()
        .filter(|&(j, &p)| j != i && positions[i].distance(p) <= radius)
        .map(|(j, _)| j)
        .collect()
}

fn clamped_norm(v: Vec2) -> f64 {
    let n = v.norm();
    if n < EPS_DIST { EPS_DIST } else { n }
}

/// Inverse-cube separation: `-(1/|S|) sum (x_j - x_i) / |x_j - x_i|^3`.
pub fn separation_force(positions: &[Vec2], i: usize, neighbors: &[usize]) -> Vec2 {
    if neighbors.is_empty() {
        return Vec2::ZERO;
    }
    let mut sum = Vec2::ZERO;
    for &j in neighbors {
        let delta = positions[j] - positions[i];
        let n = clamped_norm(delta);
        sum += delta * (1.0 / (n * n * n));
    }
    -sum * (1.0 / neighbors.len() as f64)
}

/// Mean of the neighbors' previous displacements. Matching the neighbors'
/// velocities (not just headings) is what damps the flock: without the
/// magnitude, a nudged cluster locks onto a shared heading and cruises off
/// the field, and no guidance policy can collect it.
pub fn alignment_force(prev_displacements: &[Vec2], neighbors: &[usize]) -> Vec2 {
    if neighbors.is_empty() {
        return Vec2::ZERO;
    }
    let mut sum = Vec2::ZERO;
    for &j in neighbors {
        sum += prev_displacements[j];
    }
    sum * (1.0 / neighbors.len() as f64)
}

/// Mean of the unit vectors toward the neighbors.
pub fn attraction_force(positions: &[Vec2], i: usize, neighbors: &[usize]) -> Vec2 {
    if neighbors.is_empty() {
        return Vec2::ZERO;
    }
    let mut sum = Vec2::ZERO;
    for &j in neighbors {
        let delta = positions[j] - positions[i];
        let n = clamped_norm(delta);
        sum += delta * (1.0 / n);
    }
    sum * (1.0 / neighbors.len() as f64)
}

/// Inverse-cube repulsion from the shepherd:
/// `-(x_d - x_i) / |x_d - x_i|^3`, pointing from the shepherd toward the
/// sheep with magnitude `1/r^2`.
pub fn shepherd_repulsion(sheep: Vec2, shepherd: Vec2) -> Vec2 {
    let delta = shepherd - sheep;
    let n = clamped_norm(delta);
    -delta * (1.0 / (n * n * n))
}

/// The four force vectors for agent `i`, evaluated on an arbitrary
/// position/heading snapshot. Shared by the actual flock and the shepherd's
/// predictive model so both evaluate bit-identically on identical state.
pub fn boid_forces(
    positions: &[Vec2],
    prev_displacements: &[Vec2],
    i: usize,
    radius: f64,
    shepherd: Vec2,
) -> [Vec2; 4] {
    let neighbors = neighbor_set(positions, i, radius);
    [
        separation_force(positions, i, &neighbors),
        alignment_force(prev_displacements, &neighbors),
        attraction_force(positions, i, &neighbors),
        shepherd_repulsion(positions[i], shepherd),
    ]
}

/// `K1 f1 + K2 f2 + K3 f3 + K4 f4`, in fixed order.
pub fn weighted_displacement(forces: [Vec2; 4], gains: [f64; 4]) -> Vec2 {
    forces[0] * gains[0] + forces[1] * gains[1] + forces[2] * gains[2] + forces[3] * gains[3]
}

/// State of all sheep at one time step.
#[derive(Clone, Debug)]
pub struct Flock {
    positions: Vec<Vec2>,
    prev_displacements: Vec<Vec2>,
    profiles: Vec<ForceProfile>,
    n_variant: usize,
}

impl Flock {
    /// Builds a flock from initial positions. The first `n - n_variant`
    /// sheep are normal; the rest carry the masked profile. Previous
    /// displacements start at zero.
    pub fn new(
        positions: Vec<Vec2>,
        normal_profile: ForceProfile,
        mask: ForceMask,
        n_variant: usize,
    ) -> Flock {
        let n = positions.len();
        assert!(n_variant <= n, "variant count exceeds flock size");
        let variant_profile = normal_profile.masked(mask);
        let profiles = (0..n)
            .map(|i| if i < n - n_variant { normal_profile } else { variant_profile })
            .collect();
        Flock {
            positions,
            prev_displacements: alloc::vec![Vec2::ZERO; n],
            profiles,
            n_variant,
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

    pub fn profile(&self, i: usize) -> &ForceProfile {
        &self.profiles[i]
    }

    pub fn n_variant(&self) -> usize {
        self.n_variant
    }

    pub fn n_normal(&self) -> usize {
        self.len() - self.n_variant
    }

    pub fn is_variant(&self, i: usize) -> bool {
        i >= self.n_normal()
    }

    pub fn agent(&self, i: usize) -> SheepAgent {
        SheepAgent {
            index: i,
            position: self.positions[i],
            prev_displacement: self.prev_displacements[i],
            profile: self.profiles[i],
            is_variant: self.is_variant(i),
        }
    }

    /// Displacement of sheep `i` for this step, computed from the current
    /// snapshot and the shepherd's current position.
    pub fn displacement(&self, i: usize, shepherd: Vec2) -> Vec2 {
        let profile = &self.profiles[i];
        let forces = boid_forces(
            &self.positions,
            &self.prev_displacements,
            i,
            profile.perception_radius,
            shepherd,
        );
        weighted_displacement(forces, profile.gains())
    }

    /// Synchronous step: all displacements come from the pre-step snapshot
    /// and commit at once. `max_step_norm`, when set, caps each displacement
    /// norm (off in every reproduction run).
    pub fn step(&mut self, shepherd: Vec2, max_step_norm: Option<f64>) {
        let displacements: Vec<Vec2> =
            (0..self.len()).map(|i| self.displacement(i, shepherd)).collect();
        self.apply(displacements, max_step_norm);
    }

    /// Commits externally computed displacements.
    pub fn apply(&mut self, mut displacements: Vec<Vec2>, max_step_norm: Option<f64>) {
        if let Some(cap) = max_step_norm {
            for d in &mut displacements {
                let n = d.norm();
                if n > cap {
                    *d = *d * (cap / n);
                }
            }
        }
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
