//! Property tests for the simulation invariants, plus the statistical
//! model-degradation check.

use proptest::prelude::*;
use shepherding_core::*;

fn vec2_in(range: f64) -> impl Strategy<Value = Vec2> {
    (-range..range, -range..range).prop_map(|(x, y)| Vec2::new(x, y))
}

/// Flock-sized position sets with a minimum spacing, so inverse-cube terms
/// stay in a comparable range.
fn spaced_flock(n: usize) -> impl Strategy<Value = Vec<Vec2>> {
    proptest::collection::vec(vec2_in(40.0), n * 8).prop_map(move |candidates| {
        let mut out: Vec<Vec2> = Vec::with_capacity(n);
        for p in candidates {
            if out.len() == n {
                break;
            }
            if out.iter().all(|q| q.distance(p) >= 1.0) {
                out.push(p);
            }
        }
        // Fall back to a lattice if rejection left us short.
        let mut i = 0;
        while out.len() < n {
            out.push(Vec2::new(-60.0 + 3.0 * i as f64, 55.0));
            i += 1;
        }
        out
    })
}

fn mask_strategy() -> impl Strategy<Value = ForceMask> {
    (0u8..16).prop_map(|bits| {
        ForceMask::new(bits & 8 != 0, bits & 4 != 0, bits & 2 != 0, bits & 1 != 0)
    })
}

proptest! {
    /// Attraction averages unit vectors, so its norm never exceeds one.
    #[test]
    fn attraction_norm_is_bounded(positions in spaced_flock(6)) {
        for i in 0..positions.len() {
            let neighbors = flock::neighbor_set(&positions, i, 20.0);
            let f = flock::attraction_force(&positions, i, &neighbors);
            prop_assert!(f.norm() <= 1.0 + 1e-12);
        }
    }

    /// Neighbor sets are symmetric and never contain the agent itself.
    #[test]
    fn neighbor_sets_are_symmetric(positions in spaced_flock(7), radius in 1.0f64..50.0) {
        for i in 0..positions.len() {
            let ni = flock::neighbor_set(&positions, i, radius);
            prop_assert!(!ni.contains(&i));
            for &j in &ni {
                let nj = flock::neighbor_set(&positions, j, radius);
                prop_assert!(nj.contains(&i));
            }
        }
    }

    /// A variant with a masked force behaves exactly like the same agent
    /// with that force vector replaced by zero.
    #[test]
    fn mask_equivalence(positions in spaced_flock(5), mask in mask_strategy(), shepherd in vec2_in(60.0)) {
        let profile = ForceProfile::default();
        let masked_gains = profile.masked(mask).gains();
        let prev: Vec<Vec2> = positions.iter().map(|p| Vec2::new(p.y * 0.01, -p.x * 0.01)).collect();
        for i in 0..positions.len() {
            let forces = flock::boid_forces(&positions, &prev, i, profile.perception_radius, shepherd);
            let via_mask = flock::weighted_displacement(forces, masked_gains);
            let zeroed: Vec<Vec2> = forces
                .iter()
                .zip(mask.flags())
                .map(|(f, on)| if on { *f } else { Vec2::ZERO })
                .collect();
            let via_zeroing =
                flock::weighted_displacement([zeroed[0], zeroed[1], zeroed[2], zeroed[3]], profile.gains());
            prop_assert_eq!(via_mask, via_zeroing);
        }
    }

    /// Forces depend only on the time-k snapshot: evaluating agents in any
    /// order leaves each agent's displacement bit-identical.
    #[test]
    fn evaluation_order_is_irrelevant(positions in spaced_flock(6), shepherd in vec2_in(60.0)) {
        let flock = Flock::new(positions, ForceProfile::default(), ForceMask::new(true, false, false, false), 0);
        let forward: Vec<Vec2> = (0..flock.len()).map(|i| flock.displacement(i, shepherd)).collect();
        let backward: Vec<Vec2> = (0..flock.len()).rev().map(|i| flock.displacement(i, shepherd)).collect();
        for (i, d) in forward.iter().enumerate() {
            let r = backward[flock.len() - 1 - i];
            prop_assert_eq!((d.x.to_bits(), d.y.to_bits()), (r.x.to_bits(), r.y.to_bits()));
        }
    }

    /// The dynamic threshold never sits below the third quartile, and an
    /// all-equal sample flags nothing.
    #[test]
    fn dynamic_threshold_dominates_q3(sample in proptest::collection::vec(0.0f64..100.0, 1..60)) {
        let fence = dynamic_threshold(&sample);
        let mut sorted = sample.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[(sorted.len() - 1) / 2];
        prop_assert!(fence >= median - 1e-12);
        prop_assert!(sample.iter().filter(|&&d| d > fence).count() <= sample.len() / 2);
    }

    /// Ledger evolution is a pure function of its inputs.
    #[test]
    fn ledger_replay_is_pure(
        rounds in proptest::collection::vec(proptest::collection::vec(0.0f64..12.0, 6), 1..12),
        strike_limit in 0u32..4,
    ) {
        let cfg = DiscriminationConfig {
            mode: ThresholdMode::Static,
            static_threshold: 5.0,
            strike_limit,
            reinclusion_delay: 20,
            period: 10,
        };
        let run = || {
            let mut ledger = Ledger::new(6);
            let mut events = Vec::new();
            for (idx, d) in rounds.iter().enumerate() {
                ledger.discriminate(d, (idx as u64 + 1) * 10, &cfg, 4, &mut events).unwrap();
            }
            (ledger, events)
        };
        let (la, ea) = run();
        let (lb, eb) = run();
        prop_assert_eq!(la.entries(), lb.entries());
        prop_assert_eq!(ea, eb);
    }

    /// Strikes never decrease and removal is absorbing across any input
    /// sequence.
    #[test]
    fn ledger_strikes_monotone(
        rounds in proptest::collection::vec(proptest::collection::vec(0.0f64..12.0, 5), 1..20),
    ) {
        let cfg = DiscriminationConfig {
            mode: ThresholdMode::Static,
            static_threshold: 5.0,
            strike_limit: 2,
            reinclusion_delay: 20,
            period: 10,
        };
        let mut ledger = Ledger::new(5);
        let mut events = Vec::new();
        let mut prev_strikes = [0u32; 5];
        let mut removed = [false; 5];
        for (idx, d) in rounds.iter().enumerate() {
            ledger.discriminate(d, (idx as u64 + 1) * 10, &cfg, 3, &mut events).unwrap();
            for i in 0..5 {
                let e = ledger.entry(i);
                prop_assert!(e.strikes >= prev_strikes[i]);
                if removed[i] {
                    prop_assert_eq!(e.status, SheepStatus::Removed);
                }
                prev_strikes[i] = e.strikes;
                removed[i] = e.status == SheepStatus::Removed;
            }
        }
    }
}

#[test]
fn worse_gain_estimates_predict_worse() {
    // With no variants, the time-averaged worst-sheep prediction error at
    // observation instants grows when the estimate degrades from exact to
    // a uniform 0.8, on matched arrangements.
    let mean_error = |beta: GainEstimate| -> f64 {
        let mut total = 0.0;
        let mut samples = 0u32;
        for stream in 0..20u64 {
            let cfg = TrialConfig {
                policy: Policy::Static,
                n_variant: 0,
                beta: Some(beta),
                seed: 0,
                seed_stream: stream,
                max_steps: 300,
                goal_center: Vec2::new(1e6, 1e6),
                ..TrialConfig::default()
            };
            let mut trial = Trial::new(cfg).unwrap();
            loop {
                let k = trial.step_index();
                if k > 0 && k.is_multiple_of(10) {
                    let worst = trial
                        .prediction_errors()
                        .into_iter()
                        .fold(0.0f64, f64::max);
                    total += worst;
                    samples += 1;
                }
                if !trial.step() {
                    break;
                }
            }
        }
        total / samples as f64
    };
    let exact = mean_error(GainEstimate::exact());
    let degraded = mean_error(GainEstimate::new(0.8, 0.8, 0.8, 0.8));
    assert!(
        degraded > exact,
        "degraded estimate should predict worse: exact {exact:.3}, degraded {degraded:.3}"
    );
}

#[test]
fn goal_reached_means_every_guided_sheep_is_inside() {
    for stream in 0..5u64 {
        let cfg = TrialConfig {
            policy: Policy::Static,
            n_variant: 2,
            alpha: ForceMask::new(true, false, false, false),
            seed: 1,
            seed_stream: stream,
            ..TrialConfig::default()
        };
        let goal = cfg.goal_center;
        let radius = cfg.goal_radius;
        let mut trial = Trial::new(cfg).unwrap();
        while trial.step() {}
        if trial.finished().unwrap().0 == Termination::GoalReached {
            for i in trial.guided_set() {
                assert!(goal.distance(trial.flock().position(i)) < radius);
            }
        }
    }
}

#[test]
fn ten_thousand_step_trial_is_fast() {
    // The per-step cost is O(N^2) with N = 20; a full-length trial has to
    // stay far under a second for sweeps to be practical.
    let cfg = TrialConfig {
        policy: Policy::Dynamic,
        n_variant: 10,
        alpha: ForceMask::new(false, false, true, false),
        goal_center: Vec2::new(1e6, 1e6), // unreachable: force max_steps
        seed: 2,
        ..TrialConfig::default()
    };
    let started = std::time::Instant::now();
    let result = run_trial(cfg).unwrap();
    let elapsed = started.elapsed();
    assert_eq!(result.terminated_by, Termination::MaxSteps);
    assert!(elapsed.as_secs_f64() < 1.0, "10000-step trial took {elapsed:?}");
}
