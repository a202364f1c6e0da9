//! Monte Carlo checks of the MAC simulation against enumerated expectations.

use qgame_core::game::{AssignmentTuple, GameConfig, Regime};
use qgame_core::mac::{
    compare_policies, run_cell, simulate, AllocatorPolicy, CellConfig, Topology,
};

/// Mean and variance of per-slot successes over an explicit outcome law.
fn success_moments(outcomes: &[(AssignmentTuple, f64)], n: usize) -> (f64, f64) {
    let successes = |t: &AssignmentTuple| {
        (0..n)
            .filter(|&c| t.channels().iter().filter(|&&x| x == c).count() == 1)
            .count() as f64
    };
    let mean: f64 = outcomes.iter().map(|(t, w)| w * successes(t)).sum();
    let second: f64 = outcomes.iter().map(|(t, w)| w * successes(t).powi(2)).sum();
    (mean, second - mean * mean)
}

fn all_tuples(n: usize) -> impl Iterator<Item = AssignmentTuple> {
    (0..n.pow(n as u32)).map(move |i| AssignmentTuple::from_index(i, n))
}

fn uniform_law(n: usize) -> Vec<(AssignmentTuple, f64)> {
    let w = 1.0 / n.pow(n as u32) as f64;
    all_tuples(n).map(|t| (t, w)).collect()
}

/// Uniform law on tuples whose channel sum plus `p` vanishes mod `n`.
fn quantum_law(n: usize, p: u64) -> Vec<(AssignmentTuple, f64)> {
    let support: Vec<_> = all_tuples(n)
        .filter(|t| (t.channel_sum() + p).is_multiple_of(n as u64))
        .collect();
    let w = 1.0 / support.len() as f64;
    support.into_iter().map(|t| (t, w)).collect()
}

fn within_sigmas(observed: f64, expected: f64, variance: f64, samples: u64, k: f64) -> bool {
    (observed - expected).abs() <= k * (variance / samples as f64).sqrt()
}

#[test]
fn classical_baseline_moments_match_enumeration() {
    const SLOTS: u64 = 1_000_000;
    for n in [2usize, 3, 4] {
        let m = simulate(
            &CellConfig::star(n, 0.0, SLOTS, 77 + n as u64),
            AllocatorPolicy::ClassicalUniform,
            |_| {},
        )
        .unwrap();
        let law = uniform_law(n);
        let p_distinct: f64 = law
            .iter()
            .filter(|(t, _)| t.is_all_distinct())
            .map(|(_, w)| w)
            .sum();
        let p_same: f64 = law
            .iter()
            .filter(|(t, _)| t.is_all_same())
            .map(|(_, w)| w)
            .sum();
        for (name, obs, p) in [
            ("all_distinct", m.all_distinct_rate, p_distinct),
            ("all_same", m.all_same_rate, p_same),
        ] {
            assert!(
                within_sigmas(obs, p, p * (1.0 - p), SLOTS, 3.0),
                "n={n} {name}: {obs} vs {p}"
            );
        }
        let (mean, var) = success_moments(&law, n);
        assert!(
            within_sigmas(m.throughput, mean, var, SLOTS, 3.0),
            "n={n} throughput {} vs {mean}",
            m.throughput
        );
    }
}

#[test]
fn quantum_throughput_matches_enumeration() {
    const SLOTS: u64 = 200_000;
    let n = 4;
    for policy in [
        AllocatorPolicy::QuantumEnhanceOptimum,
        AllocatorPolicy::QuantumAvoidWorst,
    ] {
        let p = policy.regime().unwrap().phase(n);
        let m = simulate(&CellConfig::star(n, 0.0, SLOTS, 11), policy, |_| {}).unwrap();
        let (mean, var) = success_moments(&quantum_law(n, p), n);
        assert!(
            within_sigmas(m.throughput, mean, var, SLOTS, 4.0),
            "{policy:?}: {} vs {mean}",
            m.throughput
        );
    }
}

#[test]
fn free_channel_count_follows_the_occupancy_model() {
    const SLOTS: u64 = 100_000;
    let (n, activity) = (4, 0.3);
    let run = run_cell(
        &CellConfig::star(n, activity, SLOTS, 5),
        AllocatorPolicy::ClassicalUniform,
    )
    .unwrap();
    let total: usize = run.records.iter().map(|r| r.free_channels.len()).sum();
    let mean = total as f64 / SLOTS as f64;
    let var = n as f64 * activity * (1.0 - activity);
    assert!(
        within_sigmas(mean, n as f64 * (1.0 - activity), var, SLOTS, 4.0),
        "mean free {mean}"
    );
}

#[test]
fn quantum_assignments_stay_on_the_support() {
    for policy in [
        AllocatorPolicy::QuantumEnhanceOptimum,
        AllocatorPolicy::QuantumAvoidWorst,
    ] {
        for n in [2usize, 3, 4, 5] {
            let cfg = GameConfig::new(n, policy.regime().unwrap().phase(n)).unwrap();
            let run = run_cell(&CellConfig::star(n, 0.0, 5_000, 3), policy).unwrap();
            for r in &run.records {
                let t = AssignmentTuple::new(
                    r.assignment
                        .as_ref()
                        .unwrap()
                        .iter()
                        .map(|c| c.unwrap())
                        .collect(),
                );
                assert!(
                    qgame_core::support_predicate(&cfg, &t).unwrap(),
                    "{policy:?} n={n}: {t}"
                );
            }
        }
    }
}

#[test]
fn slot_records_are_consistent() {
    let run = run_cell(
        &CellConfig::star(5, 0.4, 5_000, 8),
        AllocatorPolicy::QuantumEnhanceOptimum,
    )
    .unwrap();
    for r in &run.records {
        assert!(r.successes + r.colliders + r.blocked <= 5);
        let Some(assignment) = &r.assignment else {
            assert!(r.free_channels.is_empty());
            continue;
        };
        let assigned: Vec<usize> = assignment.iter().flatten().copied().collect();
        assert_eq!(assigned.len(), r.free_channels.len().min(5));
        assert!(assigned.iter().all(|c| r.free_channels.contains(c)));
        let alone = assigned
            .iter()
            .filter(|c| assigned.iter().filter(|d| d == c).count() == 1)
            .count();
        assert_eq!(alone, r.successes);
    }
}

fn throughput_curve(policy: AllocatorPolicy) -> Vec<f64> {
    [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
        .iter()
        .map(|&a| {
            simulate(&CellConfig::star(4, a, 100_000, 21), policy, |_| {})
                .unwrap()
                .throughput
        })
        .collect()
}

#[test]
fn throughput_falls_with_primary_activity() {
    for policy in [
        AllocatorPolicy::ClassicalUniform,
        AllocatorPolicy::QuantumAvoidWorst,
    ] {
        let curve = throughput_curve(policy);
        for w in curve.windows(2) {
            assert!(w[1] <= w[0], "{policy:?}: {curve:?}");
        }
        assert_eq!(*curve.last().unwrap(), 0.0);
    }
}

/// A three-channel sub-game has a higher mean success count than the
/// four-channel game under the enhance-optimum phase, so light primary
/// traffic raises throughput for that policy.
#[test]
fn enhance_optimum_throughput_is_not_monotone() {
    let mean_successes =
        |f: usize| success_moments(&quantum_law(f, Regime::EnhanceOptimum.phase(f)), f).0;
    assert!((mean_successes(3) - 2.0).abs() < 1e-12);
    assert!(mean_successes(4) < mean_successes(3));

    let curve = throughput_curve(AllocatorPolicy::QuantumEnhanceOptimum);
    assert!(curve[1] > curve[0], "{curve:?}");
}

#[test]
fn full_mesh_avoid_worst_never_collapses() {
    let cfg = CellConfig::star(5, 0.0, 20_000, 4).with_topology(Topology::MeshRounds {
        degree: 4,
        rounds_per_slot: None,
    });
    let m = simulate(&cfg, AllocatorPolicy::QuantumAvoidWorst, |_| {}).unwrap();
    assert_eq!(m.arbitrations, 100_000);
    assert_eq!(m.all_same_rate, 0.0);
}

#[test]
fn single_full_round_matches_star() {
    const SLOTS: u64 = 200_000;
    let star = CellConfig::star(4, 0.0, SLOTS, 31);
    let mesh = CellConfig::star(4, 0.0, SLOTS, 32).with_topology(Topology::MeshRounds {
        degree: 3,
        rounds_per_slot: Some(1),
    });
    for policy in AllocatorPolicy::ALL {
        let a = simulate(&star, policy, |_| {}).unwrap();
        let b = simulate(&mesh, policy, |_| {}).unwrap();
        let p = a.all_distinct_rate;
        assert!(
            (a.all_distinct_rate - b.all_distinct_rate).abs()
                <= 4.0 * (2.0 * p * (1.0 - p) / SLOTS as f64).sqrt(),
            "{policy:?}: {} vs {}",
            a.all_distinct_rate,
            b.all_distinct_rate
        );
        assert!((a.throughput - b.throughput).abs() < 0.02, "{policy:?}");
    }
}

#[test]
fn quantum_energy_proxy_is_lower_at_four_users() {
    for topology in [
        Topology::Star,
        Topology::MeshRounds {
            degree: 3,
            rounds_per_slot: None,
        },
    ] {
        let cfg = CellConfig::star(4, 0.0, 100_000, 17).with_topology(topology);
        let classical = simulate(&cfg, AllocatorPolicy::ClassicalUniform, |_| {}).unwrap();
        for policy in [
            AllocatorPolicy::QuantumEnhanceOptimum,
            AllocatorPolicy::QuantumAvoidWorst,
        ] {
            let quantum = simulate(&cfg, policy, |_| {}).unwrap();
            assert!(
                quantum.energy_proxy.unwrap() < classical.energy_proxy.unwrap(),
                "{topology:?} {policy:?}: {:?} vs {:?}",
                quantum.energy_proxy,
                classical.energy_proxy
            );
        }
    }
}

#[test]
fn energy_proxy_is_at_least_one() {
    let cfg = CellConfig::star(3, 0.3, 10_000, 2);
    for policy in AllocatorPolicy::ALL {
        let m = simulate(&cfg, policy, |_| {}).unwrap();
        assert!(m.energy_proxy.unwrap() >= 1.0);
        for rate in [m.collision_rate, m.all_distinct_rate, m.all_same_rate] {
            assert!((0.0..=1.0).contains(&rate));
        }
    }
}

#[test]
fn eight_user_classical_rate() {
    const SLOTS: u64 = 1_000_000;
    let c = compare_policies(
        &CellConfig::star(8, 0.0, SLOTS, 9),
        &[
            AllocatorPolicy::ClassicalUniform,
            AllocatorPolicy::QuantumEnhanceOptimum,
        ],
    )
    .unwrap();
    let p = 40320.0 / 16_777_216.0;
    let obs = c
        .get(AllocatorPolicy::ClassicalUniform)
        .unwrap()
        .metrics
        .all_distinct_rate;
    assert!(within_sigmas(obs, p, p * (1.0 - p), SLOTS, 3.0), "{obs}");
}
