//! Goodness of fit for the two samplers against the exact distribution.

use std::collections::HashMap;

use qgame_core::game::{sample_outcome, AssignmentTuple, GameConfig, Regime};
use qgame_core::qudit::run_protocol;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const DRAWS: usize = 100_000;
const ALPHA: f64 = 1e-3;

/// Pearson chi-square p-value of `counts` against a uniform law over `support`.
fn uniform_p_value(counts: &HashMap<AssignmentTuple, u64>, support: &[AssignmentTuple]) -> f64 {
    let expected = DRAWS as f64 / support.len() as f64;
    let stat: f64 = support
        .iter()
        .map(|t| {
            let observed = *counts.get(t).unwrap_or(&0) as f64;
            (observed - expected).powi(2) / expected
        })
        .sum();
    ChiSquared::new((support.len() - 1) as f64)
        .unwrap()
        .sf(stat)
}

/// Support by brute force: tuples whose channel sum plus `p` vanishes mod `n`.
fn support(cfg: &GameConfig) -> Vec<AssignmentTuple> {
    let n = cfg.n();
    (0..n.pow(n as u32))
        .map(|i| AssignmentTuple::from_index(i, n))
        .filter(|t| (t.channel_sum() + cfg.p()).is_multiple_of(n as u64))
        .collect()
}

fn configs() -> impl Iterator<Item = GameConfig> {
    [2usize, 3, 4].into_iter().flat_map(|n| {
        [Regime::EnhanceOptimum, Regime::AvoidWorst]
            .into_iter()
            .map(move |r| GameConfig::new(n, r.phase(n)).unwrap())
    })
}

fn check(cfg: &GameConfig, counts: HashMap<AssignmentTuple, u64>) {
    let support = support(cfg);
    for t in counts.keys() {
        assert!(
            support.contains(t),
            "n={} p={}: drew {t} off the support",
            cfg.n(),
            cfg.p()
        );
    }
    let p = uniform_p_value(&counts, &support);
    assert!(
        p > ALPHA,
        "n={} p={}: chi-square p-value {p}",
        cfg.n(),
        cfg.p()
    );
}

#[test]
fn direct_sampler_is_uniform_on_the_support() {
    for (i, cfg) in configs().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let mut counts = HashMap::new();
        for _ in 0..DRAWS {
            *counts.entry(sample_outcome(&cfg, &mut rng)).or_insert(0) += 1;
        }
        check(&cfg, counts);
    }
}

#[test]
fn state_vector_measurement_is_uniform_on_the_support() {
    for (i, cfg) in configs().enumerate() {
        let sampler = run_protocol(&cfg).unwrap().sampler().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + i as u64);
        let mut counts = HashMap::new();
        for _ in 0..DRAWS {
            *counts.entry(sampler.sample(&mut rng)).or_insert(0) += 1;
        }
        check(&cfg, counts);
    }
}
