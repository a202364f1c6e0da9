//! Dense state vector over `n` qudits of dimension `n`.
//!
//! Basis index of `|c_0 c_1 … c_{n−1}⟩` is `Σ c_j·n^{n−1−j}` (user 0 is the
//! most significant digit). Single-site operators are applied by a strided
//! sweep over fibers; the `n^n × n^n` operator is never formed.

use std::collections::BTreeMap;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{entangled_coefficient, AssignmentTuple, GameConfig, StrategyMatrix};

/// Largest `n` simulated densely: `8^8 ≈ 1.7e7` amplitudes, about 270 MB.
pub const MAX_DENSE_PLAYERS: usize = 8;

/// Probabilities below this are dropped from [`QuditState::distribution`].
pub const DISTRIBUTION_FLOOR: f64 = 1e-15;

const MEASURE_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct QuditState {
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl QuditState {
    fn check_size(n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "n must be at least 2, got {n}"
            )));
        }
        if n > MAX_DENSE_PLAYERS {
            return Err(Error::ResourceLimit {
                what: "n (dense qudit simulation)",
                value: n,
                limit: MAX_DENSE_PLAYERS,
            });
        }
        Ok(())
    }

    /// The entangled starting state `(1/√n) Σ_k ω^{k·p} |k k … k⟩`.
    pub fn prepare_entangled(config: &GameConfig) -> Result<Self> {
        let n = config.n();
        Self::check_size(n)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n.pow(n as u32)];
        for k in 0..n {
            amplitudes[AssignmentTuple::constant(n, k).index(n)] =
                entangled_coefficient(config, k)?;
        }
        Ok(Self { n, amplitudes })
    }

    pub fn basis(tuple: &AssignmentTuple) -> Result<Self> {
        let n = tuple.len();
        Self::check_size(n)?;
        tuple.validate(n)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n.pow(n as u32)];
        amplitudes[tuple.index(n)] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amplitudes })
    }

    /// Wraps raw amplitudes. The length must be `n^n`; normalization is not enforced.
    pub fn from_amplitudes(n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::check_size(n)?;
        let expected = n.pow(n as u32);
        if amplitudes.len() != expected {
            return Err(Error::Dimension {
                expected,
                actual: amplitudes.len(),
            });
        }
        Ok(Self { n, amplitudes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, tuple: &AssignmentTuple) -> Result<Complex64> {
        tuple.validate(self.n)?;
        Ok(self.amplitudes[tuple.index(self.n)])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Apply `m` on one user's qudit.
    pub fn apply_to_site(&mut self, site: usize, m: &StrategyMatrix) -> Result<()> {
        let n = self.n;
        if m.n() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: m.n(),
            });
        }
        if site >= n {
            return Err(Error::IndexOutOfRange {
                index: site,
                len: n,
            });
        }
        let stride = n.pow((n - 1 - site) as u32);
        // Each block of n·stride amplitudes holds `stride` independent fibers.
        self.amplitudes
            .par_chunks_mut(n * stride)
            .for_each(|block| {
                let mut fiber = vec![Complex64::new(0.0, 0.0); n];
                for offset in 0..stride {
                    for (c, slot) in fiber.iter_mut().enumerate() {
                        *slot = block[offset + c * stride];
                    }
                    for r in 0..n {
                        block[offset + r * stride] =
                            m.row(r).iter().zip(&fiber).map(|(u, a)| u * a).sum();
                    }
                }
            });
        Ok(())
    }

    /// Apply `m` to every site, users 0 through n−1.
    pub fn apply_local_strategy(&mut self, m: &StrategyMatrix) -> Result<()> {
        self.apply_in_order(m, 0..self.n)
    }

    pub fn apply_in_order(
        &mut self,
        m: &StrategyMatrix,
        sites: impl IntoIterator<Item = usize>,
    ) -> Result<()> {
        for site in sites {
            self.apply_to_site(site, m)?;
        }
        Ok(())
    }

    /// `|amplitude|²` per outcome, omitting entries below [`DISTRIBUTION_FLOOR`].
    pub fn distribution(&self) -> BTreeMap<AssignmentTuple, f64> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter_map(|(i, a)| {
                let prob = a.norm_sqr();
                (prob >= DISTRIBUTION_FLOOR).then(|| (AssignmentTuple::from_index(i, self.n), prob))
            })
            .collect()
    }

    /// Sample one outcome.
    pub fn measure<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<AssignmentTuple> {
        Ok(self.sampler()?.sample(rng))
    }

    /// Precomputed cumulative distribution for repeated measurements.
    pub fn sampler(&self) -> Result<OutcomeSampler> {
        let norm_sqr = self.norm_sqr();
        if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > MEASURE_NORM_TOLERANCE {
            return Err(Error::StateIntegrity { norm_sqr });
        }
        let mut cumulative = Vec::new();
        let mut indices = Vec::new();
        let mut acc = 0.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let prob = a.norm_sqr();
            if prob > 0.0 {
                acc += prob;
                cumulative.push(acc);
                indices.push(i);
            }
        }
        Ok(OutcomeSampler {
            n: self.n,
            cumulative,
            indices,
        })
    }

    /// Text dump of nonzero amplitudes, one `index,re,im` line each.
    pub fn write_dump<W: Write>(&self, out: W) -> io::Result<()> {
        write_amplitude_dump(&self.amplitudes, out)
    }
}

pub(crate) fn write_amplitude_dump<W: Write>(
    amplitudes: &[Complex64],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "index,re,im")?;
    for (i, a) in amplitudes.iter().enumerate() {
        if a.norm_sqr() >= DISTRIBUTION_FLOOR {
            writeln!(out, "{i},{:?},{:?}", a.re, a.im)?;
        }
    }
    Ok(())
}

/// Inverse-CDF sampler over the nonzero amplitudes of a state.
#[derive(Debug, Clone)]
pub struct OutcomeSampler {
    n: usize,
    cumulative: Vec<f64>,
    indices: Vec<usize>,
}

impl OutcomeSampler {
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self
            .cumulative
            .last()
            .expect("normalized state has support");
        let u = rng.gen::<f64>() * total;
        let pos = self.cumulative.partition_point(|&c| c <= u);
        self.indices[pos.min(self.indices.len() - 1)]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AssignmentTuple {
        AssignmentTuple::from_index(self.sample_index(rng), self.n)
    }
}

/// Prepare, let every user apply the Fourier strategy, return the final state.
pub fn run_protocol(config: &GameConfig) -> Result<QuditState> {
    let mut state = QuditState::prepare_entangled(config)?;
    state.apply_local_strategy(&StrategyMatrix::fourier(config.n())?)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{analytic_probabilities, outcome_amplitude, support_predicate, to_f64};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn prepare_two_user_state() {
        let state = QuditState::prepare_entangled(&GameConfig::new(2, 1).unwrap()).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let expected = [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-s, 0.0)];
        for (a, e) in state.amplitudes().iter().zip(expected) {
            assert!((a - e).norm() < 1e-12);
        }
    }

    #[test]
    fn prepare_has_exactly_n_constant_branches() {
        for n in 2..=6 {
            for p in [0, 1, (n * (n - 1) / 2) as u64] {
                let cfg = GameConfig::new(n, p).unwrap();
                let state = QuditState::prepare_entangled(&cfg).unwrap();
                let nonzero: Vec<_> = state
                    .amplitudes()
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.norm() > 0.0)
                    .collect();
                assert_eq!(nonzero.len(), n);
                for k in 0..n {
                    let a = state.amplitude(&AssignmentTuple::constant(n, k)).unwrap();
                    assert!((a - entangled_coefficient(&cfg, k).unwrap()).norm() < 1e-12);
                }
            }
        }
        let three = QuditState::prepare_entangled(&GameConfig::new(3, 3).unwrap()).unwrap();
        for k in 0..3 {
            let a = three.amplitude(&AssignmentTuple::constant(3, k)).unwrap();
            assert!((a - c(1.0 / 3f64.sqrt(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn size_cap() {
        assert!(matches!(
            QuditState::prepare_entangled(&GameConfig::new(9, 1).unwrap()),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn hadamards_turn_two_user_state_into_success() {
        let state = run_protocol(&GameConfig::new(2, 1).unwrap()).unwrap();
        let dist = state.distribution();
        assert_eq!(dist.len(), 2);
        assert!((dist[&vec![0, 1].into()] - 0.5).abs() < 1e-12);
        assert!((dist[&vec![1, 0].into()] - 0.5).abs() < 1e-12);
        let s = 1.0 / 2f64.sqrt();
        assert!((state.amplitude(&vec![0, 1].into()).unwrap() - c(s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn identity_leaves_state_unchanged() {
        let cfg = GameConfig::new(4, 1).unwrap();
        let before = QuditState::prepare_entangled(&cfg).unwrap();
        let mut after = before.clone();
        after
            .apply_local_strategy(&StrategyMatrix::identity(4))
            .unwrap();
        for (a, b) in before.amplitudes().iter().zip(after.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut state = QuditState::prepare_entangled(&GameConfig::new(3, 1).unwrap()).unwrap();
        assert_eq!(
            state.apply_local_strategy(&StrategyMatrix::identity(4)),
            Err(Error::Dimension {
                expected: 3,
                actual: 4
            })
        );
    }

    #[test]
    fn distributions_before_and_after() {
        let fresh = QuditState::prepare_entangled(&GameConfig::new(4, 1).unwrap()).unwrap();
        let dist = fresh.distribution();
        assert_eq!(dist.len(), 4);
        assert!(dist
            .iter()
            .all(|(t, &p)| t.is_all_same() && (p - 0.25).abs() < 1e-12));

        let cfg = GameConfig::new(4, 6).unwrap();
        let dist = run_protocol(&cfg).unwrap().distribution();
        assert_eq!(dist.len(), 64);
        for (t, p) in &dist {
            assert!(support_predicate(&cfg, t).unwrap());
            assert!((p - 1.0 / 64.0).abs() < 1e-12);
        }
        assert!((dist[&vec![0, 1, 2, 3].into()] - 1.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn matches_closed_form_on_every_tuple() {
        for n in 2..=5 {
            for p in [1, (n * (n - 1) / 2) as u64] {
                let cfg = GameConfig::new(n, p).unwrap();
                let state = run_protocol(&cfg).unwrap();
                for (i, a) in state.amplitudes().iter().enumerate() {
                    let t = AssignmentTuple::from_index(i, n);
                    let expected = outcome_amplitude(&cfg, &t).unwrap().norm_sqr();
                    assert!((a.norm_sqr() - expected).abs() < 1e-10);
                }
                assert!((state.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn site_order_does_not_matter() {
        let cfg = GameConfig::new(4, 6).unwrap();
        let u = StrategyMatrix::fourier(4).unwrap();
        let mut forward = QuditState::prepare_entangled(&cfg).unwrap();
        forward.apply_in_order(&u, [0, 1, 2, 3]).unwrap();
        let mut shuffled = QuditState::prepare_entangled(&cfg).unwrap();
        shuffled.apply_in_order(&u, [2, 0, 3, 1]).unwrap();
        for (a, b) in forward.amplitudes().iter().zip(shuffled.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn measure_point_mass_and_two_user() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t: AssignmentTuple = vec![2, 0, 1].into();
        let point = QuditState::basis(&t).unwrap();
        for _ in 0..100 {
            assert_eq!(point.measure(&mut rng).unwrap(), t);
        }
        let two = run_protocol(&GameConfig::new(2, 1).unwrap()).unwrap();
        for _ in 0..1000 {
            let out = two.measure(&mut rng).unwrap();
            assert!(out.is_all_distinct());
        }
    }

    #[test]
    fn measure_rejects_unnormalized_state() {
        let amps = vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let state = QuditState::from_amplitudes(2, amps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            state.measure(&mut rng),
            Err(Error::StateIntegrity { .. })
        ));
    }

    #[test]
    fn three_user_all_distinct_frequency() {
        let cfg = GameConfig::new(3, 3).unwrap();
        let sampler = run_protocol(&cfg).unwrap().sampler().unwrap();
        let expected = to_f64(analytic_probabilities(&cfg).p_all_distinct);
        assert!((expected - 2.0 / 3.0).abs() < 1e-15);
        let shots = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let hits = (0..shots)
            .filter(|_| sampler.sample(&mut rng).is_all_distinct())
            .count();
        let sigma = (expected * (1.0 - expected) / shots as f64).sqrt();
        assert!((hits as f64 / shots as f64 - expected).abs() < 3.0 * sigma);
    }

    #[test]
    fn dump_lists_nonzero_amplitudes() {
        let state = QuditState::prepare_entangled(&GameConfig::new(2, 1).unwrap()).unwrap();
        let mut buf = Vec::new();
        state.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,"));
        assert!(lines[2].starts_with("3,-0.7071"));
    }
}
