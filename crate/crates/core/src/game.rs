//! Closed-form mathematics of the one-shot N-user / N-channel minority game.
//!
//! Every player holds one qudit of the shared state
//! `(1/√n) Σ_k ω^{k·p} |k k … k⟩` and applies the same Fourier-type strategy
//! `U[r][c] = ω^{r·c} / √n`. After all players act, the amplitude of an
//! assignment `(c_0, …, c_{n−1})` is
//!
//! ```text
//! α(c) = (1/√n)^{n+1} Σ_k ω^{k·m},   m = p + Σ_j c_j
//! ```
//!
//! which is a geometric sum: it equals `n·(1/√n)^{n+1}` when `m ≡ 0 (mod n)`
//! and vanishes otherwise. The functions here evaluate that structure exactly,
//! without building a state vector.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n` accepted by the closed-form operations. `n^n` for `n = 16` is
/// `2^64`, which still fits the 128-bit exact counters.
pub const MAX_PLAYERS: usize = 16;

/// Magnitude below which an amplitude counts as destructively cancelled.
pub const ZERO_AMPLITUDE: f64 = 1e-12;

/// Exact probability as a reduced fraction.
pub type ExactProbability = Ratio<u128>;

/// Number of users (= number of channels) and the phase parameter of the
/// entangled preparation.
///
/// `p` is kept exactly as given; arithmetic only ever sees `p mod n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameConfig {
    n: usize,
    p: u64,
}

impl GameConfig {
    pub fn new(n: usize, p: u64) -> Result<Self> {
        check_players(n)?;
        Ok(Self { n, p })
    }

    /// `p = n(n−1)/2`: constructive interference on every all-distinct assignment.
    pub fn enhance_optimum(n: usize) -> Result<Self> {
        Self::new(n, Regime::EnhanceOptimum.phase(n))
    }

    /// `p = 1`: destructive interference on every all-same assignment.
    pub fn avoid_worst(n: usize) -> Result<Self> {
        Self::new(n, Regime::AvoidWorst.phase(n))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// `p mod n`.
    pub fn effective_phase(&self) -> usize {
        (self.p % self.n as u64) as usize
    }
}

/// The two allocation regimes, named by what they optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    EnhanceOptimum,
    AvoidWorst,
}

impl Regime {
    pub fn phase(self, n: usize) -> u64 {
        match self {
            Regime::EnhanceOptimum => (n as u64) * (n as u64).saturating_sub(1) / 2,
            Regime::AvoidWorst => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::EnhanceOptimum => "enhance-optimum",
            Regime::AvoidWorst => "avoid-worst",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enhance-optimum" => Ok(Regime::EnhanceOptimum),
            "avoid-worst" => Ok(Regime::AvoidWorst),
            other => Err(Error::InvalidConfig(format!("unknown regime `{other}`"))),
        }
    }
}

/// One outcome of the game: entry `j` is the channel assigned to user `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssignmentTuple(Vec<usize>);

impl AssignmentTuple {
    pub fn new(channels: Vec<usize>) -> Self {
        Self(channels)
    }

    pub fn constant(n: usize, channel: usize) -> Self {
        Self(vec![channel; n])
    }

    pub fn channels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// Checks length and channel range against an `n`-user game.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: self.0.len(),
            });
        }
        match self.0.iter().find(|&&c| c >= n) {
            Some(&channel) => Err(Error::ChannelOutOfRange { channel, n }),
            None => Ok(()),
        }
    }

    /// Big-endian base-`n` index: user 0 is the most significant digit.
    pub fn index(&self, n: usize) -> usize {
        self.0.iter().fold(0, |acc, &c| acc * n + c)
    }

    pub fn from_index(mut index: usize, n: usize) -> Self {
        let mut channels = vec![0; n];
        for slot in channels.iter_mut().rev() {
            *slot = index % n;
            index /= n;
        }
        Self(channels)
    }

    pub fn channel_sum(&self) -> u64 {
        self.0.iter().map(|&c| c as u64).sum()
    }

    /// True when no two users share a channel.
    pub fn is_all_distinct(&self) -> bool {
        let mut seen = vec![false; self.0.len().max(self.0.iter().max().map_or(0, |m| m + 1))];
        self.0
            .iter()
            .all(|&c| !std::mem::replace(&mut seen[c], true))
    }

    /// True when every user sits on one channel.
    pub fn is_all_same(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }
}

impl fmt::Display for AssignmentTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for AssignmentTuple {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.split('-')
            .map(|d| d.trim().parse())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl From<Vec<usize>> for AssignmentTuple {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Square `n × n` complex matrix acting on a single qudit, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyMatrix {
    n: usize,
    entries: Vec<Complex64>,
}

impl StrategyMatrix {
    /// The Fourier strategy `U[r][c] = ω_n^{r·c} / √n`. For `n = 2` this is the
    /// Hadamard gate.
    pub fn fourier(n: usize) -> Result<Self> {
        check_players(n)?;
        let scale = 1.0 / (n as f64).sqrt();
        let entries = (0..n)
            .flat_map(|r| (0..n).map(move |c| root_of_unity(n, (r * c) as u64) * scale))
            .collect();
        Ok(Self { n, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self { n, entries }
    }

    /// Arbitrary matrix; unitarity is not checked.
    pub fn from_entries(n: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                actual: entries.len(),
            });
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.n + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn conjugate_transpose(&self) -> Self {
        let n = self.n;
        let entries = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .map(|(r, c)| self.get(c, r).conj())
            .collect();
        Self { n, entries }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                actual: other.n,
            });
        }
        let n = self.n;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                entries[r * n + c] = (0..n).map(|k| self.get(r, k) * other.get(k, c)).sum();
            }
        }
        Ok(Self { n, entries })
    }

    /// Largest entrywise deviation of `M·M†` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let product = self
            .mul(&self.conjugate_transpose())
            .expect("square matrix of matching size");
        let n = self.n;
        (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .map(|(r, c)| {
                let expected = if r == c { 1.0 } else { 0.0 };
                (product.get(r, c) - expected).norm()
            })
            .fold(0.0, f64::max)
    }
}

fn check_players(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "n must be at least 2, got {n}"
        )));
    }
    if n > MAX_PLAYERS {
        return Err(Error::ResourceLimit {
            what: "n",
            value: n,
            limit: MAX_PLAYERS,
        });
    }
    Ok(())
}

/// `e^{2πi·k/n}` with `k` already reduced into `[0, n)`.
fn root_of_unity(n: usize, k: u64) -> Complex64 {
    let k = k % n as u64;
    Complex64::from_polar(1.0, TAU * k as f64 / n as f64)
}

/// `ω_n^k = e^{2πik/n}` for any integer `k`.
pub fn omega(n: usize, k: i64) -> Result<Complex64> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "n must be at least 2, got {n}"
        )));
    }
    Ok(root_of_unity(n, k.rem_euclid(n as i64) as u64))
}

/// Amplitude of the branch `|k k … k⟩` in the entangled preparation.
pub fn entangled_coefficient(config: &GameConfig, k: usize) -> Result<Complex64> {
    let n = config.n();
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, len: n });
    }
    let phase = (k as u64 * config.effective_phase() as u64) % n as u64;
    Ok(root_of_unity(n, phase) / (n as f64).sqrt())
}

pub fn strategy_matrix(n: usize) -> Result<StrategyMatrix> {
    StrategyMatrix::fourier(n)
}

/// `(1/√n)^{n+1}`.
fn final_scale(n: usize) -> f64 {
    (n as f64).powf(-((n + 1) as f64) / 2.0)
}

/// `m mod n` with `m = p + Σ c_j`.
fn phase_residue(config: &GameConfig, t: &AssignmentTuple) -> usize {
    let n = config.n() as u64;
    ((config.effective_phase() as u64 + t.channel_sum() % n) % n) as usize
}

/// Final amplitude of an assignment after every player applies the Fourier
/// strategy, evaluated as the explicit sum over the `n` entangled branches.
pub fn outcome_amplitude(config: &GameConfig, t: &AssignmentTuple) -> Result<Complex64> {
    t.validate(config.n())?;
    let n = config.n();
    let m = phase_residue(config, t) as u64;
    let sum: Complex64 = (0..n as u64).map(|k| root_of_unity(n, k * m)).sum();
    Ok(sum * final_scale(n))
}

/// Closed-form branch of [`outcome_amplitude`]: `n·(1/√n)^{n+1}` on the
/// support, exactly zero elsewhere.
pub fn outcome_amplitude_closed_form(
    config: &GameConfig,
    t: &AssignmentTuple,
) -> Result<Complex64> {
    t.validate(config.n())?;
    if phase_residue(config, t) == 0 {
        Ok(Complex64::new(
            config.n() as f64 * final_scale(config.n()),
            0.0,
        ))
    } else {
        Ok(Complex64::new(0.0, 0.0))
    }
}

/// Whether the assignment survives the interference: `(p + Σ c_j) ≡ 0 (mod n)`.
pub fn support_predicate(config: &GameConfig, t: &AssignmentTuple) -> Result<bool> {
    t.validate(config.n())?;
    Ok(phase_residue(config, t) == 0)
}

/// Outcome statistics of the quantum game, exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalyticProbabilities {
    pub n: usize,
    pub p: u64,
    pub p_all_distinct: ExactProbability,
    pub p_all_same: ExactProbability,
    pub support_size: u128,
    pub per_outcome_prob: ExactProbability,
}

/// Uniform-random (classical) reference statistics, exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassicalProbabilities {
    pub n: usize,
    pub p_all_distinct: ExactProbability,
    pub p_all_same: ExactProbability,
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

fn power(n: usize, e: usize) -> u128 {
    (n as u128).pow(e as u32)
}

pub fn analytic_probabilities(config: &GameConfig) -> AnalyticProbabilities {
    let n = config.n();
    let per_outcome_den = power(n, n - 1);
    let per_outcome = Ratio::new(1, per_outcome_den);

    // Every permutation has channel sum n(n−1)/2; every constant tuple has
    // channel sum ≡ 0. So each family is either entirely in the support or
    // entirely outside it.
    let residue_of_permutations = (config.effective_phase() + (n * (n - 1) / 2) % n) % n;
    let permutations_in_support = if residue_of_permutations == 0 {
        factorial(n)
    } else {
        0
    };
    let constants_in_support = if config.effective_phase() == 0 {
        n as u128
    } else {
        0
    };

    AnalyticProbabilities {
        n,
        p: config.p(),
        p_all_distinct: Ratio::new(permutations_in_support, per_outcome_den),
        p_all_same: Ratio::new(constants_in_support, per_outcome_den),
        support_size: per_outcome_den,
        per_outcome_prob: per_outcome,
    }
}

pub fn classical_probabilities(n: usize) -> Result<ClassicalProbabilities> {
    check_players(n)?;
    Ok(ClassicalProbabilities {
        n,
        p_all_distinct: Ratio::new(factorial(n), power(n, n)),
        p_all_same: Ratio::new(1, power(n, n - 1)),
    })
}

/// Convert an exact probability to `f64`.
pub fn to_f64(p: ExactProbability) -> f64 {
    *p.numer() as f64 / *p.denom() as f64
}

/// Draw one measurement outcome of the final state.
///
/// The final distribution is uniform over the `n^{n−1}` tuples of the
/// support, so the first `n−1` channels are drawn uniformly and the last one
/// is forced to close the residue class. Each support tuple has exactly one
/// preimage.
pub fn sample_outcome<R: Rng + ?Sized>(config: &GameConfig, rng: &mut R) -> AssignmentTuple {
    let n = config.n();
    let mut channels = Vec::with_capacity(n);
    let mut sum = config.effective_phase();
    for _ in 0..n - 1 {
        let c = rng.gen_range(0..n);
        sum = (sum + c) % n;
        channels.push(c);
    }
    channels.push((n - sum) % n);
    AssignmentTuple(channels)
}
