//! One-shot quantum minority game for cognitive-radio spectrum allocation.
//!
//! `n` cognitive users share `n` free channels. The base station prepares the
//! entangled state `(1/√n) Σ_k ω^{k·p} |k k … k⟩`, every user applies the
//! same Fourier strategy to its qudit, and a measurement yields the channel
//! assignment. Choosing `p = n(n−1)/2` multiplies the probability that every
//! user gets its own channel by `n` over uniform random choice; choosing
//! `p = 1` removes every outcome that puts all users on one channel.
//!
//! * [`game`]: closed forms, exact probabilities and a support sampler.
//! * [`qudit`]: dense `n^n` state-vector simulation of the same protocol.
//! * [`circuit`]: qubit-level preparation circuits for `n = 2^m` and an audit
//!   of the drawn R-gate construction against the target state.
//! * [`mac`]: slotted MAC simulation comparing the quantum regimes with a
//!   classical uniform baseline.

pub mod circuit;
pub mod error;
pub mod game;
pub mod mac;
pub mod qudit;

pub use error::{Error, Result};
pub use game::{
    analytic_probabilities, classical_probabilities, entangled_coefficient, omega,
    outcome_amplitude, sample_outcome, strategy_matrix, support_predicate, AnalyticProbabilities,
    AssignmentTuple, ClassicalProbabilities, GameConfig, Regime, StrategyMatrix,
};
pub use qudit::QuditState;
