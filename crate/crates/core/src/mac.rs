//! Slotted cognitive-radio MAC simulation of one cell.
//!
//! Each slot, primary users occupy channels independently with probability
//! `primary_activity`. The cognitive users then get channels from an
//! [`AllocatorPolicy`] and transmit; a user succeeds when alone on its
//! channel. The game needs as many users as channels, so when only `f`
//! channels are free the arbiter plays an `f × f` game on `f` randomly
//! chosen users and the rest defer.
//!
//! Random streams: every slot draws its environment (occupancy and deferral
//! choices) from its own ChaCha stream keyed by the run seed, so all policies
//! and all activity levels see common random numbers. Each policy samples
//! allocations from a separate stream keyed by the seed and the policy kind.

use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{sample_outcome, AssignmentTuple, GameConfig, Regime, MAX_PLAYERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocatorPolicy {
    /// Every user picks a channel independently and uniformly.
    ClassicalUniform,
    /// Quantum game with `p = n(n−1)/2`.
    QuantumEnhanceOptimum,
    /// Quantum game with `p = 1`.
    QuantumAvoidWorst,
}

impl AllocatorPolicy {
    pub const ALL: [AllocatorPolicy; 3] = [
        AllocatorPolicy::ClassicalUniform,
        AllocatorPolicy::QuantumEnhanceOptimum,
        AllocatorPolicy::QuantumAvoidWorst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AllocatorPolicy::ClassicalUniform => "classical-uniform",
            AllocatorPolicy::QuantumEnhanceOptimum => "quantum-enhance-optimum",
            AllocatorPolicy::QuantumAvoidWorst => "quantum-avoid-worst",
        }
    }

    pub fn regime(self) -> Option<Regime> {
        match self {
            AllocatorPolicy::ClassicalUniform => None,
            AllocatorPolicy::QuantumEnhanceOptimum => Some(Regime::EnhanceOptimum),
            AllocatorPolicy::QuantumAvoidWorst => Some(Regime::AvoidWorst),
        }
    }

    fn stream_tag(self) -> u64 {
        match self {
            AllocatorPolicy::ClassicalUniform => 1,
            AllocatorPolicy::QuantumEnhanceOptimum => 2,
            AllocatorPolicy::QuantumAvoidWorst => 3,
        }
    }

    /// Channels for an `n × n` game, `n ≥ 2`.
    pub fn allocate<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Result<AssignmentTuple> {
        match self.regime() {
            None => Ok(AssignmentTuple::new(
                (0..n).map(|_| rng.gen_range(0..n)).collect(),
            )),
            Some(regime) => Ok(sample_outcome(&GameConfig::new(n, regime.phase(n))?, rng)),
        }
    }
}

impl std::str::FromStr for AllocatorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown policy `{s}`")))
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Topology {
    /// The base station arbitrates one game per slot for all users.
    #[default]
    Star,
    /// Every node takes a turn as arbiter for itself and its `degree` ring
    /// neighbours. `rounds_per_slot` defaults to one round per node.
    MeshRounds {
        degree: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rounds_per_slot: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyModel {
    /// Charged per transmission attempt.
    pub attempt_cost: f64,
    /// Charged per arbitration round a mesh node runs.
    pub arbitration_cost: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            attempt_cost: 1.0,
            arbitration_cost: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub n_users: usize,
    pub n_channels: usize,
    pub primary_activity: f64,
    pub slots: u64,
    pub seed: u64,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub energy: EnergyModel,
}

impl CellConfig {
    pub fn star(n: usize, primary_activity: f64, slots: u64, seed: u64) -> Self {
        Self {
            n_users: n,
            n_channels: n,
            primary_activity,
            slots,
            seed,
            topology: Topology::Star,
            energy: EnergyModel::default(),
        }
    }

    pub fn with_topology(mut self, topology: Topology) -> Self {
        self.topology = topology;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users != self.n_channels {
            return Err(Error::InvalidConfig(format!(
                "the game is square: n_users ({}) must equal n_channels ({})",
                self.n_users, self.n_channels
            )));
        }
        if self.n_users < 2 {
            return Err(Error::InvalidConfig(
                "at least two users are required".into(),
            ));
        }
        if self.n_users > MAX_PLAYERS {
            return Err(Error::ResourceLimit {
                what: "n_users",
                value: self.n_users,
                limit: MAX_PLAYERS,
            });
        }
        if !(0.0..=1.0).contains(&self.primary_activity) {
            return Err(Error::InvalidConfig(format!(
                "primary_activity must lie in [0, 1], got {}",
                self.primary_activity
            )));
        }
        if self.slots == 0 {
            return Err(Error::EmptyRun);
        }
        if let Topology::MeshRounds {
            degree,
            rounds_per_slot,
        } = self.topology
        {
            if degree == 0 || degree >= self.n_users {
                return Err(Error::InvalidTopology(format!(
                    "ring degree must be in 1..{}, got {degree}",
                    self.n_users
                )));
            }
            if rounds_per_slot == Some(0) {
                return Err(Error::InvalidTopology(
                    "rounds_per_slot must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Outcome of one arbitration (one per slot in a star cell, one per round in a mesh).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotRecord {
    pub slot_index: u64,
    /// Arbiter node for mesh rounds; `None` for the base station.
    pub arbiter: Option<usize>,
    pub free_channels: Vec<usize>,
    /// Channel per user (`None` = deferred or outside the arbiter's group);
    /// `None` as a whole when no channel was free.
    pub assignment: Option<Vec<Option<usize>>>,
    pub successes: usize,
    pub colliders: usize,
    pub blocked: usize,
    pub all_same_event: bool,
}

impl SlotRecord {
    pub fn attempts(&self) -> usize {
        self.successes + self.colliders
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacMetrics {
    pub slots: u64,
    pub arbitrations: u64,
    /// Mean successful transmissions per slot.
    pub throughput: f64,
    /// Colliding users over transmitting users.
    pub collision_rate: f64,
    /// Arbitrations in which every participating user succeeded.
    pub all_distinct_rate: f64,
    /// Arbitrations in which every transmitter chose one channel.
    pub all_same_rate: f64,
    /// Energy spent per successful transmission; `None` if nothing got through.
    pub energy_proxy: Option<f64>,
    pub total_attempts: u64,
    pub total_successes: u64,
}

#[derive(Debug, Default, Clone)]
struct Accumulator {
    arbitrations: u64,
    attempts: u64,
    successes: u64,
    colliders: u64,
    all_distinct: u64,
    all_same: u64,
    energy: f64,
}

impl Accumulator {
    fn finish(&self, slots: u64) -> MacMetrics {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        MacMetrics {
            slots,
            arbitrations: self.arbitrations,
            throughput: ratio(self.successes, slots),
            collision_rate: ratio(self.colliders, self.attempts),
            all_distinct_rate: ratio(self.all_distinct, self.arbitrations),
            all_same_rate: ratio(self.all_same, self.arbitrations),
            energy_proxy: (self.successes > 0).then(|| self.energy / self.successes as f64),
            total_attempts: self.attempts,
            total_successes: self.successes,
        }
    }
}

const ALLOCATOR_STREAM_BASE: u64 = 1 << 63;

fn environment_rng(base: &ChaCha8Rng, slot: u64) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(slot);
    rng
}

/// Users in the ring neighbourhood of `arbiter`: itself, then
/// `+1, −1, +2, −2, …` until `degree` neighbours are collected.
pub fn ring_group(n_users: usize, arbiter: usize, degree: usize) -> Vec<usize> {
    let mut group = vec![arbiter];
    let mut step = 1;
    while group.len() <= degree {
        group.push((arbiter + step) % n_users);
        if group.len() <= degree {
            group.push((arbiter + n_users - step) % n_users);
        }
        step += 1;
    }
    group
}

/// Per-user channels (`None` if nothing was free), successes, colliders and
/// whether every player landed on one channel.
type Arbitration = (Option<Vec<Option<usize>>>, usize, usize, bool);

/// One arbitration over `group` with the slot's free channels.
fn arbitrate(
    n_users: usize,
    group: &[usize],
    free: &[usize],
    env: &mut ChaCha8Rng,
    policy: AllocatorPolicy,
    alloc_rng: &mut ChaCha8Rng,
) -> Result<Arbitration> {
    if free.is_empty() {
        return Ok((None, 0, 0, false));
    }
    let size = group.len().min(free.len());
    let players: Vec<usize> = if size < group.len() {
        let mut picked: Vec<usize> = sample(env, group.len(), size)
            .into_iter()
            .map(|i| group[i])
            .collect();
        picked.sort_unstable();
        picked
    } else {
        group.to_vec()
    };
    let channels: Vec<usize> = if size < free.len() {
        let mut picked: Vec<usize> = sample(env, free.len(), size)
            .into_iter()
            .map(|i| free[i])
            .collect();
        picked.sort_unstable();
        picked
    } else {
        free.to_vec()
    };

    let local = if size == 1 {
        AssignmentTuple::new(vec![0])
    } else {
        policy.allocate(size, alloc_rng)?
    };

    let mut assignment = vec![None; n_users];
    let mut load = vec![0usize; size];
    for (&user, &c) in players.iter().zip(local.channels()) {
        assignment[user] = Some(channels[c]);
        load[c] += 1;
    }
    let successes = load.iter().filter(|&&l| l == 1).count();
    let colliders = size - successes;
    let all_same = size >= 2 && load.contains(&size);
    Ok((Some(assignment), successes, colliders, all_same))
}

/// Runs the configured topology, calling `sink` for every arbitration.
pub fn simulate<F>(config: &CellConfig, policy: AllocatorPolicy, mut sink: F) -> Result<MacMetrics>
where
    F: FnMut(&SlotRecord),
{
    config.validate()?;
    let n = config.n_users;
    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let mut alloc_rng = base.clone();
    alloc_rng.set_stream(ALLOCATOR_STREAM_BASE | policy.stream_tag());

    let (groups_per_slot, degree) = match config.topology {
        Topology::Star => (1, n - 1),
        Topology::MeshRounds {
            degree,
            rounds_per_slot,
        } => (rounds_per_slot.unwrap_or(n), degree),
    };
    let is_mesh = matches!(config.topology, Topology::MeshRounds { .. });

    let mut acc = Accumulator::default();
    for slot in 0..config.slots {
        let mut env = environment_rng(&base, slot);
        let free: Vec<usize> = (0..config.n_channels)
            .filter(|_| env.gen::<f64>() >= config.primary_activity)
            .collect();

        for round in 0..groups_per_slot {
            let (arbiter, group) = if is_mesh {
                let arbiter = ((slot * groups_per_slot as u64 + round as u64) % n as u64) as usize;
                (Some(arbiter), ring_group(n, arbiter, degree))
            } else {
                (None, (0..n).collect())
            };
            let (assignment, successes, colliders, all_same) =
                arbitrate(n, &group, &free, &mut env, policy, &mut alloc_rng)?;

            let attempts = successes + colliders;
            acc.arbitrations += 1;
            acc.attempts += attempts as u64;
            acc.successes += successes as u64;
            acc.colliders += colliders as u64;
            acc.all_distinct += (successes == group.len()) as u64;
            acc.all_same += all_same as u64;
            acc.energy += attempts as f64 * config.energy.attempt_cost;
            if is_mesh {
                acc.energy += config.energy.arbitration_cost;
            }

            sink(&SlotRecord {
                slot_index: slot,
                arbiter,
                free_channels: free.clone(),
                assignment,
                successes,
                colliders,
                blocked: group.len() - attempts,
                all_same_event: all_same,
            });
        }
    }
    Ok(acc.finish(config.slots))
}

#[derive(Debug, Clone)]
pub struct CellRun {
    pub metrics: MacMetrics,
    pub records: Vec<SlotRecord>,
}

/// Runs the cell and keeps every record. Use [`simulate`] with a streaming
/// sink for long runs.
pub fn run_cell(config: &CellConfig, policy: AllocatorPolicy) -> Result<CellRun> {
    let mut records = Vec::new();
    let metrics = simulate(config, policy, |r| records.push(r.clone()))?;
    Ok(CellRun { metrics, records })
}

/// Mesh variant: every node acts as arbiter for its ring neighbourhood.
pub fn run_mesh_rounds(config: &CellConfig, policy: AllocatorPolicy) -> Result<MacMetrics> {
    if !matches!(config.topology, Topology::MeshRounds { .. }) {
        return Err(Error::InvalidTopology(
            "run_mesh_rounds needs a mesh-rounds topology".into(),
        ));
    }
    simulate(config, policy, |_| {})
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyResult {
    pub policy: AllocatorPolicy,
    pub metrics: MacMetrics,
    /// `all_distinct_rate` over the baseline's; `None` if the baseline is 0.
    pub all_distinct_ratio: Option<f64>,
    /// `all_same_rate` over the baseline's; `None` if the baseline is 0.
    pub all_same_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub config: CellConfig,
    pub baseline: AllocatorPolicy,
    pub results: Vec<PolicyResult>,
}

impl Comparison {
    /// Ratios are taken against the first classical policy, or the first entry.
    pub fn from_runs(config: CellConfig, runs: Vec<(AllocatorPolicy, MacMetrics)>) -> Result<Self> {
        if runs.len() < 2 {
            return Err(Error::InvalidConfig(
                "comparison needs at least two policies".into(),
            ));
        }
        let (baseline, base) = runs
            .iter()
            .find(|(p, _)| *p == AllocatorPolicy::ClassicalUniform)
            .unwrap_or(&runs[0])
            .to_owned();
        let ratio = |a: f64, b: f64| (b > 0.0).then(|| a / b);
        let results = runs
            .into_iter()
            .map(|(policy, metrics)| PolicyResult {
                policy,
                metrics,
                all_distinct_ratio: ratio(metrics.all_distinct_rate, base.all_distinct_rate),
                all_same_ratio: ratio(metrics.all_same_rate, base.all_same_rate),
            })
            .collect();
        Ok(Self {
            config,
            baseline,
            results,
        })
    }

    pub fn get(&self, policy: AllocatorPolicy) -> Option<&PolicyResult> {
        self.results.iter().find(|r| r.policy == policy)
    }
}

/// Runs each policy on the same environment sequence. Runs execute in
/// parallel; each owns its streams, so results do not depend on scheduling.
pub fn compare_policies(config: &CellConfig, policies: &[AllocatorPolicy]) -> Result<Comparison> {
    if policies.len() < 2 {
        return Err(Error::InvalidConfig(
            "comparison needs at least two policies".into(),
        ));
    }
    let runs = policies
        .par_iter()
        .map(|&policy| simulate(config, policy, |_| {}).map(|m| (policy, m)))
        .collect::<Result<Vec<_>>>()?;
    Comparison::from_runs(config.clone(), runs)
}

/// Per-arbitration CSV: `slot,free_channels,policy,successes,colliders,all_same`.
/// Free channels are `;`-separated.
pub struct SlotCsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> SlotCsvWriter<W> {
    pub fn new(out: W) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record([
            "slot",
            "free_channels",
            "policy",
            "successes",
            "colliders",
            "all_same",
        ])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, policy: AllocatorPolicy, record: &SlotRecord) -> csv::Result<()> {
        let free = record
            .free_channels
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(";");
        self.inner.write_record([
            record.slot_index.to_string(),
            free,
            policy.name().to_string(),
            record.successes.to_string(),
            record.colliders.to_string(),
            (record.all_same_event as u8).to_string(),
        ])
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}
