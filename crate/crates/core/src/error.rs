use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid game configuration: {0}")]
    InvalidConfig(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("channel {channel} out of range for {n} channels")]
    ChannelOutOfRange { channel: usize, n: usize },

    #[error("resource limit exceeded: {what} = {value} (limit {limit})")]
    ResourceLimit {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("state is not normalized (norm² = {norm_sqr})")]
    StateIntegrity { norm_sqr: f64 },

    #[error("unsupported size n = {0}: the qubit construction needs a power of two")]
    UnsupportedSize(usize),

    #[error("circuit validation failed: {0}")]
    CircuitValidation(String),

    #[error("simulation has zero slots")]
    EmptyRun,

    #[error("invalid topology: {0}")]
    InvalidTopology(String),
}
