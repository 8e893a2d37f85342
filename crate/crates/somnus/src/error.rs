use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A probability vector failed validation (negative entry, bad sum).
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// The round protocol was broken (inactive arm chosen, empty active set,
    /// loss assignment not matching the active set, mode mismatch).
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    /// All weights vanished when forming a sampling distribution.
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    /// A loss estimator hit a zero denominator; indicates a sampler/
    /// distribution mismatch upstream.
    #[error("degenerate estimator: {0}")]
    DegenerateEstimator(String),

    /// The FTRL dual search failed to converge.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// Horizon information handed to the tuner was unusable.
    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),

    /// Environment or experiment parameters out of range.
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    /// The virtual-expert pool would exceed the configured cap.
    #[error("expert pool too large: {size} experts exceeds cap {cap}")]
    PoolTooLarge { size: u64, cap: u64 },

    /// A closed-form bound was asked for without one of its parameters.
    #[error("missing parameter `{0}` for the requested bound")]
    MissingParameter(&'static str),

    /// An error that occurred at a specific round of an episode.
    #[error("round {round}: {source}")]
    AtRound {
        round: u64,
        #[source]
        source: Box<Error>,
    },

    /// An error that occurred in a specific replicate of an experiment.
    #[error("replicate {replicate}: {source}")]
    AtReplicate {
        replicate: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_round(self, round: u64) -> Error {
        Error::AtRound {
            round,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_replicate(self, replicate: u32) -> Error {
        Error::AtReplicate {
            replicate,
            source: Box::new(self),
        }
    }
}
