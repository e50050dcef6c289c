use thiserror::Error;

/// Errors raised by the auction mechanisms, the learner and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuctionError {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("empty bid profile")]
    EmptyProfile,

    #[error("group {group} has a top bid of zero; group probabilities are undefined")]
    DegenerateSupport { group: usize },

    #[error("group {group} has no members on the statistics side after {attempts} split attempts")]
    ResampleNeeded { group: usize, attempts: usize },

    #[error("group-probability program infeasible for epsilon {epsilon}; minimal feasible epsilon is {min_epsilon}")]
    Infeasible { epsilon: f64, min_epsilon: f64 },

    #[error("vertex enumeration supports at most {max} groups, got {m}")]
    TooManyGroups { m: usize, max: usize },

    #[error("all scores are zero on the auction side")]
    DegenerateScore,

    #[error("training diverged at episode {episode}: {reason}")]
    Diverged { episode: usize, reason: String },

    #[error("no fairness-feasible score function found in {episodes} episodes")]
    NoSolution { episodes: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, AuctionError>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(AuctionError::Contract(msg.into()))
}
