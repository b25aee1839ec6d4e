use thiserror::Error;

/// Errors surfaced by scenario construction and the solvers.
///
/// Infeasibility of a well-posed problem is not an error: solvers report it
/// through their status/result types so callers can count and tabulate it.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or problem violated a constructor invariant.
    #[error("invalid scenario: {0}")]
    Scenario(String),

    /// An operation was called outside its mathematical domain
    /// (bad indices, non-finite inputs, degenerate geometry).
    #[error("domain error: {0}")]
    Domain(String),

    /// A channel matrix was too ill-conditioned to invert for the
    /// requested beamforming construction.
    #[error("rank-deficient channel matrix for group {group}")]
    RankDeficient { group: &'static str },

    /// An iterative solver could not proceed (no strictly feasible start,
    /// factorization breakdown).
    #[error("solver failure: {0}")]
    Solver(String),

    /// A grid-search oracle had no feasible point to report.
    #[error("grid search: {0}")]
    Grid(String),

    /// An experiment configuration could not be parsed or validated.
    /// Kept distinct from the other variants so the command-line tool
    /// can map it to its own exit code.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
