//! Error type shared by every module in the crate.

use thiserror::Error;

/// Everything that can go wrong while evaluating the model.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or parameters: malformed JSON, missing keys,
    /// out-of-range values, unsupported combinations.
    #[error("config error: {0}")]
    Config(String),

    /// The feasibility condition fails at `age`: the product of the
    /// discount rate and the bequest multiple must stay below
    /// `1 + k / A(age)`.
    #[error(
        "infeasible scenario at age {age}: k*beta = {kbeta} is not below 1 + k/A = {bound} (margin {margin})"
    )]
    Infeasible {
        age: f64,
        kbeta: f64,
        bound: f64,
        margin: f64,
    },

    /// The hazard rate is negative somewhere on the requested age range.
    #[error("hazard is negative below age {threshold:.3}, requested age {requested}")]
    NegativeHazard { threshold: f64, requested: f64 },

    /// Settling a pooled-sharing obligation would drive a surviving
    /// member's wealth to zero or below.
    #[error(
        "pool sharing infeasible: settling {deceased}'s obligation asks {payer} for weight share {share}, at or above the bound {bound}"
    )]
    PoolInfeasible {
        deceased: String,
        payer: String,
        share: f64,
        bound: f64,
    },

    /// Truncating an integral at `max_age` leaves more tail mass than the
    /// absolute tolerance allows.
    #[error(
        "integral tail beyond max_age {max_age} not negligible: bound {tail_bound:e} exceeds {abs_tol:e}"
    )]
    Truncation {
        max_age: f64,
        tail_bound: f64,
        abs_tol: f64,
    },

    /// A numerical routine diverged or failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit-code bucket used by the command-line tool: 2 for configuration
    /// problems, 3 for infeasible scenarios, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Infeasible { .. }
            | Error::NegativeHazard { .. }
            | Error::PoolInfeasible { .. } => 3,
            Error::Truncation { .. } | Error::Numerical(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
