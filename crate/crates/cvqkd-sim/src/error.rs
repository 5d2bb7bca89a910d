//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a mathematical precondition (negative length,
    /// non-positive shot noise, empty data, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Not enough data points to carry out a fit or an estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A least-squares fit produced parameters outside their physical range.
    #[error("fit failure: {0}")]
    FitFailure(String),

    /// An estimator is undefined for the given data (e.g. zero covariance
    /// makes the excess-noise estimate meaningless).
    #[error("estimate undefined: {0}")]
    UndefinedEstimate(String),

    /// A bracketed root search found no sign change.
    #[error("no root in bracket: {0}")]
    NoRoot(String),

    /// A solver target cannot be met anywhere in its search domain.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A closed-form evaluation left its numeric validity domain
    /// (e.g. a symplectic eigenvalue below 1 beyond tolerance).
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// Invalid scenario or CLI configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
