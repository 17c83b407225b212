use thiserror::Error;

/// Errors produced by model construction, kernel evaluation, and estimation.
#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter is out of range (non-positive rate, empty rate array, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The requested truncation level is too small.
    #[error("truncation level too small: {0}")]
    Size(String),

    /// An argument is outside the operation's domain (negative time, bad state index, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The generator does not have the structure an operation requires.
    #[error("structural error: {0}")]
    Structure(String),

    /// The operation is defined only for absorbing models.
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// An argument list is malformed (too few points, non-increasing schedule, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A conditional-law estimate was refused because too few paths survive.
    #[error(
        "infeasible conditional estimate at t={t}: survival estimate {survival_estimate:.3e} \
         gives {expected_survivors:.1} expected survivors out of {n_replicates} (need >= 100)"
    )]
    Infeasible {
        survival_estimate: f64,
        expected_survivors: f64,
        n_replicates: u64,
        t: f64,
    },

    /// A numerical routine failed (eigensolver error, catastrophic cancellation, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
