//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The Gram matrix K + sigma_T^2 I could not be factorized. Typically
    /// caused by duplicate inputs with zero observation noise.
    #[error(
        "Gram matrix factorization failed (not positive definite); \
         consider adding a small jitter to the observation noise"
    )]
    FactorizationFailed,

    /// Feedback gains for which A = [[0, 1], [lambda1, lambda2]] is not Hurwitz.
    #[error("gains (lambda1={lambda1}, lambda2={lambda2}) do not yield a Hurwitz error matrix")]
    NonHurwitzGains { lambda1: f64, lambda2: f64 },

    /// Q (or the resulting P) failed a positive-definiteness check in the
    /// Lyapunov solve.
    #[error("Lyapunov solve rejected: {0}")]
    LyapunovRejected(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The closed-loop simulation produced a non-finite state.
    #[error("numerical blow-up: non-finite state at t = {t} s")]
    NumericalBlowUp { t: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("dataset parse error: {0}")]
    DatasetParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
