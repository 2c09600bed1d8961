use thiserror::Error;

use crate::lp::LpError;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation (wrong side, wrong market, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A desk-scale cap was exceeded; the computation was refused rather than attempted.
    #[error("resource cap exceeded: {what} would exceed the cap of {cap}")]
    Resource { what: String, cap: usize },

    #[error("conditioning event has zero mass under the prior")]
    ZeroMassEvent,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    /// A produced witness failed independent re-verification. Never expected.
    #[error("internal verification failure: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
