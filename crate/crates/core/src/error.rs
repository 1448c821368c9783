use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical routines and the point-set reader.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series truncation needs degree {required} but the hard cap is {cap}")]
    TruncationInfeasible { required: u64, cap: usize },

    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: expected {expected} coordinates, found {found}")]
    DimensionMismatch {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: point has norm {norm}, not within 1e-6 of the unit sphere")]
    NonUnitNorm {
        path: PathBuf,
        line: usize,
        norm: f64,
    },

    #[error("point set sequence: {0}")]
    Sequence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Error {
    Error::Domain {
        what,
        value,
        domain,
    }
}
