//! Batch front end for the threshold-detection simulator: config parsing,
//! experiment dispatch and result files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;
pub mod selftest;

use thiserror::Error;
use tsd_core::harness::HarnessError;
use tsd_core::linalg::LinalgError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error("invalid covariance: {0}")]
    Covariance(LinalgError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::Covariance(_) => EXIT_CONFIG,
            CliError::Harness(e) => match e {
                HarnessError::InvalidConfig(_)
                | HarnessError::ChannelOutOfRange { .. }
                | HarnessError::ZeroDiagonal { .. } => EXIT_CONFIG,
                _ => EXIT_NUMERIC,
            },
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}
