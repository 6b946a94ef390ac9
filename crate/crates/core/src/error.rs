use std::io;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node {node} out of range for a model with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("window {window} out of range ({windows} windows available)")]
    WindowOutOfRange { window: usize, windows: usize },

    #[error("unknown pattern `{0}`")]
    UnknownPattern(String),

    #[error(
        "dominating rate violated at t = {time}: total intensity {total} exceeds bound {bound}; \
         the model's declared smoothness constant is too small"
    )]
    DominatingRate { time: f64, total: f64, bound: f64 },

    #[error("statistics computed with (T = {stats_horizon}, eps = {stats_epsilon}) but detector configured with (T = {config_horizon}, eps = {config_epsilon})")]
    ConfigMismatch {
        stats_horizon: f64,
        stats_epsilon: f64,
        config_horizon: f64,
        config_epsilon: f64,
    },

    #[error("infeasible model constraints: {0}")]
    Infeasible(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("model file: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
