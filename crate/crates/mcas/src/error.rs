//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while configuring or running a simulation.
#[derive(Debug, Error)]
pub enum McasError {
    /// Bad grid, kinetics or stepper parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// A field contained NaN/Inf or violated a positivity bound.
    #[error("integrity error at t={time}: {message}")]
    Integrity { time: f64, message: String },

    /// Adaptive step size underflowed `dt_min`.
    #[error("stiff failure at t={time}: step size {dt} fell below dt_min")]
    StiffFailure { time: f64, dt: f64 },

    /// Equilibration did not reach the residual tolerance before the time cap.
    #[error("equilibration did not converge: residual {residual:.3e} at t={time}")]
    NonConvergence {
        time: f64,
        residual: f64,
        /// (time, residual) pairs sampled along the failed run.
        history: Vec<(f64, f64)>,
    },

    /// Center of mass of an (almost) zero field.
    #[error("center of mass undefined: total mass {0:.3e} is not positive")]
    UndefinedCm(f64),

    /// Not enough trace records inside the fit window.
    #[error("insufficient data: {found} in-window records, need at least {need}")]
    InsufficientData { found: usize, need: usize },

    /// Malformed trace/state file.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, McasError>;

impl McasError {
    pub fn config(msg: impl Into<String>) -> Self {
        McasError::Config(msg.into())
    }

    /// Exit-code classification for the CLI: 2 for usage/config trouble,
    /// 1 for domain failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            McasError::Config(_) | McasError::Parse { .. } => 2,
            _ => 1,
        }
    }
}
