//! Error type shared by every module.

use alloc::string::String;
use core::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Failures raised by grid construction, stepping, and the verification chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Requested spatial dimension has no implementation for this operation.
    UnsupportedDimension { dim: usize, operation: &'static str },
    /// A parameter is outside its admissible range.
    InvalidParameter { name: &'static str, detail: String },
    /// A field does not match the grid it is used with.
    GridMismatch { expected: usize, got: usize },
    /// A point lies outside the closed ball.
    OutsideDomain { radius: f64 },
    /// An iterative solve did not reach its tolerance.
    NonConvergence { what: &'static str, iterations: usize, residual: f64 },
    /// A species dropped below zero during a step.
    PositivityLost { t: f64, min: f64 },
    /// A time step produced non-finite values.
    NonFinite { t: f64 },
    /// An initial profile is not strictly positive.
    NonPositiveProfile { species: &'static str, min: f64 },
    /// Time lies outside `[0, T]`.
    TimeOutOfRange { t: f64, horizon: f64 },
    /// A sampled geometric ratio is unbounded; names the violated clause.
    UnboundedRatio { clause: &'static str },
    /// Derived constants are inconsistent (for example `C0` outside `(0,1)`).
    InconsistentConstants { detail: String },
    /// A hypothesis bound is violated by a run.
    HypothesisViolated { bound: &'static str, t: f64, value: f64, limit: f64 },
    /// Too few samples for a fit or a derivative.
    InsufficientSamples { needed: usize, got: usize },
    /// A fitted channel is not strictly positive on the window.
    NonPositiveSample { t: f64, value: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnsupportedDimension { dim, operation } => {
                write!(f, "unsupported dimension {dim} for {operation}")
            }
            Error::InvalidParameter { name, detail } => write!(f, "invalid parameter `{name}`: {detail}"),
            Error::GridMismatch { expected, got } => {
                write!(f, "field length {got} does not match grid with {expected} cells")
            }
            Error::OutsideDomain { radius } => write!(f, "point lies outside the closed ball of radius {radius}"),
            Error::NonConvergence { what, iterations, residual } => {
                write!(f, "{what} did not converge after {iterations} iterations (residual {residual:e})")
            }
            Error::PositivityLost { t, min } => {
                write!(f, "positivity lost at t={t} (min {min:e}), reduce dt")
            }
            Error::NonFinite { t } => write!(f, "non-finite state at t={t}"),
            Error::NonPositiveProfile { species, min } => {
                write!(f, "initial profile for {species} is not strictly positive (min {min})")
            }
            Error::TimeOutOfRange { t, horizon } => write!(f, "time {t} outside [0, {horizon}]"),
            Error::UnboundedRatio { clause } => write!(f, "sampled ratio unbounded: {clause}"),
            Error::InconsistentConstants { detail } => write!(f, "inconsistent constants: {detail}"),
            Error::HypothesisViolated { bound, t, value, limit } => {
                write!(f, "hypothesis `{bound}` violated at t={t}: {value:e} > {limit:e}")
            }
            Error::InsufficientSamples { needed, got } => {
                write!(f, "need at least {needed} samples, got {got}")
            }
            Error::NonPositiveSample { t, value } => {
                write!(f, "channel not strictly positive at t={t} (value {value:e})")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(name: &'static str, detail: impl Into<String>) -> Error {
    Error::InvalidParameter { name, detail: detail.into() }
}
