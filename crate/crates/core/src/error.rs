//! Error type shared by grid construction, noise handling and the steppers.

use alloc::string::String;
use core::fmt;

/// Errors raised by the library.
///
/// Every variant except [`Error::Internal`] describes invalid input
/// (a configuration error). `Internal` flags a broken invariant inside the
/// library itself and is never caused by user input.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid rejected: requires `t1 > t0`, `n >= 1` and `n * (t1 - t0)` integer.
    InvalidGrid { t0: f64, t1: f64, n: u32 },
    /// Coarsening factor must be positive and divide the steps-per-unit-time.
    BadCoarsenFactor { factor: u32, n: u32 },
    /// Scheme resolution must divide the noise resolution.
    GridMismatch { noise_n: u32, scheme_n: u32 },
    /// Noise path and problem cover different time windows.
    WindowMismatch,
    /// Brownian dimension of the noise differs from the problem's.
    DimensionMismatch { noise_m: usize, problem_m: usize },
    /// Taming exponent must lie in (0, 1/2].
    InvalidTheta(f64),
    /// Name not present in the built-in problem registry.
    UnknownProblem { name: String },
    /// A delay lag reaches below the recorded history window `[-H, 0]`.
    DelayBeforeHistory { lag: usize, time: f64, delayed: f64, depth: f64 },
    /// A delay lag violates `delta_j(t) <= floor(t/h) * h`.
    DelayAheadOfSegment { lag: usize, time: f64, delayed: f64 },
    /// Segment length `h` or history depth `H` does not land on the grid.
    NonIntegerSegment { label: &'static str, value: f64, n: u32 },
    /// Invalid experiment or fit input; the message carries the detail.
    InvalidInput(String),
    /// Internal invariant violation.
    Internal(&'static str),
}

impl Error {
    /// True for [`Error::Internal`]; everything else is a configuration error.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid { t0, t1, n } => write!(
                f,
                "invalid grid: need t1 > t0, n >= 1 and n*(t1-t0) integer (t0={t0}, t1={t1}, n={n})"
            ),
            Error::BadCoarsenFactor { factor, n } => write!(
                f,
                "coarsening factor {factor} does not divide steps-per-unit-time {n}"
            ),
            Error::GridMismatch { noise_n, scheme_n } => write!(
                f,
                "scheme resolution {scheme_n} does not divide noise resolution {noise_n}"
            ),
            Error::WindowMismatch => write!(f, "noise path and problem cover different windows"),
            Error::DimensionMismatch { noise_m, problem_m } => write!(
                f,
                "noise has Brownian dimension {noise_m}, problem expects {problem_m}"
            ),
            Error::InvalidTheta(theta) => {
                write!(f, "taming exponent must lie in (0, 1/2], got {theta}")
            }
            Error::UnknownProblem { name } => {
                write!(f, "unknown problem '{name}'; available: ")?;
                for (i, known) in crate::model::builtin_names().iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{known}")?;
                }
                Ok(())
            }
            Error::DelayBeforeHistory {
                lag,
                time,
                delayed,
                depth,
            } => write!(
                f,
                "delay lag {lag} reads {delayed} at t={time}, below the history depth -{depth}"
            ),
            Error::DelayAheadOfSegment { lag, time, delayed } => write!(
                f,
                "delay lag {lag} reads {delayed} at t={time}, ahead of the last closed segment"
            ),
            Error::NonIntegerSegment { label, value, n } => write!(
                f,
                "{label} = {value} must be an integer number of steps at n = {n}"
            ),
            Error::InvalidInput(msg) => write!(f, "{msg}"),
            Error::Internal(msg) => write!(f, "internal invariant violation: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
