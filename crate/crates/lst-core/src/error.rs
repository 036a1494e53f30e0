//! Error type shared by all kernels and layers.

use core::fmt;

/// Everything that can go wrong in the numeric core.
///
/// Operations that can fail return [`Result`]; operations documented as
/// infallible panic only on caller bugs (shape mismatches are errors, not
/// panics, because shapes often come from run-time configuration).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Matrix dimensions incompatible with the requested operation.
    DimMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    /// A sparse index falls outside the host dimension.
    IndexOutOfRange { index: usize, dim: usize },
    /// Duplicate index inside one sparse column (caller bug: a target is a
    /// single vector, its coordinates must be distinct).
    DuplicateIndex { index: usize },
    /// Gaussian elimination hit an effectively zero pivot.
    SingularMatrix,
    /// Jacobi SVD failed to reach the off-diagonal tolerance in the sweep cap.
    NoConvergence,
    /// Power iteration collapsed to the zero vector.
    ZeroMatrix,
    /// The requested SGD step would make U exactly singular (the tracked
    /// inverse cannot cross that point); the layer is left untouched.
    SingularUpdate,
    /// A singular-value fix was requested for a degenerate value
    /// (sigma ~ 0, or a correction that would zero the value out).
    DegenerateValue,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch { op, lhs, rhs } => write!(
                f,
                "{op}: dimension mismatch {}x{} vs {}x{}",
                lhs.0, lhs.1, rhs.0, rhs.1
            ),
            Error::IndexOutOfRange { index, dim } => {
                write!(f, "sparse index {index} out of range for dimension {dim}")
            }
            Error::DuplicateIndex { index } => {
                write!(f, "duplicate sparse index {index} within one column")
            }
            Error::SingularMatrix => write!(f, "matrix is singular to working precision"),
            Error::NoConvergence => write!(f, "SVD did not converge within the sweep cap"),
            Error::ZeroMatrix => write!(f, "power iteration collapsed to a zero vector"),
            Error::SingularUpdate => {
                write!(f, "update would make U singular; step rejected, state unchanged")
            }
            Error::DegenerateValue => write!(f, "singular value too degenerate to fix"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
