use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported differential order {0} (only 3, 4 and 5 are implemented)")]
    UnsupportedOrder(usize),

    #[error("invalid coefficient set: {0}")]
    InvalidCoefficients(String),

    #[error("matrix violates the associated-matrix structure: {0}")]
    Structure(String),

    #[error("smoothness required: {0}")]
    NotSmooth(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration failed near x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    #[error("lambda = {lambda} is too close to a pole of column {column} (|Delta_kk| = {modulus:e})")]
    NearPole {
        lambda: Complex64,
        column: usize,
        modulus: f64,
    },

    #[error("suspected zero on the contour after {jitters} jitters")]
    BoundaryZero { jitters: usize },

    #[error("phase refinement did not converge: {0}")]
    Refinement(String),

    #[error("inconsistent root set: argument count {expected}, resolved multiplicities {found}")]
    InconsistentRoots { expected: usize, found: usize },

    #[error("search region holds {found} zeros, more than the cap {cap}")]
    TooManyZeros { found: usize, cap: usize },

    #[error("only {found} eigenvalues found, {wanted} requested")]
    NotEnoughEigenvalues { found: usize, wanted: usize },

    #[error("Laurent coefficient quadrature did not converge (last change {change:e})")]
    LaurentNotConverged { change: f64 },

    #[error("multiplicity mismatch: stated {stated}, measured {measured}")]
    MultiplicityMismatch { stated: usize, measured: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("unknown spectrum {name} for order {order}")]
    UnknownSpectrum { name: String, order: usize },

    #[error("eigenvalue tracking failed: {0}")]
    Tracking(String),
}

impl Error {
    /// True for errors caused by malformed requests rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::UnsupportedOrder(_)
                | Error::InvalidCoefficients(_)
                | Error::InvalidArgument(_)
                | Error::UnknownSpectrum { .. }
                | Error::NotSmooth(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
