use thiserror::Error;

/// Errors raised across the simulation toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian: deviation {deviation:e} exceeds tolerance {tolerance:e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("eigensolver failed to converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    ConvergenceFailure { sweeps: usize, off_norm: f64 },

    #[error("composite dimension {dim} exceeds the configured maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("state norm {norm:e} is too small to normalize")]
    ZeroNorm { norm: f64 },

    #[error("probabilities sum to {sum} instead of 1")]
    ProbabilityNotNormalized { sum: f64 },

    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("density matrix has eigenvalue {value:e} below the allowed tolerance")]
    NegativeEigenvalueBeyondTolerance { value: f64 },

    #[error("density matrix is invalid: {0}")]
    InvalidDensityMatrix(String),

    #[error("bad factor selector: {0}")]
    BadSelector(String),

    #[error("state is not bipartite under the requested split: {0}")]
    NotBipartite(String),

    #[error("index {0} has vanishing marginal amplitude and no relative state")]
    UnsupportedIndex(usize),

    #[error("interaction Hamiltonian is not diagonal in the product basis (max off-diagonal {max_offdiag:e})")]
    NotDiagonalInteraction { max_offdiag: f64 },

    #[error("marginal amplitude of index {index} vanishes at t = {time}")]
    VanishingAmplitude { index: usize, time: f64 },

    #[error("relative states not decohered at t = {time}: max off-diagonal |g| = {max_offdiag:e} > {tolerance:e}")]
    NotDecohered {
        time: f64,
        max_offdiag: f64,
        tolerance: f64,
    },

    #[error("bad index assignment: {0}")]
    BadAssignment(String),

    #[error("fact set has zero joint probability")]
    ZeroProbabilityFact,

    #[error("position {x} lies outside the grid [{x_min}, {x_max}]")]
    OutOfGrid { x: f64, x_min: f64, x_max: f64 },

    #[error("localization probability {0:e} vanishes")]
    ZeroOverlap(f64),

    #[error("scattering kernel must satisfy F(0) = 0 and F >= 0: {0}")]
    BadScatteringKernel(String),

    #[error("weight at index {0} is zero")]
    ZeroWeight(usize),

    #[error("distribution is not normalized (sum = {sum})")]
    NotNormalized { sum: f64 },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
