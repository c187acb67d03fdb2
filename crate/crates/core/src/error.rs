use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degree {k} is not valid for dimension {d}")]
    InvalidDegree { k: usize, d: usize },

    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("frame is not column-orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("point lies off the manifold (defect {defect:.3e})")]
    OffManifold { defect: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate spectrum at sample {index:?}: eigengap {gap:.3e} below {threshold:.3e}")]
    DegenerateSpectrum {
        index: Option<usize>,
        gap: f64,
        threshold: f64,
    },

    #[error("sample {index} has no neighbours inside the cutoff radius")]
    IsolatedPoint { index: usize },

    #[error("samples {first} and {second} coincide")]
    DuplicatePoints { first: usize, second: usize },

    #[error("cutoff radius {delta:.3e} is below the minimum sample spacing {spacing:.3e}")]
    CutoffBelowSpacing { delta: f64, spacing: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("zero kernel density")]
    ZeroDensity,

    #[error("eigensolver did not converge after {iterations} iterations (max residual {max_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        max_residual: f64,
        residuals: Vec<f64>,
    },

    #[error("shift operator is not positive definite at the query point (min eigenvalue {min_eigenvalue:.3e}); bandwidth too large")]
    BandwidthTooLarge { min_eigenvalue: f64 },

    #[error("gauge fixing failed: {0}")]
    GaugeFailure(String),

    #[error("frames are not oriented: {0}")]
    Unoriented(String),

    #[error("neighbour graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("operator of size {required} exceeds the assembly cap {cap}")]
    MemoryCap { required: usize, cap: usize },

    #[error("malformed input at {location}: {message}")]
    Format { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
