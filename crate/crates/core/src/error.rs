use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown field family `{0}`")]
    UnknownFamily(String),

    #[error("dimension must be at least 2, got {0}")]
    Dimension(usize),

    #[error("magnetic matrix is not antisymmetric: |B + Bᵀ| = {0:e}")]
    NotAntisymmetric(f64),

    #[error("vector potential does not reproduce B at {point:?}: deviation {deviation:e} > {tolerance:e}")]
    CurlMismatch {
        point: Vec<f64>,
        deviation: f64,
        tolerance: f64,
    },

    #[error("ambiguous rank at {point:?}: {count} eigenvalues of BᵀB in the tolerance band")]
    AmbiguousRank { point: Vec<f64>, count: usize },

    #[error("no magnetic levels: B has rank 0 at this point")]
    NoMagneticLevels,

    #[error("field has zero modes at {0:?}, operation needs full rank")]
    NotFullRank(Vec<f64>),

    #[error("vector potential is not available for this field")]
    MissingVectorPotential,

    #[error("test function has no compact support")]
    NoCompactSupport,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid has {nodes} nodes, cap is {cap}")]
    NodeCap { nodes: usize, cap: usize },

    #[error("non-finite value from field evaluation at {0:?}")]
    NonFinite(Vec<f64>),

    #[error("factorization breakdown: pivot {pivot:e} at step {step}")]
    Breakdown { step: usize, pivot: f64 },

    #[error("eigensolver did not converge: found {found} of {expected} eigenvalues after {restarts} restarts")]
    NoConvergence {
        found: usize,
        expected: usize,
        restarts: usize,
    },

    #[error("incomplete eigensolve: {0}")]
    Incomplete(String),

    #[error("test function support [{lo}, {hi}] exceeds solver window [{wlo}, {whi}]")]
    SupportOutsideWindow { lo: f64, hi: f64, wlo: f64, whi: f64 },

    #[error("interval endpoint {0} lies inside the Σ approximation")]
    EndpointInSigma(f64),

    #[error("localization set is not compact for [{0}, {1}]")]
    NotCompact(f64, f64),

    #[error("empty mask")]
    EmptyMask,

    #[error("cannot fit: {0}")]
    Fit(String),

    #[error("configuration errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
