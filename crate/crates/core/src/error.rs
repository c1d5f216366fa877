use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },
    #[error("invalid boundary configuration: {0}")]
    InvalidBoundary(String),
    #[error("unknown finite element family `{0}`")]
    UnknownFamily(String),
    #[error("incompatible spaces: {0}")]
    IncompatibleSpaces(String),
    #[error("unsupported space: {0}")]
    UnsupportedSpace(String),
    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weight is not positive definite on cell {cell}")]
    NonSpdWeight { cell: usize },
    #[error("invalid parameter `{name}`: {msg}")]
    InvalidParameter { name: &'static str, msg: String },
    #[error("missing boundary data provider: {0}")]
    MissingProvider(&'static str),
    #[error("system cannot be condensed: {0}")]
    NotCondensable(String),
    #[error("matrix is singular (largest solution component at index {hint})")]
    Singular { hint: usize },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("operator is not symmetric (relative drift {drift:e})")]
    Asymmetric { drift: f64 },
    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),
    #[error("time step {step} failed: {source}")]
    TimeStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("convergence study needs at least 3 levels, got {0}")]
    TooFewLevels(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
