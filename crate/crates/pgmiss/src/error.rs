use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("pattern dimension mismatch: expected d={expected}, got d={got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("pattern {0} is not a node of the graph")]
    NodeNotFound(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("blocking condition violated: not every path from the source to {r} passes through {s}")]
    BlockingViolated { s: String, r: String },

    #[error("uninformative condition violated: pattern {q} lies on a path from {s} to {r} but {q} < {r} does not hold")]
    UninformativeViolated { s: String, r: String, q: String },

    #[error("edge {s} -> {r} already present")]
    EdgeExists { s: String, r: String },

    #[error("path enumeration exceeded the cap of {cap} paths")]
    PathCapExceeded { cap: usize },

    #[error("d={d} outside the supported range {lo}..={hi}")]
    DimensionOutOfRange { d: usize, lo: usize, hi: usize },

    #[error("node set incompatible with builtin graph kind {kind}: {msg}")]
    BadBuiltin { kind: String, msg: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("row {row}, column {col}: {msg}")]
    BadCell { row: usize, col: usize, msg: String },

    #[error("row {row} has {got} fields, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },

    #[error("read of unobserved cell (row {row}, column {col})")]
    MaskedCell { row: usize, col: usize },

    #[error("no odds coefficients fitted for pattern {0}")]
    PatternNotFitted(String),

    #[error("odds are undefined for the source pattern {0}")]
    SourceHasNoOdds(String),

    #[error("pattern {pattern}: one of the label classes is empty (n_r={n_r}, n_parents={n_pa})")]
    EmptyClass { pattern: String, n_r: usize, n_pa: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("pattern {pattern}: group too small to fit a density (n={n}, need >= {need})")]
    DegenerateGroup { pattern: String, n: usize, need: usize },

    #[error("no density fitted for pattern {0}")]
    DensityNotFitted(String),

    #[error("covariance for pattern {0} is not positive definite even after ridge conditioning")]
    SingularCovariance(String),

    #[error("pattern {r} has no parents with fitted densities")]
    NoDonors { r: String },

    #[error("tilted imputation requires a finite bound, got {0}")]
    TiltUnbounded(String),

    #[error("row {row}: tilt acceptance rate below {min_rate} after {proposals} proposals")]
    AcceptanceCollapse { row: usize, min_rate: f64, proposals: usize },

    #[error("unsupported functional: {0}")]
    UnsupportedFunctional(String),

    #[error("graph is not a tree: pattern {0} has {1} parents")]
    NotATree(String, usize),

    #[error("observed pattern {0} is absent from the graph")]
    PatternNotInGraph(String),

    #[error("no complete cases in the data")]
    NoCompleteCases,

    #[error("{failed} of {total} bootstrap replicates failed to fit (limit 20%)")]
    TooManyFailedReplicates { failed: usize, total: usize },

    #[error("positivity violated: {0}")]
    Positivity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
