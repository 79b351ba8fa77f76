use thiserror::Error;

use crate::geometry::ManifoldKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinopError {
    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix shape {rows}x{cols} is empty")]
    EmptyShape { rows: usize, cols: usize },
    #[error("entry ({row}, {col}) outside a {rows}x{cols} matrix")]
    IndexOutOfBounds { row: usize, col: usize, rows: usize, cols: usize },
    #[error("entry ({row}, {col}) has invalid value {value}; entries must be finite and nonnegative")]
    InvalidValue { row: usize, col: usize, value: f64 },
    #[error("duplicate entry ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("row {0} has no nonzero entries")]
    ZeroRow(usize),
    #[error("column {0} has no nonzero entries")]
    ZeroColumn(usize),
    #[error("missing \"m n nnz\" header")]
    MissingHeader,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("header declares {declared} entries but {found} were read")]
    NnzMismatch { declared: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("length mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("coordinate {index} = {value} lies outside the {kind:?} domain")]
    OutsideDomain { kind: ManifoldKind, index: usize, value: f64 },
    #[error("simplex coordinates sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("simplex tangent coordinates sum to {sum}, not 0")]
    NotTangent { sum: f64 },
    #[error("tangent of kind {tangent:?} used at a point of kind {point:?}")]
    KindMismatch { point: ManifoldKind, tangent: ManifoldKind },
    #[error("exponent {exponent} at coordinate {index} exceeds the overflow guard")]
    Overflow { index: usize, exponent: f64 },
    #[error("non-finite value at coordinate {index}")]
    NonFinite { index: usize },
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("length mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("reference component {index} = {value} must be strictly positive")]
    NonPositiveReference { index: usize, value: f64 },
    #[error("component {index} = {value} is negative")]
    NegativeArgument { index: usize, value: f64 },
    #[error("non-finite gradient component {0}")]
    NonFiniteGradient(usize),
    #[error("problem is posed on {problem:?} but the point lives on {point:?}")]
    KindMismatch { problem: ManifoldKind, point: ManifoldKind },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("{algorithm} is not defined on {kind:?}")]
    UnsupportedManifold { algorithm: &'static str, kind: ManifoldKind },
    #[error("line search failed after {0} reductions")]
    LineSearch(usize),
    #[error("Newton iteration for theta did not converge")]
    Newton,
    #[error("no root of the theta equation in (0, 1]")]
    NoRoot,
    #[error("adaptive inner loop exceeded {0} trials")]
    InnerLoop(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("invalid parameters: {0}")]
    Parameters(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("trace of {0} carries no certificate values")]
    NoCertificates(String),
    #[error("{path}: {message}")]
    Image { path: String, message: String },
}
