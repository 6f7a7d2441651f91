use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },
    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),
    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    InvalidVertex { vertex: usize, n: usize },
    #[error("numerically zero matrix")]
    NumericallyZero,
    #[error("singular matrix (zero pivot at column {0})")]
    Singular(usize),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("obstacle footprint not aligned with grid lines at refinement {refinement}")]
    MisalignedObstacle { refinement: usize },
    #[error("uncovered fine vertex {0}")]
    UncoveredVertex(usize),
    #[error("empty prolongator pattern row {0}")]
    EmptyPatternRow(usize),
    #[error("norm matrix not SPD on pattern space")]
    NotSpdOnPattern,
    #[error("singular Vanka block for pressure {0}")]
    SingularVankaBlock(usize),
    #[error("zero diagonal in row {0}")]
    ZeroDiagonal(usize),
    #[error("nonpositive lumped mass diagonal at level {level}, row {row}")]
    NonPositiveLumpedMass { level: usize, row: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("Picard iteration did not converge in {} steps", history.len())]
    PicardNotConverged { history: Vec<f64> },
}
