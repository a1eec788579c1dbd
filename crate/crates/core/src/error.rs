use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("backward root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("variable {0} does not belong to this tape")]
    ForeignVar(usize),
    #[error("support size mismatch: expected {expected}, got {got}")]
    SupportMismatch { expected: usize, got: usize },
    #[error("empty clause")]
    EmptyClause,
    #[error("index {index} out of range for {len} vertices")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid constrained set: {0}")]
    InvalidSet(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sudoku parse error: {0}")]
    SudokuParse(String),
    #[error("DIMACS parse error on line {line}: {msg}")]
    Dimacs { line: usize, msg: String },
    #[error("empty batch")]
    EmptyBatch,
}
