use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no edges")]
    NoEdges,

    #[error("non-triangle face at line {line}")]
    NonTriangleFace { line: usize },

    #[error("vertex index {index} out of range (mesh has {count} vertices)")]
    VertexOutOfRange { index: usize, count: usize },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("oracle only: {n} nodes exceeds the dense oracle cap of {cap}")]
    OracleOnly { n: usize, cap: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("embedding has no spectrum (not exact eigenmaps)")]
    MissingSpectrum,

    #[error("gauge transform does not match the embedding's multiplicity groups")]
    GaugeMismatch,

    #[error("loss must be a 1x1 scalar, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Diverged { epoch: usize },

    #[error("at least one branch must be enabled")]
    NoBranches,
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! shape_err {
    ($($arg:tt)*) => {
        $crate::Error::Shape(alloc::format!($($arg)*))
    };
}
pub(crate) use shape_err;
