//! Error type shared across the engine.

use thiserror::Error;

/// Everything that can go wrong while loading data, evaluating models,
/// producing attributions, or scoring them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("input contains non-finite values")]
    NonFiniteInput,

    #[error("class index {class} out of range for {n_classes} classes")]
    ClassOutOfRange { class: usize, n_classes: usize },

    #[error("model is not differentiable")]
    NotDifferentiable,

    #[error("layer {layer} is not a conv2d layer")]
    LayerNotConvolutional { layer: usize },

    #[error("exact enumeration supports at most {max} features, got {n}")]
    TooManyFeatures { n: usize, max: usize },

    #[error("weighted least squares system is singular; retry with more coalitions")]
    SingularSystem,

    #[error("patch {patch:?} larger than image {image:?}")]
    PatchLargerThanImage {
        patch: (usize, usize),
        image: (usize, usize),
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("background set is empty")]
    EmptyBackground,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("csv parse error at line {line}, column {column}: {msg}")]
    CsvParse { line: usize, column: usize, msg: String },

    #[error("ragged row at line {line}: expected {expected} fields, got {got}")]
    RaggedRow { line: usize, expected: usize, got: usize },

    #[error("non-numeric cell at line {line}, column {column}: {value:?}")]
    NonNumericCell { line: usize, column: usize, value: String },

    #[error("bad magic bytes: not an npy file")]
    BadMagic,

    #[error("unsupported dtype descriptor {descr:?} (only '<f4' and '<f8')")]
    UnsupportedDtype { descr: String },

    #[error("fortran-order arrays are not supported")]
    FortranOrderUnsupported,

    #[error("schema violation at {path}: {msg}")]
    SchemaViolation { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn schema(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::SchemaViolation {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
