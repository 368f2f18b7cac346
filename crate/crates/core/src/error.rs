use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("column `{0}` is numeric and must be quantized first")]
    UnquantizedColumn(String),
    #[error("column `{0}` is already categorical")]
    AlreadyCategorical(String),
    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),
    #[error("invalid variable subset: {0}")]
    InvalidSubset(String),
    #[error("conditioning context has zero probability")]
    ZeroProbabilityContext,
    #[error("instance has zero probability under the joint distribution")]
    ZeroProbabilityInstance,
    #[error("{0} players exceeds the exact-enumeration limit of {max}", max = crate::game::MAX_PLAYERS)]
    PlayerCountTooLarge(usize),
    #[error("characteristic function is not zero on the empty coalition (v(empty) = {0})")]
    NonZeroEmptyCoalition(f64),
    #[error("internal consistency: negative information quantity {0}")]
    NegativeInformation(f64),
    #[error("no admissible feature to split the root node")]
    NoAdmissibleFeature,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("instance is missing a value for feature {0}")]
    MissingFeatureValue(usize),
    #[error("class index {0} out of range")]
    ClassOutOfRange(usize),
    #[error("operation requires a categorical output")]
    NotClassification,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },
    #[error("column `{0}` has more than 64 categories")]
    ArityOverflow(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.position() {
            Some(pos) => Error::Parse {
                row: pos.line() as usize,
                column: 0,
                message: e.to_string(),
            },
            None => Error::Io(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
