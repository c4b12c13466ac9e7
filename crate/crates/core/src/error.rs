use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the analysis routines.
///
/// Variants carry enough context (row/column identifiers, counts) for a
/// caller to report exactly which part of the input was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Structurally invalid input: bad shape, out-of-range value, unknown id.
    InvalidInput(String),
    /// An argument outside its documented domain.
    InvalidArgument(String),
    DuplicateId { axis: &'static str, id: String },
    /// Operation requires a matrix without missing cells.
    MissingCells { count: usize },
    /// Every entry of a model column is missing, so it cannot be imputed.
    FullyMissingModel(String),
    /// Every task row has zero variance.
    AllDegenerate,
    /// The spectrum has no positive singular value; ED is undefined.
    ZeroSpectrum,
    NonFinite,
    NotSymmetric,
    InsufficientData { what: &'static str, needed: usize, got: usize },
    /// Labels contain a single class, so AUC is undefined.
    SingleClass,
    /// A series or covariate has zero variance where variation is required.
    ZeroVariance(String),
    /// Correlation matrix contains undefined entries.
    UndefinedCorrelation(String),
    /// A fitted model was rejected (non-positive parameters, divergence).
    FitRejected(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DuplicateId { axis, id } => write!(f, "duplicate {axis} id `{id}`"),
            Error::MissingCells { count } => {
                write!(f, "matrix has {count} missing cells; impute first")
            }
            Error::FullyMissingModel(id) => {
                write!(f, "model `{id}` has no observed scores; cannot impute")
            }
            Error::AllDegenerate => write!(f, "all task rows have zero variance"),
            Error::ZeroSpectrum => write!(f, "all singular values are zero; ED is undefined"),
            Error::NonFinite => write!(f, "matrix contains non-finite values"),
            Error::NotSymmetric => write!(f, "matrix is not symmetric"),
            Error::InsufficientData { what, needed, got } => {
                write!(f, "{what}: need at least {needed}, got {got}")
            }
            Error::SingleClass => write!(f, "labels contain a single class"),
            Error::ZeroVariance(what) => write!(f, "zero variance: {what}"),
            Error::UndefinedCorrelation(what) => write!(f, "undefined correlation: {what}"),
            Error::FitRejected(msg) => write!(f, "fit rejected: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
