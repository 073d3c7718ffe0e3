use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Dimensions of two operands disagree.
    Shape(String),
    /// An index is outside its valid range.
    Index { index: usize, len: usize },
    /// A NaN or infinity showed up where finite values are required.
    Numeric(String),
    /// An argument lies outside the mathematical domain of the operation.
    Domain(String),
    /// Invalid configuration.
    Config(String),
    /// Structural validation failed (corpus, lexicon, annotations).
    Validation(String),
    /// Constrained decoding has no feasible positive-score path.
    Decode(String),
    /// The lexical unit has no entry in the lexicon.
    UnknownLu(String),
    /// API misuse (empty grids, mismatched pairs).
    Usage(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::Index { index, len } => write!(f, "index {index} out of range for length {len}"),
            Error::Numeric(m) => write!(f, "numeric error: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Validation(m) => write!(f, "validation error: {m}"),
            Error::Decode(m) => write!(f, "decode error: {m}"),
            Error::UnknownLu(lu) => write!(f, "unknown lexical unit `{lu}`"),
            Error::Usage(m) => write!(f, "usage error: {m}"),
        }
    }
}

impl core::error::Error for Error {}
