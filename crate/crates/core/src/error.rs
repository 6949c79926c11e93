use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not agree for the requested operation.
    Shape(String),
    /// An operation produced or received NaN/Inf.
    NonFinite(&'static str),
    /// Index outside the valid range of a graph, vocabulary or tensor.
    OutOfRange { what: &'static str, index: usize, len: usize },
    /// Malformed graph definition.
    Graph(String),
    /// Malformed or unresolvable query record.
    Record(String),
    /// Inconsistent configuration.
    Config(String),
    /// Not enough data for the requested operation.
    Data(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::NonFinite(op) => write!(f, "non-finite value in {op}"),
            Error::OutOfRange { what, index, len } => {
                write!(f, "{what} index {index} out of range (len {len})")
            }
            Error::Graph(msg) => write!(f, "invalid concept graph: {msg}"),
            Error::Record(msg) => write!(f, "invalid record: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Data(msg) => write!(f, "insufficient data: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! shape_err {
    ($($arg:tt)*) => {
        $crate::Error::Shape(alloc::format!($($arg)*))
    };
}
pub(crate) use shape_err;
