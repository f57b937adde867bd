use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("symbolic rank unsupported: entry ({0}, {1}) carries parameters")]
    SymbolicRank(usize, usize),
    #[error("not a complex: d_out * d_in is nonzero on basis element {0}")]
    NotAComplex(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unbounded request: {0}")]
    Unbounded(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("degenerate Poincare pairing")]
    DegeneratePairing,
    #[error("product is not associative on ({0}, {1}, {2})")]
    NotAssociative(String, String, String),
    #[error("product is not graded commutative on ({0}, {1})")]
    NotCommutative(String, String),
    #[error("unknown decoration symbol '{0}'")]
    UnknownDecoration(String),
    #[error("missing representative for generator '{0}'")]
    MissingRepresentative(String),
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("d^2 != 0: {0}")]
    DSquared(String),
}
