use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown symbol category at line {line}, column {column}: {message}")]
    SymbolCategory {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
    #[error("offset {offset} exceeds the bound {bound}")]
    OffsetOverflow { offset: i32, bound: i32 },
    #[error("division by an identically zero expression")]
    DivisionByZero,
    #[error("sampling domain exhausted: {accepted} of {wanted} points accepted after {rejected} rejections")]
    SamplingExhausted {
        accepted: usize,
        wanted: usize,
        rejected: usize,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("unsupported scheme: {0}")]
    UnsupportedScheme(String),
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("scheme file line {line}: {message}")]
    SchemeFile { line: usize, message: String },
    #[error(
        "stencil overflow: expression reaches offset {offset}, field covers [{lower}, {upper}]"
    )]
    StencilOverflow { offset: i32, lower: i32, upper: i32 },
    #[error("ansatz degree {degree} exceeds the limit {limit}")]
    DegreeLimit { degree: usize, limit: usize },
    #[error("too many unknowns: {0} (limit 12)")]
    TooManyUnknowns(usize),
    #[error("unsupported antiderivative: {0}")]
    UnsupportedAntiderivative(String),
    #[error("invariant self-check failed: {0}")]
    InvariantCheck(String),
    #[error("not reducible by this invariant: {0}")]
    NotReducible(String),
    #[error("vanishing exponential weight at step {0}")]
    VanishingWeight(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
