use num_bigint::BigUint;
use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("digit ({x},{y}) is not in the level-{tag} digit set")]
    InvalidDigit { tag: u8, x: u8, y: u8 },

    #[error("symbol {symbol} at position {position} exceeds the level alphabet (size {base})")]
    InvalidSymbol {
        position: usize,
        symbol: u8,
        base: u8,
    },

    #[error("intercept {value} lies outside [{lo}, 1]")]
    OutOfRange { value: String, lo: String },

    #[error("matrix label {label} is invalid for level tag {tag}")]
    InvalidLabel { tag: u8, label: u8 },

    #[error("matrix order mismatch: expected {expected}, found {found}")]
    OrderMismatch { expected: usize, found: usize },

    #[error("start row {row} outside 1..={order}")]
    RowOutOfRange { row: usize, order: usize },

    #[error("slope {m}/{n} not in lowest terms")]
    SlopeNotReduced { m: u64, n: u64 },

    #[error("slope denominator must be positive")]
    ZeroDenominator,

    #[error("budget exceeded: {needed} > {budget} {what}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("window {window} larger than the {available} computed depths")]
    WindowTooLarge { window: usize, available: usize },

    #[error("render would emit {needed} cells, cap is {cap}")]
    ElementCapExceeded { needed: u128, cap: u128 },

    #[error("verification failure at depth {depth}: matrix {matrix} != oracle {oracle}")]
    VerificationFailure {
        depth: usize,
        matrix: BigUint,
        oracle: BigUint,
    },

    #[error("cannot parse {what} from {input:?}: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(what: &'static str, input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            what,
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}
