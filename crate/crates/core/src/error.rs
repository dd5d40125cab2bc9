use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("calendar mismatch: {0}")]
    CalendarMismatch(String),
    #[error("timestamp {0} is not on the calendar grid")]
    OffGrid(String),
    #[error("timestamp {0} is outside the calendar range")]
    OutOfRange(String),
    #[error("invalid window size {0}")]
    BadWindow(usize),
    #[error("invalid smoothing factor {0}")]
    BadAlpha(f64),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("join needs at least one series")]
    EmptyJoin,
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown operator {0}")]
    UnknownOperator(String),
    #[error("{op} expects {expected} arguments, got {got}")]
    Arity {
        op: String,
        expected: String,
        got: usize,
    },
    #[error("unknown series {0}")]
    UnknownSeries(String),
    #[error("series {0} is already loaded")]
    DuplicateSeries(String),
    #[error("missing segments {0:?}")]
    Gap(Vec<u64>),
    #[error("segment spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("window lookback {lookback} exceeds halo {halo}")]
    HaloTooSmall { lookback: usize, halo: usize },
    #[error("ring has no nodes")]
    RingEmpty,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("cache and DHT disagree: {0}")]
    Incoherent(String),
}
