//! Scalar values with two distinct nulls.

use core::fmt;

/// One entry of a series.
///
/// `Real` payloads are always finite: constructors and arithmetic map NaN and
/// infinities to `Unknown`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TsValue {
    Real(f64),
    /// `!`: there is no value at this time.
    Empty,
    /// `?`: a value exists but is not known.
    Unknown,
}

impl TsValue {
    pub fn real(v: f64) -> Self {
        if v.is_finite() {
            TsValue::Real(v)
        } else {
            TsValue::Unknown
        }
    }

    pub fn as_real(self) -> Option<f64> {
        match self {
            TsValue::Real(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, TsValue::Real(_))
    }

    pub fn is_null(self) -> bool {
        !self.is_real()
    }

    /// Null precedence: `Unknown` over `Empty` over any real.
    fn null_rank(self) -> u8 {
        match self {
            TsValue::Real(_) => 0,
            TsValue::Empty => 1,
            TsValue::Unknown => 2,
        }
    }

    /// Combines two values with `op` when both are real, otherwise returns
    /// the dominant null.
    pub fn zip_with(self, other: TsValue, op: impl FnOnce(f64, f64) -> f64) -> TsValue {
        match (self, other) {
            (TsValue::Real(a), TsValue::Real(b)) => TsValue::real(op(a, b)),
            (a, b) => {
                if a.null_rank() >= b.null_rank() {
                    a
                } else {
                    b
                }
            }
        }
    }

    pub fn map_real(self, op: impl FnOnce(f64) -> f64) -> TsValue {
        match self {
            TsValue::Real(v) => TsValue::real(op(v)),
            null => null,
        }
    }
}

impl From<f64> for TsValue {
    fn from(v: f64) -> Self {
        TsValue::real(v)
    }
}

impl fmt::Display for TsValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TsValue::Real(v) => write!(f, "{v}"),
            TsValue::Empty => f.write_str("!"),
            TsValue::Unknown => f.write_str("?"),
        }
    }
}

/// Addition on values: `!+! = !`, `!+? = ?`, `?+? = ?`; a real added to a
/// null yields that null.
pub fn value_add(a: TsValue, b: TsValue) -> TsValue {
    a.zip_with(b, |x, y| x + y)
}

/// Scalar multiplication: `s*! = !`, `s*? = ?`.
pub fn value_scale(s: f64, a: TsValue) -> TsValue {
    a.map_real(|v| s * v)
}
