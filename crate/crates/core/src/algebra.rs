//! Relational operators and the generic sliding window.
//!
//! Every operator keeps the calendar of its input. The named function
//! catalogs ([`Predicate`], [`MapFn`], [`JoinFn`], [`WindowFn`]) carry a
//! canonical textual form so that expressions using them can be named and
//! cached; the `*_by` variants accept arbitrary closures instead.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::value::value_add;
use crate::{Error, Result, TimeSeries, TsValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Gt,
    Lt,
    Ge,
    Le,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
        }
    }
}

/// Nameable selection predicate. Comparisons are false on both nulls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predicate {
    Always,
    Compare(CmpOp, f64),
}

impl Predicate {
    pub fn gt(c: f64) -> Self {
        Predicate::Compare(CmpOp::Gt, c)
    }

    pub fn test(&self, v: TsValue) -> bool {
        match (*self, v) {
            (Predicate::Always, _) => true,
            (Predicate::Compare(op, c), TsValue::Real(x)) => match op {
                CmpOp::Gt => x > c,
                CmpOp::Lt => x < c,
                CmpOp::Ge => x >= c,
                CmpOp::Le => x <= c,
                CmpOp::Eq => x == c,
            },
            (Predicate::Compare(..), _) => false,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Always => f.write_str("TRUE"),
            Predicate::Compare(op, c) => write!(f, "{}{}", op.symbol(), c),
        }
    }
}

impl FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "TRUE" {
            return Ok(Predicate::Always);
        }
        let (op, rest) = if let Some(r) = s.strip_prefix(">=") {
            (CmpOp::Ge, r)
        } else if let Some(r) = s.strip_prefix("<=") {
            (CmpOp::Le, r)
        } else if let Some(r) = s.strip_prefix('>') {
            (CmpOp::Gt, r)
        } else if let Some(r) = s.strip_prefix('<') {
            (CmpOp::Lt, r)
        } else if let Some(r) = s.strip_prefix('=') {
            (CmpOp::Eq, r)
        } else {
            return Err(Error::BadParams(format!("bad predicate {s:?}")));
        };
        let c: f64 = rest
            .trim()
            .parse()
            .map_err(|_| Error::BadParams(format!("bad predicate constant {rest:?}")))?;
        if !c.is_finite() {
            return Err(Error::BadParams(format!("bad predicate constant {rest:?}")));
        }
        Ok(Predicate::Compare(op, c))
    }
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::UnknownOperator(s.to_string())),
                }
            }
        }
    };
}

named_enum! {
    /// Unary map functions usable in projections.
    MapFn {
        Identity => "ID",
        Abs => "ABS",
        Neg => "NEG",
    }
}

named_enum! {
    /// k-ary map functions usable in joins.
    JoinFn {
        Sum => "SUM",
        Sub => "SUB",
        Mul => "MUL",
        Min => "MIN",
        Max => "MAX",
    }
}

named_enum! {
    /// Aggregates over a window of values, oldest first.
    WindowFn {
        Avg => "AVG",
        Sum => "SUM",
        Min => "MIN",
        Max => "MAX",
        First => "FIRST",
        Last => "LAST",
    }
}

impl MapFn {
    pub fn apply(self, v: TsValue) -> TsValue {
        match self {
            MapFn::Identity => v,
            MapFn::Abs => v.map_real(f64::abs),
            MapFn::Neg => v.map_real(|x| -x),
        }
    }
}

impl JoinFn {
    pub fn is_commutative(self) -> bool {
        !matches!(self, JoinFn::Sub)
    }

    /// Folds left to right; nulls follow the addition rules.
    pub fn apply(self, vals: &[TsValue]) -> TsValue {
        let Some((&first, rest)) = vals.split_first() else {
            return TsValue::Empty;
        };
        rest.iter().fold(first, |acc, &v| match self {
            JoinFn::Sum => value_add(acc, v),
            JoinFn::Sub => acc.zip_with(v, |a, b| a - b),
            JoinFn::Mul => acc.zip_with(v, |a, b| a * b),
            JoinFn::Min => acc.zip_with(v, f64::min),
            JoinFn::Max => acc.zip_with(v, f64::max),
        })
    }
}

impl WindowFn {
    /// Aggregates are `Unknown` if any item is, else `Empty` if any item is.
    pub fn apply(self, items: &[TsValue]) -> TsValue {
        match self {
            WindowFn::First => items.first().copied().unwrap_or(TsValue::Unknown),
            WindowFn::Last => items.last().copied().unwrap_or(TsValue::Unknown),
            WindowFn::Avg => {
                let n = items.len() as f64;
                JoinFn::Sum.apply(items).map_real(|s| s / n)
            }
            WindowFn::Sum => JoinFn::Sum.apply(items),
            WindowFn::Min => JoinFn::Min.apply(items),
            WindowFn::Max => JoinFn::Max.apply(items),
        }
    }
}

/// `SEL_pred`: keeps values satisfying `pred`, everything else becomes `Empty`.
pub fn select(s: &TimeSeries, pred: &Predicate) -> TimeSeries {
    select_by(s, |v| pred.test(v))
}

pub fn select_by(s: &TimeSeries, pred: impl Fn(TsValue) -> bool) -> TimeSeries {
    s.map(|v| if pred(v) { v } else { TsValue::Empty })
}

/// `PROJ_fun`: pointwise map.
pub fn project(s: &TimeSeries, fun: &MapFn) -> TimeSeries {
    s.map(|v| fun.apply(v))
}

pub fn project_by(s: &TimeSeries, fun: impl Fn(TsValue) -> TsValue) -> TimeSeries {
    s.map(fun)
}

pub(crate) fn union_value(a: TsValue, b: TsValue) -> TsValue {
    match (a, b) {
        _ if a == b => a,
        (TsValue::Empty, other) | (other, TsValue::Empty) => other,
        _ => TsValue::Unknown,
    }
}

pub(crate) fn intersect_value(a: TsValue, b: TsValue) -> TsValue {
    if a == b {
        a
    } else {
        TsValue::Empty
    }
}

/// Outer union. Where both sides hold distinct non-empty values the result is
/// `Unknown`.
pub fn union(a: &TimeSeries, b: &TimeSeries) -> Result<TimeSeries> {
    zip_series(a, b, union_value)
}

pub fn intersect(a: &TimeSeries, b: &TimeSeries) -> Result<TimeSeries> {
    zip_series(a, b, intersect_value)
}

fn zip_series(
    a: &TimeSeries,
    b: &TimeSeries,
    f: impl Fn(TsValue, TsValue) -> TsValue,
) -> Result<TimeSeries> {
    a.ensure_same_calendar(b)?;
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| f(x, y))
        .collect();
    a.with_values(values)
}

/// k-ary join on time: position `t` holds `fun(S1[t], ..., Sk[t])`.
pub fn join(series: &[&TimeSeries], fun: &JoinFn) -> Result<TimeSeries> {
    join_by(series, |vals| fun.apply(vals))
}

pub fn join_by(series: &[&TimeSeries], fun: impl Fn(&[TsValue]) -> TsValue) -> Result<TimeSeries> {
    let (first, rest) = series.split_first().ok_or(Error::EmptyJoin)?;
    for s in rest {
        first.ensure_same_calendar(s)?;
    }
    let mut row = vec![TsValue::Empty; series.len()];
    let values = (0..first.len())
        .map(|t| {
            for (slot, s) in row.iter_mut().zip(series) {
                *slot = s.values()[t];
            }
            fun(&row)
        })
        .collect();
    first.with_values(values)
}

/// `WIN_fun(S, w)`: position `t` holds `fun` of the `w` items ending at and
/// including `t`. Indices before the series start read `S[0]`.
pub fn window(s: &TimeSeries, w: usize, fun: &WindowFn) -> Result<TimeSeries> {
    window_by(s, w, |items| fun.apply(items))
}

pub fn window_by(
    s: &TimeSeries,
    w: usize,
    fun: impl Fn(&[TsValue]) -> TsValue,
) -> Result<TimeSeries> {
    if w < 1 {
        return Err(Error::BadWindow(w));
    }
    s.with_values(window_values(s.values(), w, Some(0), fun))
}

/// Windowed evaluation over a local buffer.
///
/// With `origin = Some(o)`, `values[o]` is the true series start: positions
/// before it yield `Unknown` and reads before it return `values[o]`. With
/// `None`, any position whose window reaches before the buffer yields
/// `Unknown`.
pub fn window_values(
    values: &[TsValue],
    w: usize,
    origin: Option<usize>,
    fun: impl Fn(&[TsValue]) -> TsValue,
) -> Vec<TsValue> {
    let mut scratch = Vec::with_capacity(w);
    (0..values.len())
        .map(|p| {
            let Some(first) = window_start(p, w, origin) else {
                return TsValue::Unknown;
            };
            scratch.clear();
            scratch.extend((0..w).map(|k| values[clamp_read(first + k as isize, origin)]));
            fun(&scratch)
        })
        .collect()
}

/// Signed index of the oldest item in the window ending at `p`, or `None` if
/// that window is not computable in the buffer.
pub(crate) fn window_start(p: usize, w: usize, origin: Option<usize>) -> Option<isize> {
    let first = p as isize + 1 - w as isize;
    match origin {
        Some(o) if p < o => None,
        Some(_) => Some(first),
        None if first < 0 => None,
        None => Some(first),
    }
}

pub(crate) fn clamp_read(j: isize, origin: Option<usize>) -> usize {
    match origin {
        Some(o) if j < o as isize => o,
        _ => j as usize,
    }
}
