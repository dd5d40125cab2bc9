//! Functional expressions naming base and derived series.
//!
//! An expression is the computation tree of a series, e.g.
//! `JOIN(MAVG(CAC40,10),SCALE(MOM(CAC40,5),100),SUM)`. Its canonical
//! serialization is the series' global name and, prefixed with
//! [`KEY_VERSION`], its DHT key.

mod canon;
mod eval;
mod parse;

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use canon::canonicalize;
pub use eval::{eval_buffers, evaluate, SeriesStore};
pub use parse::parse;

use crate::algebra::{JoinFn, MapFn, Predicate, WindowFn};
use crate::indicators::MacdParams;

/// Version prefix of DHT keys derived from series names.
pub const KEY_VERSION: &str = "v1:";

/// Registered operators with their argument shapes.
pub const CATALOG: &[(&str, &str)] = &[
    ("MAVG", "(series, window)"),
    ("EMA", "(series, alpha, window)"),
    ("MOM", "(series, window)"),
    ("SCALE", "(series, factor)"),
    ("MSUB", "(series, series)"),
    ("MACD", "(series, fast, slow, signal)"),
    ("SEL", "(series, predicate)"),
    ("PROJ", "(series, ABS|NEG|ID)"),
    ("WIN", "(series, window, AVG|SUM|MIN|MAX|FIRST|LAST)"),
    ("JOIN", "(series, ..., SUM|SUB|MUL|MIN|MAX)"),
    ("UNION", "(series, series)"),
    ("INTERSECT", "(series, series)"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Base(String),
    Mavg(Box<Expr>, usize),
    Ema(Box<Expr>, f64, usize),
    Mom(Box<Expr>, usize),
    Scale(Box<Expr>, f64),
    Msub(Box<Expr>, Box<Expr>),
    Macd(Box<Expr>, MacdParams),
    Sel(Box<Expr>, Predicate),
    Proj(Box<Expr>, MapFn),
    Win(Box<Expr>, usize, WindowFn),
    Join(Vec<Expr>, JoinFn),
    Union(Box<Expr>, Box<Expr>),
    Intersect(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn base(name: impl Into<String>) -> Expr {
        Expr::Base(name.into())
    }

    pub fn mavg(self, w: usize) -> Expr {
        Expr::Mavg(Box::new(self), w)
    }

    pub fn mom(self, w: usize) -> Expr {
        Expr::Mom(Box::new(self), w)
    }

    pub fn scale(self, k: f64) -> Expr {
        Expr::Scale(Box::new(self), k)
    }

    pub fn msub(self, other: Expr) -> Expr {
        Expr::Msub(Box::new(self), Box::new(other))
    }

    /// Series-valued arguments, in order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Base(_) => Vec::new(),
            Expr::Mavg(a, _)
            | Expr::Ema(a, _, _)
            | Expr::Mom(a, _)
            | Expr::Scale(a, _)
            | Expr::Macd(a, _)
            | Expr::Sel(a, _)
            | Expr::Proj(a, _)
            | Expr::Win(a, _, _) => alloc::vec![a.as_ref()],
            Expr::Msub(a, b) | Expr::Union(a, b) | Expr::Intersect(a, b) => {
                alloc::vec![a.as_ref(), b.as_ref()]
            }
            Expr::Join(args, _) => args.iter().collect(),
        }
    }

    /// How many positions before `t` this node reads from its inputs.
    pub fn lookback(&self) -> usize {
        match self {
            Expr::Mavg(_, w) | Expr::Ema(_, _, w) | Expr::Win(_, w, _) => w.saturating_sub(1),
            Expr::Mom(_, w) => *w,
            Expr::Macd(_, p) => p.slow.max(p.fast) - 1 + p.signal - 1,
            _ => 0,
        }
    }

    /// Names of all base series referenced by the tree.
    pub fn base_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_bases(&mut out);
        out
    }

    fn collect_bases(&self, out: &mut BTreeSet<String>) {
        if let Expr::Base(name) = self {
            out.insert(name.clone());
        }
        for c in self.children() {
            c.collect_bases(out);
        }
    }

    pub fn is_base(&self) -> bool {
        matches!(self, Expr::Base(_))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Base(name) => f.write_str(name),
            Expr::Mavg(a, w) => write!(f, "MAVG({a},{w})"),
            Expr::Ema(a, alpha, w) => write!(f, "EMA({a},{alpha},{w})"),
            Expr::Mom(a, w) => write!(f, "MOM({a},{w})"),
            Expr::Scale(a, k) => write!(f, "SCALE({a},{k})"),
            Expr::Msub(a, b) => write!(f, "MSUB({a},{b})"),
            Expr::Macd(a, p) => write!(f, "MACD({a},{},{},{})", p.fast, p.slow, p.signal),
            Expr::Sel(a, p) => write!(f, "SEL({a},{p})"),
            Expr::Proj(a, m) => write!(f, "PROJ({a},{m})"),
            Expr::Win(a, w, fun) => write!(f, "WIN({a},{w},{fun})"),
            Expr::Join(args, fun) => {
                f.write_str("JOIN(")?;
                for a in args {
                    write!(f, "{a},")?;
                }
                write!(f, "{fun})")
            }
            Expr::Union(a, b) => write!(f, "UNION({a},{b})"),
            Expr::Intersect(a, b) => write!(f, "INTERSECT({a},{b})"),
        }
    }
}

/// Canonical name of a tree: the serialization of its canonical form.
pub fn series_name(expr: &Expr) -> String {
    canonicalize(expr).to_string()
}

/// Versioned DHT key for a series name.
pub fn dht_key(name: &str) -> String {
    let mut key = String::with_capacity(KEY_VERSION.len() + name.len());
    key.push_str(KEY_VERSION);
    key.push_str(name);
    key
}
