//! Centralized, bottom-up evaluation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::Expr;
use alloc::format;

use crate::value::value_scale;
use crate::{algebra, indicators, series, Error, Result, TimeSeries, TsValue};

/// Resolves base series by name.
pub trait SeriesStore {
    fn series(&self, name: &str) -> Option<&TimeSeries>;
}

impl SeriesStore for BTreeMap<String, TimeSeries> {
    fn series(&self, name: &str) -> Option<&TimeSeries> {
        self.get(name)
    }
}

impl<S: SeriesStore + ?Sized> SeriesStore for &S {
    fn series(&self, name: &str) -> Option<&TimeSeries> {
        (**self).series(name)
    }
}

pub fn evaluate(expr: &Expr, store: &impl SeriesStore) -> Result<TimeSeries> {
    let eval = |e: &Expr| evaluate(e, store);
    match expr {
        Expr::Base(name) => store
            .series(name)
            .cloned()
            .ok_or_else(|| Error::UnknownSeries(name.clone())),
        Expr::Mavg(s, w) => indicators::mavg(&eval(s)?, *w),
        Expr::Ema(s, a, w) => indicators::ema(&eval(s)?, *a, *w),
        Expr::Mom(s, w) => indicators::mom(&eval(s)?, *w),
        Expr::Scale(s, k) => Ok(series::ts_scale(*k, &eval(s)?)),
        Expr::Msub(a, b) => indicators::msub(&eval(a)?, &eval(b)?),
        Expr::Macd(s, p) => indicators::macd(&eval(s)?, *p),
        Expr::Sel(s, p) => Ok(algebra::select(&eval(s)?, p)),
        Expr::Proj(s, f) => Ok(algebra::project(&eval(s)?, f)),
        Expr::Win(s, w, f) => algebra::window(&eval(s)?, *w, f),
        Expr::Union(a, b) => algebra::union(&eval(a)?, &eval(b)?),
        Expr::Intersect(a, b) => algebra::intersect(&eval(a)?, &eval(b)?),
        Expr::Join(args, f) => {
            let inputs = args.iter().map(eval).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&TimeSeries> = inputs.iter().collect();
            algebra::join(&refs, f)
        }
    }
}

/// Evaluates one operator node over aligned input buffers (one per series
/// argument, in order). `origin` follows
/// [`window_values`](crate::algebra::window_values). `Base` and `MACD`
/// nodes have no single-step kernel and are rejected.
pub fn eval_buffers(
    node: &Expr,
    inputs: &[&[TsValue]],
    origin: Option<usize>,
) -> Result<Vec<TsValue>> {
    let first = inputs.first().copied().unwrap_or(&[]);
    let pairwise = |f: fn(TsValue, TsValue) -> TsValue| -> Vec<TsValue> {
        first
            .iter()
            .zip(inputs[1])
            .map(|(&a, &b)| f(a, b))
            .collect()
    };
    Ok(match node {
        Expr::Base(_) | Expr::Macd(..) => {
            return Err(Error::Config(format!("{node} has no buffer kernel")))
        }
        Expr::Mavg(_, w) => indicators::mavg_values(first, *w, origin),
        Expr::Ema(_, a, w) => indicators::ema_values(first, *a, *w, origin),
        Expr::Mom(_, w) => indicators::mom_values(first, *w, origin),
        Expr::Win(_, w, f) => algebra::window_values(first, *w, origin, |items| f.apply(items)),
        Expr::Scale(_, k) => first.iter().map(|&v| value_scale(*k, v)).collect(),
        Expr::Sel(_, p) => first
            .iter()
            .map(|&v| if p.test(v) { v } else { TsValue::Empty })
            .collect(),
        Expr::Proj(_, f) => first.iter().map(|&v| f.apply(v)).collect(),
        Expr::Msub(..) => pairwise(indicators::msub_value),
        Expr::Union(..) => pairwise(algebra::union_value),
        Expr::Intersect(..) => pairwise(algebra::intersect_value),
        Expr::Join(_, f) => {
            let mut row = alloc::vec![TsValue::Empty; inputs.len()];
            (0..first.len())
                .map(|t| {
                    for (slot, input) in row.iter_mut().zip(inputs) {
                        *slot = input[t];
                    }
                    f.apply(&row)
                })
                .collect()
        }
    })
}
