//! Technical-analysis indicators built on the window operator.
//!
//! All indicators use windows ending at and including `t`, with indices
//! before the series start reading `S[0]`. Inside a window, any `Unknown`
//! makes the output `Unknown`; otherwise any `Empty` makes it `Empty`.

use alloc::format;
use alloc::vec::Vec;

use crate::algebra::{clamp_read, window_start, window_values};
use crate::value::{value_add, value_scale};
use crate::{Calendar, Error, Result, TimeSeries, TsValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MacdParams {
    pub fast: usize,
    pub slow: usize,
    pub signal: usize,
}

impl Default for MacdParams {
    fn default() -> Self {
        MacdParams {
            fast: 12,
            slow: 26,
            signal: 9,
        }
    }
}

impl MacdParams {
    pub fn validate(&self) -> Result<()> {
        if self.fast < 1 || self.slow < 1 || self.signal < 1 || self.fast >= self.slow {
            return Err(Error::BadParams(format!(
                "MACD needs 1 <= fast < slow and signal >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    Buy,
    Sell,
}

/// Per-position trading signal; `None` where the signal line is null.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    pub calendar: Calendar,
    pub signals: Vec<Option<Signal>>,
}

fn check_window(w: usize) -> Result<()> {
    if w < 1 {
        Err(Error::BadWindow(w))
    } else {
        Ok(())
    }
}

/// Moving average over `w` items.
pub fn mavg(s: &TimeSeries, w: usize) -> Result<TimeSeries> {
    check_window(w)?;
    s.with_values(mavg_values(s.values(), w, Some(0)))
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct RunningSum {
    sum: f64,
    comp: f64,
}

impl RunningSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Default)]
struct WindowState {
    sum: RunningSum,
    empties: usize,
    unknowns: usize,
}

impl WindowState {
    fn push(&mut self, v: TsValue) {
        match v {
            TsValue::Real(x) => self.sum.add(x),
            TsValue::Empty => self.empties += 1,
            TsValue::Unknown => self.unknowns += 1,
        }
    }

    fn pop(&mut self, v: TsValue) {
        match v {
            TsValue::Real(x) => self.sum.add(-x),
            TsValue::Empty => self.empties -= 1,
            TsValue::Unknown => self.unknowns -= 1,
        }
    }

    fn has_nulls(&self) -> bool {
        self.empties + self.unknowns > 0
    }

    fn mean(&self, w: usize) -> TsValue {
        if self.unknowns > 0 {
            TsValue::Unknown
        } else if self.empties > 0 {
            TsValue::Empty
        } else {
            TsValue::real(self.sum.value() / w as f64)
        }
    }
}

/// Incremental moving average over a buffer; `origin` as in
/// [`window_values`](crate::algebra::window_values).
///
/// Each step adds the entering item and removes the leaving one. When the
/// window turns null-free again after holding nulls, the real sum is
/// recomputed directly.
pub fn mavg_values(values: &[TsValue], w: usize, origin: Option<usize>) -> Vec<TsValue> {
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    let read = |j: isize| values[clamp_read(j, origin)];
    let mut state: Option<WindowState> = None;
    for p in 0..n {
        let Some(first) = window_start(p, w, origin) else {
            out.push(TsValue::Unknown);
            continue;
        };
        match state.as_mut() {
            None => {
                let mut st = WindowState::default();
                for j in first..=p as isize {
                    st.push(read(j));
                }
                state = Some(st);
            }
            Some(st) => {
                let had_nulls = st.has_nulls();
                st.push(read(p as isize));
                st.pop(read(first - 1));
                if had_nulls && !st.has_nulls() {
                    st.sum = RunningSum::default();
                    for j in first..=p as isize {
                        if let TsValue::Real(x) = read(j) {
                            st.sum.add(x);
                        }
                    }
                }
            }
        }
        out.push(state.as_ref().map_or(TsValue::Unknown, |st| st.mean(w)));
    }
    out
}

/// Exponentially weighted moving average over a finite window: the item `i`
/// steps back is weighted by `(1-alpha)^i`, normalized by the weight sum.
/// `alpha = 0` gives uniform weights.
pub fn ema(s: &TimeSeries, alpha: f64, w: usize) -> Result<TimeSeries> {
    check_window(w)?;
    check_alpha(alpha)?;
    s.with_values(ema_values(s.values(), alpha, w, Some(0)))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::BadAlpha(alpha));
    }
    Ok(())
}

pub fn ema_values(values: &[TsValue], alpha: f64, w: usize, origin: Option<usize>) -> Vec<TsValue> {
    let decay = 1.0 - alpha;
    // weights[k] applies to the k-th oldest item
    let mut weights = alloc::vec![0.0; w];
    let mut wt = 1.0;
    for slot in weights.iter_mut().rev() {
        *slot = wt;
        wt *= decay;
    }
    let total: f64 = weights.iter().sum();
    window_values(values, w, origin, |items| {
        items
            .iter()
            .zip(&weights)
            .fold(TsValue::Real(0.0), |acc, (&v, &k)| {
                value_add(acc, value_scale(k, v))
            })
            .map_real(|x| x / total)
    })
}

/// Momentum: `S[t] - S[t-w]`.
pub fn mom(s: &TimeSeries, w: usize) -> Result<TimeSeries> {
    check_window(w)?;
    s.with_values(mom_values(s.values(), w, Some(0)))
}

pub fn mom_values(values: &[TsValue], w: usize, origin: Option<usize>) -> Vec<TsValue> {
    window_values(values, w + 1, origin, |items| {
        value_add(items[w], value_scale(-1.0, items[0]))
    })
}

pub(crate) fn msub_value(a: TsValue, b: TsValue) -> TsValue {
    value_add(a, value_scale(-1.0, b))
}

/// Pointwise difference `S1 - S2`.
pub fn msub(a: &TimeSeries, b: &TimeSeries) -> Result<TimeSeries> {
    a.ensure_same_calendar(b)?;
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| msub_value(x, y))
        .collect();
    a.with_values(values)
}

/// MACD signal line: `MAVG_signal(MAVG_fast(S) - MAVG_slow(S))`.
pub fn macd(s: &TimeSeries, p: MacdParams) -> Result<TimeSeries> {
    p.validate()?;
    let diff = msub(&mavg(s, p.fast)?, &mavg(s, p.slow)?)?;
    mavg(&diff, p.signal)
}

/// Buy where the MACD signal line is strictly positive, sell where it is a
/// real `<= 0`.
pub fn buy_signal(s: &TimeSeries, p: MacdParams) -> Result<SignalSeries> {
    let line = macd(s, p)?;
    let signals = line
        .values()
        .iter()
        .map(|v| match v {
            TsValue::Real(x) if *x > 0.0 => Some(Signal::Buy),
            TsValue::Real(_) => Some(Signal::Sell),
            _ => None,
        })
        .collect();
    Ok(SignalSeries {
        calendar: *line.calendar(),
        signals,
    })
}
