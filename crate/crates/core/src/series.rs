//! Dense calendar-indexed series and the vector-space operations.

use alloc::format;
use alloc::vec::Vec;

use crate::value::{value_add, value_scale};
use crate::{Calendar, Error, Result, Timestamp, TsValue};

/// A dense vector of values, one per calendar slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    calendar: Calendar,
    values: Vec<TsValue>,
}

impl TimeSeries {
    pub fn new(calendar: Calendar, values: Vec<TsValue>) -> Result<Self> {
        if calendar.len != values.len() {
            return Err(Error::CalendarMismatch(format!(
                "calendar has {} slots but {} values were given",
                calendar.len,
                values.len()
            )));
        }
        Ok(TimeSeries { calendar, values })
    }

    /// Series of reals on `calendar`; non-finite inputs become `Unknown`.
    pub fn from_reals(calendar: Calendar, reals: &[f64]) -> Result<Self> {
        Self::new(calendar, reals.iter().map(|&v| TsValue::real(v)).collect())
    }

    pub fn calendar(&self) -> &Calendar {
        &self.calendar
    }

    pub fn values(&self) -> &[TsValue] {
        &self.values
    }

    pub fn into_values(self) -> Vec<TsValue> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<TsValue> {
        self.values.get(i).copied()
    }

    pub fn at(&self, t: Timestamp) -> Result<TsValue> {
        Ok(self.values[self.calendar.index(t)?])
    }

    /// Items as `(time, value)` pairs.
    pub fn items(&self) -> impl Iterator<Item = (Timestamp, TsValue)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.calendar.time_at(i as i64), *v))
    }

    /// Same calendar, values replaced. Lengths must agree.
    pub fn with_values(&self, values: Vec<TsValue>) -> Result<Self> {
        TimeSeries::new(self.calendar, values)
    }

    pub fn map(&self, f: impl FnMut(TsValue) -> TsValue) -> TimeSeries {
        TimeSeries {
            calendar: self.calendar,
            values: self.values.iter().copied().map(f).collect(),
        }
    }

    /// Sub-series over indices `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> TimeSeries {
        let to = to.min(self.len());
        let from = from.min(to);
        TimeSeries {
            calendar: self.calendar.slice(from as i64, to - from),
            values: self.values[from..to].to_vec(),
        }
    }

    pub fn ensure_same_calendar(&self, other: &TimeSeries) -> Result<()> {
        if self.calendar != other.calendar {
            return Err(Error::CalendarMismatch(format!(
                "{:?} vs {:?}",
                self.calendar, other.calendar
            )));
        }
        Ok(())
    }
}

pub fn ts_add(a: &TimeSeries, b: &TimeSeries) -> Result<TimeSeries> {
    a.ensure_same_calendar(b)?;
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| value_add(x, y))
        .collect();
    Ok(TimeSeries {
        calendar: a.calendar,
        values,
    })
}

pub fn ts_scale(s: f64, a: &TimeSeries) -> TimeSeries {
    a.map(|v| value_scale(s, v))
}
