//! Calendars map grid timestamps to vector indices.

use alloc::format;
use core::fmt;
use core::str::FromStr;

use chrono::{NaiveDateTime, TimeDelta};

use crate::{Error, Result};

/// Naive (zone-less) ISO-8601 timestamp with nanosecond resolution.
pub type Timestamp = NaiveDateTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Granularity {
    Second,
    Minute,
    Hour,
    Day,
    Week,
}

impl Granularity {
    pub const ALL: [Granularity; 5] = [
        Granularity::Second,
        Granularity::Minute,
        Granularity::Hour,
        Granularity::Day,
        Granularity::Week,
    ];

    pub fn seconds(self) -> i64 {
        match self {
            Granularity::Second => 1,
            Granularity::Minute => 60,
            Granularity::Hour => 3_600,
            Granularity::Day => 86_400,
            Granularity::Week => 604_800,
        }
    }

    /// Coarsest granularity whose step divides `step_secs`.
    pub fn coarsest_dividing(step_secs: i64) -> Granularity {
        Granularity::ALL
            .iter()
            .rev()
            .copied()
            .find(|g| step_secs % g.seconds() == 0)
            .unwrap_or(Granularity::Second)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Second => "second",
            Granularity::Minute => "minute",
            Granularity::Hour => "hour",
            Granularity::Day => "day",
            Granularity::Week => "week",
        }
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(code: u8) -> Option<Granularity> {
        Granularity::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Granularity::ALL
            .iter()
            .copied()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown granularity {s:?}")))
    }
}

/// `len` consecutive grid points starting at `start`, one per time unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Calendar {
    pub start: Timestamp,
    pub granularity: Granularity,
    pub len: usize,
}

impl Calendar {
    pub fn new(start: Timestamp, granularity: Granularity, len: usize) -> Self {
        Calendar {
            start,
            granularity,
            len,
        }
    }

    fn step(&self) -> TimeDelta {
        TimeDelta::seconds(self.granularity.seconds())
    }

    /// Timestamp of a grid offset relative to `start`. Negative and
    /// past-the-end offsets are allowed; they extend the grid.
    pub fn time_at(&self, offset: i64) -> Timestamp {
        self.start + TimeDelta::seconds(self.granularity.seconds() * offset)
    }

    /// Last grid point, or `None` for an empty calendar.
    pub fn end(&self) -> Option<Timestamp> {
        (self.len > 0).then(|| self.time_at(self.len as i64 - 1))
    }

    /// Signed grid offset of `t`, which must lie on the grid but may be
    /// outside `[start, end]`.
    pub fn offset_of(&self, t: Timestamp) -> Result<i64> {
        let delta = t.signed_duration_since(self.start);
        let step = self.step().num_seconds();
        if delta.subsec_nanos() != 0 || delta.num_seconds() % step != 0 {
            return Err(Error::OffGrid(format!("{t}")));
        }
        Ok(delta.num_seconds() / step)
    }

    pub fn index(&self, t: Timestamp) -> Result<usize> {
        let off = self.offset_of(t)?;
        if off < 0 || off as usize >= self.len {
            return Err(Error::OutOfRange(format!("{t}")));
        }
        Ok(off as usize)
    }

    pub fn with_len(&self, len: usize) -> Calendar {
        Calendar { len, ..*self }
    }

    /// Sub-calendar of `len` points starting at grid offset `offset`.
    pub fn slice(&self, offset: i64, len: usize) -> Calendar {
        Calendar::new(self.time_at(offset), self.granularity, len)
    }
}
