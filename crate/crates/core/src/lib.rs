//! Null-aware time-series algebra with a simulated peer-to-peer execution layer.
//!
//! A [`TimeSeries`] is a dense, calendar-indexed vector of [`TsValue`]s. Two
//! distinct nulls exist: [`TsValue::Empty`] (`!`, no value at that time) and
//! [`TsValue::Unknown`] (`?`, a value exists but is not known). On top of the
//! vector space sit relational operators ([`algebra`]), the generic sliding
//! window, and financial indicators ([`indicators`]).
//!
//! Series are named by canonical functional expressions ([`expr`]). Long
//! series are cut into overlapping segments ([`segment`]), located through a
//! Chord ring ([`dht`]) and computed by simulated peers with FIFO caches
//! ([`peer`]). Distributed evaluation is exactly the centralized one, up to
//! floating-point reassociation in running sums.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod algebra;
pub mod calendar;
pub mod dht;
mod error;
pub mod expr;
pub mod indicators;
pub mod peer;
pub mod segment;
pub mod series;
pub mod value;

pub use calendar::{Calendar, Granularity, Timestamp};
pub use error::{Error, Result};
pub use expr::{series_name, Expr};
pub use series::TimeSeries;
pub use value::TsValue;
