//! Simulated peers: FIFO segment caches advertised in the DHT, a
//! coordinator that plans and executes distributed queries, and a
//! deterministic scheduler that accounts messages in virtual time.

mod cache;
mod net;
mod plan;
mod sim;

use core::fmt;

pub use cache::{seg_key, Inserted, PeerCache, SegKey};
pub use net::{CostModel, MsgKind, Network};
pub use plan::{PlanNode, QueryPlan, Source, Task};
pub use sim::{run_simulation, BaseInfo, Command, Peer, QueryOutcome, SimReport, Simulation};

use crate::dht::DEFAULT_RING_BITS;
use crate::segment::SegmentSpec;

/// How peer identifiers are placed on the ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IdAssignment {
    /// Evenly spaced ids rotated by a seed-derived offset.
    #[default]
    Balanced,
    /// Ids hashed from the seed and the peer number.
    Hashed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub peers: usize,
    pub ring_bits: u32,
    pub spec: SegmentSpec,
    pub cache_capacity: usize,
    pub seed: u64,
    pub cost: CostModel,
    pub ids: IdAssignment,
    /// Keep trace lines in memory (the digest is always computed).
    pub record_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            peers: 1,
            ring_bits: DEFAULT_RING_BITS,
            spec: SegmentSpec::default(),
            cache_capacity: 256,
            seed: 0,
            cost: CostModel::default(),
            ids: IdAssignment::default(),
            record_trace: false,
        }
    }
}

macro_rules! metrics {
    ($($field:ident),* $(,)?) => {
        /// Counters of a run. Cumulative values never decrease.
        #[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
        pub struct Metrics {
            $(pub $field: u64,)*
        }

        impl Metrics {
            /// Field names in document order.
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            /// Counter increase since `earlier`.
            pub fn since(&self, earlier: &Metrics) -> Metrics {
                Metrics { $($field: self.$field.saturating_sub(earlier.$field),)* }
            }

            pub fn get(&self, key: &str) -> Option<u64> {
                match key {
                    $(stringify!($field) => Some(self.$field),)*
                    _ => None,
                }
            }

            pub fn set(&mut self, key: &str, value: u64) -> bool {
                match key {
                    $(stringify!($field) => { self.$field = value; true })*
                    _ => false,
                }
            }
        }
    };
}

metrics!(
    routing_hops,
    lookups,
    messages,
    bytes_sent,
    cache_hits,
    cache_misses,
    segments_computed,
    segments_fetched,
    fallback_evals,
    wall_time_ns,
);

/// One `key: value` line per counter.
impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for key in Metrics::KEYS {
            writeln!(f, "{key}: {}", self.get(key).unwrap_or(0))?;
        }
        Ok(())
    }
}

/// Parses the document written by `Display`. Unknown keys are ignored.
pub fn parse_metrics(text: &str) -> Metrics {
    let mut m = Metrics::default();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once(':') {
            if let Ok(v) = v.trim().parse() {
                m.set(k.trim(), v);
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn document_round_trip() {
        let m = Metrics {
            messages: 7,
            wall_time_ns: 123,
            ..Default::default()
        };
        let doc = m.to_string();
        assert!(doc.starts_with("routing_hops: 0\n"));
        assert!(doc.contains("messages: 7\n"));
        assert_eq!(parse_metrics(&doc), m);
    }

    #[test]
    fn delta() {
        let a = Metrics {
            messages: 3,
            ..Default::default()
        };
        let b = Metrics {
            messages: 10,
            cache_hits: 2,
            ..Default::default()
        };
        let d = b.since(&a);
        assert_eq!((d.messages, d.cache_hits), (7, 2));
    }
}
