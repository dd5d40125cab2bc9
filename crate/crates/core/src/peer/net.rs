//! Simulated message passing with per-peer virtual clocks and a trace.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use sha2::{Digest, Sha256};

use super::Metrics;
use crate::dht::{RingId, Route};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MsgKind {
    Lookup,
    LookupResp,
    Put,
    Get,
    GetResp,
    Remove,
    Ack,
    Compute,
    SegFetch,
    SegData,
}

impl MsgKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MsgKind::Lookup => "LOOKUP",
            MsgKind::LookupResp => "LOOKUP_RESP",
            MsgKind::Put => "PUT",
            MsgKind::Get => "GET",
            MsgKind::GetResp => "GET_RESP",
            MsgKind::Remove => "REMOVE",
            MsgKind::Ack => "ACK",
            MsgKind::Compute => "COMPUTE",
            MsgKind::SegFetch => "SEG_FETCH",
            MsgKind::SegData => "SEG_DATA",
        }
    }
}

impl fmt::Display for MsgKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Virtual cost of communication and computation, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub latency_ns: u64,
    pub ns_per_byte: u64,
    pub ns_per_value: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            latency_ns: 50_000,
            ns_per_byte: 8,
            ns_per_value: 5,
        }
    }
}

/// Size in bytes of a locator on the wire (peer id and two timestamps).
pub const LOCATOR_BYTES: usize = 24;
/// Size of a routed lookup request or response.
pub const LOOKUP_BYTES: usize = 16;

#[derive(Debug, Clone)]
struct Sent {
    deliver: u64,
    id: u64,
    src: RingId,
    dst: RingId,
    kind: MsgKind,
    bytes: usize,
    payload: String,
}

/// Delivers messages instantly in program order while accounting their
/// virtual delivery times. A sender's link is busy for the transmission
/// time of each message, and a receiver's clock jumps to the delivery time.
#[derive(Debug, Clone)]
pub struct Network {
    cost: CostModel,
    clocks: BTreeMap<RingId, u64>,
    next_id: u64,
    pending: Vec<Sent>,
    digest: Sha256,
    lines: Option<Vec<String>>,
}

impl Network {
    pub fn new(cost: CostModel, peers: impl IntoIterator<Item = RingId>, record: bool) -> Self {
        Network {
            cost,
            clocks: peers.into_iter().map(|p| (p, 0)).collect(),
            next_id: 0,
            pending: Vec::new(),
            digest: Sha256::new(),
            lines: record.then(Vec::new),
        }
    }

    pub fn cost(&self) -> CostModel {
        self.cost
    }

    pub fn clock(&self, peer: RingId) -> u64 {
        self.clocks.get(&peer).copied().unwrap_or(0)
    }

    /// Latest clock over all peers, the time at which the system is idle.
    pub fn horizon(&self) -> u64 {
        self.clocks.values().copied().max().unwrap_or(0)
    }

    fn clock_mut(&mut self, peer: RingId) -> &mut u64 {
        self.clocks.entry(peer).or_insert(0)
    }

    pub fn advance_to(&mut self, peer: RingId, t: u64) {
        let c = self.clock_mut(peer);
        *c = (*c).max(t);
    }

    /// Charges local computation over `values` inputs to `peer`.
    pub fn work(&mut self, peer: RingId, values: usize) {
        let ns = self.cost.ns_per_value * values as u64;
        *self.clock_mut(peer) += ns;
    }

    /// Sends one message. Messages a peer sends to itself are free and
    /// leave no trace.
    pub fn send(
        &mut self,
        metrics: &mut Metrics,
        src: RingId,
        dst: RingId,
        kind: MsgKind,
        bytes: usize,
        payload: impl FnOnce() -> String,
    ) {
        if src == dst {
            return;
        }
        let transmit = self.cost.ns_per_byte * bytes as u64;
        let sent_at = {
            let c = self.clock_mut(src);
            *c += transmit;
            *c
        };
        let deliver = sent_at + self.cost.latency_ns;
        self.advance_to(dst, deliver);
        metrics.messages += 1;
        metrics.bytes_sent += bytes as u64;
        self.pending.push(Sent {
            deliver,
            id: self.next_id,
            src,
            dst,
            kind,
            bytes,
            payload: payload(),
        });
        self.next_id += 1;
    }

    /// Routes a DHT request from `from`: the lookup is forwarded along the
    /// route, the owner answers the originator, then the request and its
    /// reply travel directly.
    #[allow(clippy::too_many_arguments)]
    pub fn dht_op(
        &mut self,
        metrics: &mut Metrics,
        from: RingId,
        route: &Route,
        request: (MsgKind, usize),
        reply: (MsgKind, usize),
        payload: &str,
    ) {
        metrics.lookups += 1;
        metrics.routing_hops += route.hops() as u64;
        let mut at = from;
        for &next in &route.path {
            self.send(metrics, at, next, MsgKind::Lookup, LOOKUP_BYTES, || {
                payload.into()
            });
            at = next;
        }
        let owner = route.owner;
        self.send(
            metrics,
            owner,
            from,
            MsgKind::LookupResp,
            LOOKUP_BYTES,
            || payload.into(),
        );
        self.send(metrics, from, owner, request.0, request.1, || {
            payload.into()
        });
        self.send(metrics, owner, from, reply.0, reply.1, || payload.into());
    }

    /// A routed lookup alone, answered directly to the originator.
    pub fn lookup(&mut self, metrics: &mut Metrics, from: RingId, route: &Route, payload: &str) {
        metrics.lookups += 1;
        metrics.routing_hops += route.hops() as u64;
        let mut at = from;
        for &next in &route.path {
            self.send(metrics, at, next, MsgKind::Lookup, LOOKUP_BYTES, || {
                payload.into()
            });
            at = next;
        }
        self.send(
            metrics,
            route.owner,
            from,
            MsgKind::LookupResp,
            LOOKUP_BYTES,
            || payload.into(),
        );
    }

    /// Appends pending messages to the trace in delivery order.
    pub fn flush(&mut self) {
        let mut pending = core::mem::take(&mut self.pending);
        pending.sort_by_key(|m| (m.deliver, m.id));
        let mut line = String::new();
        for m in pending {
            line.clear();
            let _ = writeln!(
                line,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                m.deliver, m.id, m.src, m.dst, m.kind, m.bytes, m.payload
            );
            self.digest.update(line.as_bytes());
            if let Some(lines) = &mut self.lines {
                lines.push(line.trim_end().into());
            }
        }
    }

    /// Hex SHA-256 of every flushed trace line.
    pub fn digest(&self) -> String {
        let mut out = String::with_capacity(64);
        for b in self.digest.clone().finalize() {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    /// Recorded trace lines, when recording was requested.
    pub fn lines(&self) -> Option<&[String]> {
        self.lines.as_deref()
    }
}
