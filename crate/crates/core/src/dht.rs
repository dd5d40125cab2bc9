//! Static Chord ring: SHA-256 keyed identifiers, finger-table routing and
//! the locator index stored at key owners.
//!
//! Membership is fixed at construction, so finger tables are computed once
//! and never stabilized.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::expr::dht_key;
use crate::{Error, Result, Timestamp};

pub const DEFAULT_RING_BITS: u32 = 32;

/// Position on an identifier ring of `2^m` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RingId(pub u64);

impl core::fmt::Display for RingId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// First 64 bits of SHA-256 over `data`, truncated to the top `bits` bits.
pub fn hash_bytes(data: &[u8], bits: u32) -> RingId {
    let digest = Sha256::digest(data);
    let word = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));
    RingId(if bits >= 64 {
        word
    } else {
        word >> (64 - bits)
    })
}

/// Ring position of a series name (hashed in its versioned key form).
pub fn hash_key(name: &str, bits: u32) -> RingId {
    hash_bytes(dht_key(name).as_bytes(), bits)
}

/// A peer advertising that it caches `[start, end]` of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Locator {
    pub peer: RingId,
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Locator {
    pub fn overlaps(&self, from: Timestamp, to: Timestamp) -> bool {
        self.start <= to && self.end >= from
    }
}

#[derive(Debug, Clone)]
pub struct ChordNode {
    pub id: RingId,
    pub predecessor: RingId,
    pub successor: RingId,
    /// `fingers[k]` is the first node at or after `id + 2^k`.
    pub fingers: Vec<RingId>,
    store: BTreeMap<String, Vec<Locator>>,
}

impl ChordNode {
    pub fn entries(&self) -> impl Iterator<Item = (&str, &[Locator])> {
        self.store.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Result of routing a request through the ring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub owner: RingId,
    /// Nodes the request was forwarded to, in order, ending at the owner.
    /// Empty when the start node owns the id.
    pub path: Vec<RingId>,
}

impl Route {
    pub fn hops(&self) -> usize {
        self.path.len()
    }
}

#[derive(Debug, Clone)]
pub struct ChordRing {
    bits: u32,
    nodes: Vec<ChordNode>,
}

fn in_open_closed(x: u64, a: u64, b: u64) -> bool {
    if a < b {
        a < x && x <= b
    } else {
        x > a || x <= b
    }
}

fn in_open(x: u64, a: u64, b: u64) -> bool {
    if a < b {
        a < x && x < b
    } else {
        x > a || x < b
    }
}

impl ChordRing {
    /// Builds the ring over `ids` (duplicates collapse).
    pub fn new(bits: u32, ids: impl IntoIterator<Item = RingId>) -> Result<ChordRing> {
        if !(1..=64).contains(&bits) {
            return Err(Error::Config(alloc::format!(
                "ring bits must be in 1..=64, got {bits}"
            )));
        }
        let mut sorted: Vec<RingId> = ids.into_iter().collect();
        if let Some(bad) = sorted.iter().find(|id| bits < 64 && id.0 >> bits != 0) {
            return Err(Error::Config(alloc::format!(
                "id {bad} does not fit in {bits} bits"
            )));
        }
        sorted.sort();
        sorted.dedup();
        let mut ring = ChordRing {
            bits,
            nodes: Vec::with_capacity(sorted.len()),
        };
        let n = sorted.len();
        for (i, &id) in sorted.iter().enumerate() {
            let fingers = (0..bits)
                .map(|k| ring.successor_in(&sorted, ring.add(id.0, 1u64 << k)))
                .collect::<Vec<_>>();
            ring.nodes.push(ChordNode {
                id,
                predecessor: sorted[(i + n - 1) % n],
                successor: sorted[(i + 1) % n],
                fingers,
                store: BTreeMap::new(),
            });
        }
        Ok(ring)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[ChordNode] {
        &self.nodes
    }

    fn modulus_mask(&self) -> u64 {
        if self.bits >= 64 {
            u64::MAX
        } else {
            (1u64 << self.bits) - 1
        }
    }

    fn add(&self, a: u64, b: u64) -> u64 {
        a.wrapping_add(b) & self.modulus_mask()
    }

    fn successor_in(&self, sorted: &[RingId], id: u64) -> RingId {
        let at = sorted.partition_point(|n| n.0 < id);
        sorted[at % sorted.len()]
    }

    /// Owner of `id`, from global knowledge of the membership.
    pub fn successor(&self, id: RingId) -> Result<RingId> {
        if self.nodes.is_empty() {
            return Err(Error::RingEmpty);
        }
        let at = self.nodes.partition_point(|n| n.id.0 < id.0);
        Ok(self.nodes[at % self.nodes.len()].id)
    }

    pub fn position(&self, id: RingId) -> Option<usize> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok()
    }

    pub fn node(&self, id: RingId) -> Option<&ChordNode> {
        self.position(id).map(|i| &self.nodes[i])
    }

    /// Length of the arc `(predecessor, id]` owned by a member.
    pub fn owned_arc(&self, id: RingId) -> Option<u128> {
        let node = self.node(id)?;
        if self.nodes.len() == 1 {
            return Some(1u128 << self.bits);
        }
        let span = id.0.wrapping_sub(node.predecessor.0) & self.modulus_mask();
        Some(span as u128)
    }

    /// Greedy finger routing from `start` towards the owner of `id`.
    pub fn route(&self, start: RingId, id: RingId) -> Result<Route> {
        if self.nodes.is_empty() {
            return Err(Error::RingEmpty);
        }
        let mut cur = self
            .node(start)
            .ok_or_else(|| Error::Config(alloc::format!("{start} is not a ring member")))?;
        let mut path = Vec::new();
        loop {
            if self.nodes.len() == 1 || in_open_closed(id.0, cur.predecessor.0, cur.id.0) {
                return Ok(Route {
                    owner: cur.id,
                    path,
                });
            }
            let next = if in_open_closed(id.0, cur.id.0, cur.successor.0) {
                cur.successor
            } else {
                cur.fingers
                    .iter()
                    .rev()
                    .copied()
                    .find(|f| in_open(f.0, cur.id.0, id.0))
                    .unwrap_or(cur.successor)
            };
            path.push(next);
            cur = self.node(next).expect("fingers point at members");
        }
    }

    /// `(owner, hops)` for a lookup of `id` issued at `start`.
    pub fn lookup(&self, start: RingId, id: RingId) -> Result<(RingId, usize)> {
        let r = self.route(start, id)?;
        Ok((r.owner, r.hops()))
    }

    fn owner_store(&mut self, owner: RingId) -> &mut BTreeMap<String, Vec<Locator>> {
        let i = self.position(owner).expect("owner is a member");
        &mut self.nodes[i].store
    }

    /// Appends locators to the entry of `name` at its owner, skipping exact
    /// duplicates. Returns the route taken.
    pub fn put(&mut self, from: RingId, name: &str, locs: &[Locator]) -> Result<Route> {
        let route = self.route(from, hash_key(name, self.bits))?;
        let entry = self
            .owner_store(route.owner)
            .entry(dht_key(name))
            .or_default();
        for loc in locs {
            if !entry.contains(loc) {
                entry.push(*loc);
            }
        }
        Ok(route)
    }

    /// Full locator list of `name`, possibly empty.
    pub fn get(&self, from: RingId, name: &str) -> Result<(Vec<Locator>, Route)> {
        let route = self.route(from, hash_key(name, self.bits))?;
        let i = self.position(route.owner).expect("owner is a member");
        let locs = self.nodes[i]
            .store
            .get(&dht_key(name))
            .cloned()
            .unwrap_or_default();
        Ok((locs, route))
    }

    /// Removes exact-match locators; the entry disappears once empty.
    pub fn remove(&mut self, from: RingId, name: &str, locs: &[Locator]) -> Result<Route> {
        let route = self.route(from, hash_key(name, self.bits))?;
        let key = dht_key(name);
        let store = self.owner_store(route.owner);
        if let Some(entry) = store.get_mut(&key) {
            entry.retain(|l| !locs.contains(l));
            if entry.is_empty() {
                store.remove(&key);
            }
        }
        Ok(route)
    }

    /// Every `(key, locator)` pair stored anywhere on the ring.
    pub fn all_entries(&self) -> impl Iterator<Item = (&str, &Locator)> {
        self.nodes
            .iter()
            .flat_map(|n| n.store.iter())
            .flat_map(|(k, v)| v.iter().map(move |l| (k.as_str(), l)))
    }
}

/// Locators overlapping `[from, to]`.
pub fn filter_interval(locs: &[Locator], from: Timestamp, to: Timestamp) -> Vec<Locator> {
    locs.iter()
        .copied()
        .filter(|l| l.overlaps(from, to))
        .collect()
}
