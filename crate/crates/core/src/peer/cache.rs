use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::segment::Segment;

/// Cache slot identity: series name and segment index.
pub type SegKey = (String, u64);

pub fn seg_key(seg: &Segment) -> SegKey {
    (seg.series_name.clone(), seg.seg_index)
}

/// What a FIFO insert did.
#[derive(Debug, Default)]
pub struct Inserted {
    pub stored: bool,
    pub evicted: Vec<Arc<Segment>>,
}

/// Pure FIFO segment cache. Re-inserting a cached segment does not move it.
#[derive(Debug, Clone, Default)]
pub struct PeerCache {
    capacity: usize,
    queue: VecDeque<SegKey>,
    store: BTreeMap<SegKey, Arc<Segment>>,
}

impl PeerCache {
    pub fn new(capacity: usize) -> Self {
        PeerCache {
            capacity,
            ..Default::default()
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn get(&self, name: &str, seg_index: u64) -> Option<&Arc<Segment>> {
        // BTreeMap lookups need an owned key; the clone is one small string.
        self.store.get(&(String::from(name), seg_index))
    }

    pub fn contains(&self, key: &SegKey) -> bool {
        self.store.contains_key(key)
    }

    pub fn insert(&mut self, seg: Arc<Segment>) -> Inserted {
        let key = seg_key(&seg);
        if self.capacity == 0 || self.store.contains_key(&key) {
            return Inserted::default();
        }
        self.queue.push_back(key.clone());
        self.store.insert(key, seg);
        let mut evicted = Vec::new();
        while self.store.len() > self.capacity {
            let oldest = self.queue.pop_front().expect("queue mirrors store");
            evicted.push(self.store.remove(&oldest).expect("queue mirrors store"));
        }
        Inserted {
            stored: true,
            evicted,
        }
    }

    /// Cached segments in FIFO order, oldest first.
    pub fn segments(&self) -> impl Iterator<Item = &Arc<Segment>> {
        self.queue.iter().map(|k| &self.store[k])
    }
}
