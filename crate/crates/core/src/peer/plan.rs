use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::dht::RingId;
use crate::segment::{IndexInterval, Segment, SegmentSpec};
use crate::{Calendar, Expr};

/// Where a needed segment comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    /// A peer advertises it in the DHT.
    CacheHit(RingId),
    /// Base data read from the peer the segment was placed on at load time.
    FetchBase(RingId),
    /// Computed from the same segments (or, for fallback nodes, the
    /// surrounding range) of these child nodes.
    ComputeFrom(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub seg_index: u64,
    pub source: Source,
}

/// One distinct subtree of the query.
#[derive(Debug, Clone)]
pub struct PlanNode {
    pub name: String,
    pub expr: Expr,
    /// Indices of child nodes; always smaller than this node's index.
    pub children: Vec<usize>,
    pub lookback: usize,
    /// Evaluated at the coordinator over an assembled range because the
    /// accumulated lookback does not fit in the halo.
    pub fallback: bool,
    /// Left-halo positions whose values depend on data outside the buffer.
    pub(crate) reach: usize,
    pub tasks: Vec<Task>,
}

impl PlanNode {
    pub fn computed(&self) -> impl Iterator<Item = u64> + '_ {
        self.tasks
            .iter()
            .filter(|t| matches!(t.source, Source::ComputeFrom(_)))
            .map(|t| t.seg_index)
    }
}

/// Subtrees in post-order: children precede parents and the target is last.
#[derive(Debug, Clone)]
pub struct QueryPlan {
    pub target: Expr,
    pub coordinator: RingId,
    pub interval: IndexInterval,
    pub calendar: Calendar,
    pub spec: SegmentSpec,
    pub nodes: Vec<PlanNode>,
    /// Cache hits captured at planning time, by `(node, seg_index)`.
    pub(crate) pinned: BTreeMap<(usize, u64), (RingId, Arc<Segment>)>,
}

impl QueryPlan {
    pub fn root(&self) -> &PlanNode {
        self.nodes.last().expect("a plan has at least one node")
    }

    pub fn node(&self, name: &str) -> Option<&PlanNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn compute_tasks(&self) -> usize {
        self.nodes.iter().map(|n| n.computed().count()).sum()
    }

    /// True when every segment of the target is served from a cache.
    pub fn fully_cached(&self) -> bool {
        self.root()
            .tasks
            .iter()
            .all(|t| matches!(t.source, Source::CacheHit(_)))
    }
}
