use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::cache::{seg_key, PeerCache, SegKey};
use super::net::{MsgKind, Network, LOCATOR_BYTES};
use super::plan::{PlanNode, QueryPlan, Source, Task};
use super::{IdAssignment, Metrics, SimConfig};
use crate::dht::{hash_bytes, ChordRing, Locator, RingId};
use crate::expr::{canonicalize, dht_key, eval_buffers, parse};
use crate::segment::{assemble, segment, IndexInterval, Segment, SegmentSpec};
use crate::{Calendar, Error, Expr, Result, TimeSeries, Timestamp, TsValue};

#[derive(Debug, Clone)]
pub struct Peer {
    pub id: RingId,
    pub cache: PeerCache,
    disk: BTreeMap<SegKey, Arc<Segment>>,
}

impl Peer {
    /// Base segments placed on this peer at load time.
    pub fn disk(&self) -> impl Iterator<Item = &Arc<Segment>> {
        self.disk.values()
    }
}

/// Metadata of a loaded base series, known to every peer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaseInfo {
    pub calendar: Calendar,
    pub spec: SegmentSpec,
}

#[derive(Debug, Clone)]
pub struct QueryOutcome {
    /// Canonical name of the queried series.
    pub name: String,
    pub series: TimeSeries,
    /// Counter increase caused by this query.
    pub metrics: Metrics,
}

/// A peer network driven one command at a time. Between commands every
/// peer is idle and the cache/DHT coherence invariant holds.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    ring: ChordRing,
    peers: Vec<Peer>,
    catalog: BTreeMap<String, BaseInfo>,
    net: Network,
    metrics: Metrics,
    coordinator: RingId,
}

fn assign_ids(c: &SimConfig) -> Result<Vec<RingId>> {
    if c.peers == 0 {
        return Err(Error::Config("at least one peer is required".into()));
    }
    if !(1..=64).contains(&c.ring_bits) {
        return Err(Error::Config(format!(
            "ring bits must be in 1..=64, got {}",
            c.ring_bits
        )));
    }
    let space = 1u128 << c.ring_bits;
    if c.peers as u128 > space {
        return Err(Error::Config(format!(
            "{} peers do not fit on a ring of {} bits",
            c.peers, c.ring_bits
        )));
    }
    let ids: Vec<RingId> = match c.ids {
        IdAssignment::Balanced => {
            let step = space / c.peers as u128;
            let seed = format!("ring-offset:{}", c.seed);
            let offset = hash_bytes(seed.as_bytes(), c.ring_bits).0 as u128 % step;
            (0..c.peers as u128)
                .map(|k| RingId(((offset + k * step) % space) as u64))
                .collect()
        }
        IdAssignment::Hashed => (0..c.peers)
            .map(|k| hash_bytes(format!("peer:{}:{k}", c.seed).as_bytes(), c.ring_bits))
            .collect(),
    };
    if ids.iter().collect::<BTreeSet<_>>().len() != ids.len() {
        return Err(Error::Config(
            "peer ids collide; choose another seed".into(),
        ));
    }
    Ok(ids)
}

fn locator(peer: RingId, seg: &Segment) -> Locator {
    Locator {
        peer,
        start: seg.core_start_time(),
        end: seg.core_end_time(),
    }
}

fn seg_of_locator(cal: &Calendar, spec: SegmentSpec, loc: &Locator) -> Option<u64> {
    let off = cal.offset_of(loc.start).ok()?;
    let core = spec.core_len as i64;
    (off >= 0 && off % core == 0).then(|| (off / core) as u64)
}

/// Maximal runs of consecutive indices in a sorted list.
fn runs(sorted: &[u64]) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::new();
    for &i in sorted {
        match out.last_mut() {
            Some((_, b)) if *b + 1 == i => *b = i,
            _ => out.push((i, i)),
        }
    }
    out
}

/// Buffer range for a fallback run of segments `a..=b`: the output covers
/// `lo..=hi` (halos included) and needs inputs over `gstart..=ghi`.
struct FallbackRange {
    lo: i64,
    gstart: usize,
    ghi: usize,
}

fn fallback_range(
    spec: SegmentSpec,
    a: u64,
    b: u64,
    lookback: usize,
    padded: usize,
) -> FallbackRange {
    let lo = spec.core_start(a) - spec.halo as i64;
    let hi = spec.core_start(b) + (spec.core_len + spec.halo) as i64 - 1;
    FallbackRange {
        lo,
        gstart: (lo - lookback as i64).max(0) as usize,
        ghi: (hi as usize).min(padded - 1),
    }
}

fn add_node(
    expr: &Expr,
    halo: usize,
    nodes: &mut Vec<PlanNode>,
    ids: &mut BTreeMap<String, usize>,
) -> usize {
    let name = expr.to_string();
    if let Some(&k) = ids.get(&name) {
        return k;
    }
    let children: Vec<usize> = expr
        .children()
        .into_iter()
        .map(|c| add_node(c, halo, nodes, ids))
        .collect();
    let lookback = expr.lookback();
    let child_reach = children.iter().map(|&c| nodes[c].reach).max().unwrap_or(0);
    let fallback = child_reach + lookback > halo;
    nodes.push(PlanNode {
        name: name.clone(),
        expr: expr.clone(),
        children,
        lookback,
        fallback,
        reach: if fallback { 0 } else { child_reach + lookback },
        tasks: Vec::new(),
    });
    ids.insert(name, nodes.len() - 1);
    nodes.len() - 1
}

type Held = BTreeMap<u64, (RingId, Arc<Segment>)>;

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Simulation> {
        config.spec.validate()?;
        let ids = assign_ids(&config)?;
        let ring = ChordRing::new(config.ring_bits, ids)?;
        let peers: Vec<Peer> = ring
            .nodes()
            .iter()
            .map(|n| Peer {
                id: n.id,
                cache: PeerCache::new(config.cache_capacity),
                disk: BTreeMap::new(),
            })
            .collect();
        let coordinator = peers[0].id;
        let net = Network::new(config.cost, peers.iter().map(|p| p.id), config.record_trace);
        Ok(Simulation {
            config,
            ring,
            peers,
            catalog: BTreeMap::new(),
            net,
            metrics: Metrics::default(),
            coordinator,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn ring(&self) -> &ChordRing {
        &self.ring
    }

    pub fn peers(&self) -> &[Peer] {
        &self.peers
    }

    pub fn peer(&self, id: RingId) -> Option<&Peer> {
        self.ring.position(id).map(|i| &self.peers[i])
    }

    /// Cumulative counters.
    pub fn metrics(&self) -> Metrics {
        self.metrics
    }

    /// The peer that issues loads and queries.
    pub fn coordinator(&self) -> RingId {
        self.coordinator
    }

    pub fn catalog(&self) -> &BTreeMap<String, BaseInfo> {
        &self.catalog
    }

    pub fn trace_digest(&self) -> String {
        self.net.digest()
    }

    pub fn trace_lines(&self) -> Option<&[String]> {
        self.net.lines()
    }

    /// Number of base segments stored on each peer, in ring order.
    pub fn disk_load(&self) -> Vec<(RingId, usize)> {
        self.peers.iter().map(|p| (p.id, p.disk.len())).collect()
    }

    /// Peer that stores base segment `i` of `name`.
    pub fn placement(&self, name: &str, i: u64) -> Result<RingId> {
        self.ring.successor(self.placement_key(name, i))
    }

    fn placement_key(&self, name: &str, i: u64) -> RingId {
        hash_bytes(format!("{name}#{i}").as_bytes(), self.ring.bits())
    }

    fn index_of(&self, id: RingId) -> usize {
        self.ring.position(id).expect("peer is a ring member")
    }

    /// Runs one command from a quiescent state and charges its virtual
    /// duration.
    fn step<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = self.net.horizon();
        for p in &self.peers {
            self.net.advance_to(p.id, start);
        }
        let out = f(self);
        self.metrics.wall_time_ns += self.net.horizon() - start;
        self.net.flush();
        out
    }

    pub fn load_series(&mut self, name: &str, s: &TimeSeries) -> Result<()> {
        self.load_series_with(name, s, self.config.spec)
    }

    /// Cuts `s` into segments, places segment `i` on the successor of
    /// `hash(name#i)`, and has each owner cache and publish its segments.
    pub fn load_series_with(
        &mut self,
        name: &str,
        s: &TimeSeries,
        spec: SegmentSpec,
    ) -> Result<()> {
        spec.validate()?;
        if parse(name).ok() != Some(Expr::base(name)) {
            return Err(Error::Config(format!(
                "{name:?} is not a valid series name"
            )));
        }
        if self.catalog.contains_key(name) {
            return Err(Error::DuplicateSeries(name.into()));
        }
        if s.is_empty() {
            return Err(Error::Config(format!("series {name} is empty")));
        }
        self.step(|sim| {
            let loader = sim.coordinator;
            let mut by_owner: BTreeMap<RingId, Vec<Arc<Segment>>> = BTreeMap::new();
            for seg in segment(s, name, spec)? {
                let route = sim
                    .ring
                    .route(loader, sim.placement_key(name, seg.seg_index))?;
                let tag = format!("{name}#{}", seg.seg_index);
                sim.net.lookup(&mut sim.metrics, loader, &route, &tag);
                sim.net.send(
                    &mut sim.metrics,
                    loader,
                    route.owner,
                    MsgKind::SegData,
                    seg.encoded_len(),
                    || tag.clone(),
                );
                by_owner.entry(route.owner).or_default().push(Arc::new(seg));
            }
            for (owner, segs) in by_owner {
                let i = sim.index_of(owner);
                for seg in &segs {
                    sim.peers[i].disk.insert(seg_key(seg), seg.clone());
                }
                sim.insert_batch(owner, segs)?;
            }
            sim.catalog.insert(
                name.into(),
                BaseInfo {
                    calendar: *s.calendar(),
                    spec,
                },
            );
            Ok(())
        })
    }

    /// Caches `seg` at `peer`, publishing it and unpublishing evictions.
    pub fn cache_insert(&mut self, peer: RingId, seg: Segment) -> Result<Vec<Arc<Segment>>> {
        if self.ring.position(peer).is_none() {
            return Err(Error::Config(format!("{peer} is not a peer")));
        }
        self.step(|sim| sim.insert_batch(peer, vec![Arc::new(seg)]))
    }

    fn insert_batch(&mut self, peer: RingId, segs: Vec<Arc<Segment>>) -> Result<Vec<Arc<Segment>>> {
        let idx = self.index_of(peer);
        let mut inserted: BTreeSet<SegKey> = BTreeSet::new();
        let mut evicted = Vec::new();
        for seg in segs {
            let out = self.peers[idx].cache.insert(seg.clone());
            if out.stored {
                inserted.insert(seg_key(&seg));
            }
            evicted.extend(out.evicted);
        }
        let cache = &self.peers[idx].cache;
        let mut puts: BTreeMap<String, Vec<Locator>> = BTreeMap::new();
        for (name, i) in &inserted {
            if let Some(seg) = cache.get(name, *i) {
                puts.entry(name.clone())
                    .or_default()
                    .push(locator(peer, seg));
            }
        }
        let mut removes: BTreeMap<String, Vec<Locator>> = BTreeMap::new();
        for seg in &evicted {
            if !inserted.contains(&seg_key(seg)) {
                removes
                    .entry(seg.series_name.clone())
                    .or_default()
                    .push(locator(peer, seg));
            }
        }
        for (name, locs) in puts {
            let route = self.ring.put(peer, &name, &locs)?;
            let key = dht_key(&name);
            let size = key.len() + 4 + LOCATOR_BYTES * locs.len();
            let tag = format!("{key} +{}", locs.len());
            self.net.dht_op(
                &mut self.metrics,
                peer,
                &route,
                (MsgKind::Put, size),
                (MsgKind::Ack, 8),
                &tag,
            );
        }
        for (name, locs) in removes {
            let route = self.ring.remove(peer, &name, &locs)?;
            let key = dht_key(&name);
            let size = key.len() + 4 + LOCATOR_BYTES * locs.len();
            let tag = format!("{key} -{}", locs.len());
            self.net.dht_op(
                &mut self.metrics,
                peer,
                &route,
                (MsgKind::Remove, size),
                (MsgKind::Ack, 8),
                &tag,
            );
        }
        Ok(evicted)
    }

    /// Plans and executes `expr` over `[from, to]` (defaults: the whole
    /// series) from the coordinator.
    pub fn query(
        &mut self,
        expr: &Expr,
        from: Option<Timestamp>,
        to: Option<Timestamp>,
    ) -> Result<QueryOutcome> {
        let before = self.metrics;
        let coordinator = self.coordinator;
        let series = self.step(|sim| {
            let plan = sim.plan_inner(coordinator, expr, from, to)?;
            sim.execute_inner(&plan)
        })?;
        Ok(QueryOutcome {
            name: canonicalize(expr).to_string(),
            series,
            metrics: self.metrics.since(&before),
        })
    }

    pub fn plan(
        &mut self,
        coordinator: RingId,
        expr: &Expr,
        from: Option<Timestamp>,
        to: Option<Timestamp>,
    ) -> Result<QueryPlan> {
        if self.ring.position(coordinator).is_none() {
            return Err(Error::Config(format!("{coordinator} is not a peer")));
        }
        self.step(|sim| sim.plan_inner(coordinator, expr, from, to))
    }

    pub fn execute(&mut self, plan: &QueryPlan) -> Result<TimeSeries> {
        self.step(|sim| sim.execute_inner(plan))
    }

    fn base_info(&self, expr: &Expr) -> Result<BaseInfo> {
        let mut info: Option<(String, BaseInfo)> = None;
        for name in expr.base_names() {
            let bi = *self
                .catalog
                .get(&name)
                .ok_or_else(|| Error::UnknownSeries(name.clone()))?;
            match &info {
                None => info = Some((name, bi)),
                Some((first, fi)) => {
                    if fi.calendar != bi.calendar {
                        return Err(Error::CalendarMismatch(format!("{first} vs {name}")));
                    }
                    if fi.spec != bi.spec {
                        return Err(Error::SpecMismatch(format!("{first} vs {name}")));
                    }
                }
            }
        }
        Ok(info.expect("every expression has a base leaf").1)
    }

    fn plan_inner(
        &mut self,
        coord: RingId,
        expr: &Expr,
        from: Option<Timestamp>,
        to: Option<Timestamp>,
    ) -> Result<QueryPlan> {
        let target = canonicalize(expr);
        let BaseInfo {
            calendar: cal,
            spec,
        } = self.base_info(&target)?;
        let first = from.map(|t| cal.index(t)).transpose()?.unwrap_or(0);
        let last = to.map(|t| cal.index(t)).transpose()?.unwrap_or(cal.len - 1);
        if first > last {
            return Err(Error::Config("query interval ends before it starts".into()));
        }
        let interval = IndexInterval::new(first, last);
        let padded = spec.segment_count(cal.len) as usize * spec.core_len;

        let mut nodes = Vec::new();
        add_node(&target, spec.halo, &mut nodes, &mut BTreeMap::new());
        let mut needed: Vec<BTreeSet<u64>> = vec![BTreeSet::new(); nodes.len()];
        needed[nodes.len() - 1] = interval.segments(spec).collect();
        let mut pinned = BTreeMap::new();

        for k in (0..nodes.len()).rev() {
            let want = core::mem::take(&mut needed[k]);
            if want.is_empty() {
                continue;
            }
            let name = nodes[k].name.clone();
            let (locs, route) = self.ring.get(coord, &name)?;
            let key = dht_key(&name);
            self.net.dht_op(
                &mut self.metrics,
                coord,
                &route,
                (MsgKind::Get, key.len() + 4),
                (MsgKind::GetResp, 4 + LOCATOR_BYTES * locs.len()),
                &key,
            );
            let mut holders: BTreeMap<u64, RingId> = BTreeMap::new();
            for loc in &locs {
                if let Some(i) = seg_of_locator(&cal, spec, loc).filter(|i| want.contains(i)) {
                    let h = holders.entry(i).or_insert(loc.peer);
                    if loc.peer == coord {
                        *h = coord;
                    }
                }
            }
            let mut tasks = Vec::with_capacity(want.len());
            let mut missing = Vec::new();
            for &i in &want {
                match holders.get(&i) {
                    Some(&p) => {
                        let seg = self.peers[self.index_of(p)]
                            .cache
                            .get(&name, i)
                            .cloned()
                            .ok_or_else(|| {
                                Error::Incoherent(format!("{p} advertises {name}#{i}"))
                            })?;
                        pinned.insert((k, i), (p, seg));
                        self.metrics.cache_hits += 1;
                        tasks.push(Task {
                            seg_index: i,
                            source: Source::CacheHit(p),
                        });
                    }
                    None => {
                        self.metrics.cache_misses += 1;
                        missing.push(i);
                    }
                }
            }
            let node = &nodes[k];
            if node.expr.is_base() {
                for &i in &missing {
                    let route = self.ring.route(coord, self.placement_key(&name, i))?;
                    self.net
                        .lookup(&mut self.metrics, coord, &route, &format!("{name}#{i}"));
                    tasks.push(Task {
                        seg_index: i,
                        source: Source::FetchBase(route.owner),
                    });
                }
            } else {
                for &i in &missing {
                    tasks.push(Task {
                        seg_index: i,
                        source: Source::ComputeFrom(node.children.clone()),
                    });
                }
                let child_segs: BTreeSet<u64> = if node.fallback {
                    runs(&missing)
                        .into_iter()
                        .flat_map(|(a, b)| {
                            let r = fallback_range(spec, a, b, node.lookback, padded);
                            spec.segment_of(r.gstart)..=spec.segment_of(r.ghi)
                        })
                        .collect()
                } else {
                    missing.iter().copied().collect()
                };
                for &c in &node.children {
                    needed[c].extend(child_segs.iter().copied());
                }
            }
            tasks.sort_by_key(|t| t.seg_index);
            nodes[k].tasks = tasks;
        }

        Ok(QueryPlan {
            target,
            coordinator: coord,
            interval,
            calendar: cal,
            spec,
            nodes,
            pinned,
        })
    }

    /// Moves segments to `to`: one SEG_FETCH per remote holder, then one
    /// SEG_DATA per segment.
    fn ship(
        &mut self,
        to: RingId,
        name: &str,
        held: &Held,
        segs: impl IntoIterator<Item = u64>,
    ) -> Result<BTreeMap<u64, Arc<Segment>>> {
        let mut by_holder: BTreeMap<RingId, Vec<u64>> = BTreeMap::new();
        let mut out = BTreeMap::new();
        for i in segs {
            let (p, seg) = held.get(&i).ok_or_else(|| Error::Gap(vec![i]))?;
            by_holder.entry(*p).or_default().push(i);
            out.insert(i, seg.clone());
        }
        for (p, idx) in by_holder {
            if p == to {
                continue;
            }
            self.net.send(
                &mut self.metrics,
                to,
                p,
                MsgKind::SegFetch,
                name.len() + 4 + 8 * idx.len(),
                || format!("{name} n={}", idx.len()),
            );
            for i in idx {
                self.metrics.segments_fetched += 1;
                let bytes = out[&i].encoded_len();
                self.net
                    .send(&mut self.metrics, p, to, MsgKind::SegData, bytes, || {
                        format!("{name}#{i}")
                    });
            }
        }
        Ok(out)
    }

    fn execute_inner(&mut self, plan: &QueryPlan) -> Result<TimeSeries> {
        let mut held: Vec<Held> = vec![BTreeMap::new(); plan.nodes.len()];
        for (&(k, i), (p, seg)) in &plan.pinned {
            held[k].insert(i, (*p, seg.clone()));
        }
        for (k, node) in plan.nodes.iter().enumerate() {
            let mut reads: BTreeMap<RingId, Vec<Arc<Segment>>> = BTreeMap::new();
            for task in &node.tasks {
                if let Source::FetchBase(owner) = task.source {
                    let seg = self.peers[self.index_of(owner)]
                        .disk
                        .get(&(node.name.clone(), task.seg_index))
                        .cloned()
                        .ok_or_else(|| Error::Gap(vec![task.seg_index]))?;
                    held[k].insert(task.seg_index, (owner, seg.clone()));
                    reads.entry(owner).or_default().push(seg);
                }
            }
            for (owner, segs) in reads {
                self.insert_batch(owner, segs)?;
            }
            let todo: Vec<u64> = node.computed().collect();
            if todo.is_empty() {
                continue;
            }
            let results = if node.fallback {
                self.run_fallback(plan, k, &todo, &held)?
            } else {
                self.run_local(plan, k, &todo, &held)?
            };
            for (p, seg) in results {
                held[k].insert(seg.seg_index, (p, seg));
            }
        }
        let root = plan.nodes.len() - 1;
        let segs = self.ship(
            plan.coordinator,
            &plan.root().name,
            &held[root],
            plan.interval.segments(plan.spec),
        )?;
        let segs: Vec<Segment> = segs.into_values().map(|s| (*s).clone()).collect();
        assemble(&segs, plan.interval)
    }

    /// Computes segments where the first input lives, shipping the other
    /// inputs there.
    fn run_local(
        &mut self,
        plan: &QueryPlan,
        k: usize,
        todo: &[u64],
        held: &[Held],
    ) -> Result<Vec<(RingId, Arc<Segment>)>> {
        let node = &plan.nodes[k];
        let mut groups: BTreeMap<RingId, Vec<u64>> = BTreeMap::new();
        for &i in todo {
            let (p, _) = held[node.children[0]]
                .get(&i)
                .ok_or_else(|| Error::Gap(vec![i]))?;
            groups.entry(*p).or_default().push(i);
        }
        let mut results = Vec::with_capacity(todo.len());
        for (q, segs) in groups {
            self.net.send(
                &mut self.metrics,
                plan.coordinator,
                q,
                MsgKind::Compute,
                node.name.len() + 4 + 8 * segs.len(),
                || format!("{} n={}", node.name, segs.len()),
            );
            let mut inputs = Vec::with_capacity(node.children.len());
            for &c in &node.children {
                inputs.push(self.ship(q, &plan.nodes[c].name, &held[c], segs.iter().copied())?);
            }
            let mut made = Vec::with_capacity(segs.len());
            for &i in &segs {
                let bufs: Vec<&[TsValue]> =
                    inputs.iter().map(|m| m[&i].values.as_slice()).collect();
                let first = &inputs[0][&i];
                let values = eval_buffers(&node.expr, &bufs, first.origin())?;
                self.net.work(q, first.values.len() * bufs.len());
                self.metrics.segments_computed += 1;
                let seg = Arc::new(first.derive(node.name.clone(), values));
                made.push(seg.clone());
                results.push((q, seg));
            }
            self.insert_batch(q, made)?;
        }
        Ok(results)
    }

    /// Evaluates a node whose lookback outgrows the halo at the
    /// coordinator, over the assembled input range of each run of segments.
    fn run_fallback(
        &mut self,
        plan: &QueryPlan,
        k: usize,
        todo: &[u64],
        held: &[Held],
    ) -> Result<Vec<(RingId, Arc<Segment>)>> {
        let node = &plan.nodes[k];
        let (spec, cal, coord) = (plan.spec, plan.calendar, plan.coordinator);
        let padded = spec.segment_count(cal.len) as usize * spec.core_len;
        let ranges: Vec<(u64, u64, FallbackRange)> = runs(todo)
            .into_iter()
            .map(|(a, b)| (a, b, fallback_range(spec, a, b, node.lookback, padded)))
            .collect();
        let child_segs: BTreeSet<u64> = ranges
            .iter()
            .flat_map(|(_, _, r)| spec.segment_of(r.gstart)..=spec.segment_of(r.ghi))
            .collect();
        let mut inputs = Vec::with_capacity(node.children.len());
        for &c in &node.children {
            inputs.push(self.ship(
                coord,
                &plan.nodes[c].name,
                &held[c],
                child_segs.iter().copied(),
            )?);
        }
        let mut made = Vec::new();
        for (a, b, r) in ranges {
            let bufs: Vec<Vec<TsValue>> = inputs
                .iter()
                .map(|m| {
                    (r.gstart..=r.ghi)
                        .map(|g| m[&spec.segment_of(g)].core()[g % spec.core_len])
                        .collect()
                })
                .collect();
            let refs: Vec<&[TsValue]> = bufs.iter().map(Vec::as_slice).collect();
            let out = eval_buffers(&node.expr, &refs, (r.gstart == 0).then_some(0))?;
            self.net.work(coord, out.len() * refs.len());
            self.metrics.fallback_evals += 1;
            for i in a..=b {
                let first = spec.core_start(i) - spec.halo as i64;
                let values = (first..first + spec.total_len() as i64)
                    .map(|g| {
                        if g >= r.gstart as i64 && g <= r.ghi as i64 {
                            out[g as usize - r.gstart]
                        } else {
                            TsValue::Unknown
                        }
                    })
                    .collect();
                debug_assert!(first >= r.lo);
                self.metrics.segments_computed += 1;
                made.push(Arc::new(Segment {
                    series_name: node.name.clone(),
                    seg_index: i,
                    spec,
                    start: cal.time_at(first),
                    granularity: cal.granularity,
                    values,
                }));
            }
        }
        self.insert_batch(coord, made.clone())?;
        Ok(made.into_iter().map(|s| (coord, s)).collect())
    }

    /// Checks that DHT locators and cached segments correspond one to one.
    pub fn check_coherence(&self) -> Result<()> {
        let mut dht: Vec<(String, Locator)> = self
            .ring
            .all_entries()
            .map(|(k, l)| (String::from(k), *l))
            .collect();
        let mut cached: Vec<(String, Locator)> = self
            .peers
            .iter()
            .flat_map(|p| {
                p.cache
                    .segments()
                    .map(move |s| (dht_key(&s.series_name), locator(p.id, s)))
            })
            .collect();
        dht.sort();
        cached.sort();
        if dht == cached {
            return Ok(());
        }
        let dht_set: BTreeSet<_> = dht.iter().collect();
        let cached_set: BTreeSet<_> = cached.iter().collect();
        if let Some((k, l)) = dht_set.difference(&cached_set).next() {
            return Err(Error::Incoherent(format!(
                "stale locator {k} at {}",
                l.peer
            )));
        }
        if let Some((k, l)) = cached_set.difference(&dht_set).next() {
            return Err(Error::Incoherent(format!(
                "unpublished segment {k} at {}",
                l.peer
            )));
        }
        Err(Error::Incoherent("duplicate locators".into()))
    }
}

/// One workload step.
#[derive(Debug, Clone)]
pub enum Command {
    Load {
        name: String,
        series: TimeSeries,
        spec: Option<SegmentSpec>,
    },
    Query {
        expr: Expr,
        from: Option<Timestamp>,
        to: Option<Timestamp>,
    },
    /// Snapshot of the cumulative counters.
    Stats,
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub metrics: Metrics,
    pub trace_digest: String,
    pub outcomes: Vec<QueryOutcome>,
    pub stats: Vec<Metrics>,
    pub trace: Option<Vec<String>>,
}

/// Runs a workload on a fresh network. Identical inputs give identical
/// reports, trace included.
pub fn run_simulation(
    config: SimConfig,
    commands: impl IntoIterator<Item = Command>,
) -> Result<SimReport> {
    let mut sim = Simulation::new(config)?;
    let mut outcomes = Vec::new();
    let mut stats = Vec::new();
    for cmd in commands {
        match cmd {
            Command::Load { name, series, spec } => {
                let spec = spec.unwrap_or(sim.config.spec);
                sim.load_series_with(&name, &series, spec)?
            }
            Command::Query { expr, from, to } => outcomes.push(sim.query(&expr, from, to)?),
            Command::Stats => stats.push(sim.metrics()),
        }
    }
    Ok(SimReport {
        metrics: sim.metrics(),
        trace_digest: sim.trace_digest(),
        outcomes,
        stats,
        trace: sim.trace_lines().map(<[String]>::to_vec),
    })
}
