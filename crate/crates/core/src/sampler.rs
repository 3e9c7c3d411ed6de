//! Adversarial edge insertion: draw timestamps from a KDE fitted to the
//! visible stream and reconnect nodes that lost edges, subject to
//! activity, novelty and per-node capacity constraints.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DegreeLedger, Direction, NodeId, Side, TemporalEdge, TemporalGraph};
use crate::sparsify::RemovalPlan;

/// Gaussian kernel density estimate over timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    data: Vec<f64>,
    bandwidth: f64,
    min: f64,
    max: f64,
}

/// Fits a Gaussian KDE with Scott's bandwidth `n^(-1/5) · σ`.
pub fn fit_kde(samples: &[f64]) -> Result<KdeModel> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("KDE samples must be finite".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = (1e-6 * (max - min)).max(1e-9);
    let bandwidth = (n.powf(-0.2) * var.sqrt()).max(floor);
    Ok(KdeModel {
        data: samples.to_vec(),
        bandwidth,
        min,
        max,
    })
}

impl KdeModel {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn support(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (self.data.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        norm * self
            .data
            .iter()
            .map(|d| (-0.5 * ((x - d) / h).powi(2)).exp())
            .sum::<f64>()
    }

    /// One draw, clamped to the observed range.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let center = self.data[rng.random_range(0..self.data.len())];
        let noise = Normal::new(0.0, self.bandwidth).expect("bandwidth is positive");
        (center + noise.sample(rng)).clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    /// Activity window `W` in timestamp units.
    pub window: f64,
    /// Maximum net degree gain `C` per node and direction.
    pub node_capacity: u32,
    /// Recovery rounds after the main pass.
    pub max_attempts: usize,
    /// Timestamp draws per insertion slot.
    pub draws_per_slot: usize,
    pub seed: u64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            window: 1800.0,
            node_capacity: 1,
            max_attempts: 5,
            draws_per_slot: 64,
            seed: 0,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0) {
            return Err(Error::InvalidParameter(format!("window must be positive, got {}", self.window)));
        }
        if self.draws_per_slot == 0 {
            return Err(Error::InvalidParameter("draws_per_slot must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsertedEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub timestamp: f64,
    /// Training-stream index of the removed edge this insertion offsets.
    pub compensates: usize,
    /// 0 for the main pass, `r` for recovery round `r`.
    pub round: usize,
    pub recovery: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionPlan {
    pub inserted: Vec<InsertedEdge>,
    pub budget: usize,
    pub window: f64,
    pub node_capacity: u32,
}

impl InsertionPlan {
    pub fn len(&self) -> usize {
        self.inserted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inserted.is_empty()
    }

    pub fn recovery_rounds(&self) -> usize {
        self.inserted.iter().map(|e| e.round).max().unwrap_or(0)
    }
}

/// Why timestamp draws failed to produce an insertion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarvationDiagnosis {
    /// The node needing an edge had no activity in the window.
    pub inactive_draws: usize,
    /// No other node was active in the window.
    pub empty_pools: usize,
    /// Active nodes existed but none on the required side.
    pub partition_exhausted: usize,
    /// Every remaining candidate was already connected.
    pub novelty_exhausted: usize,
    /// Every novel candidate was at capacity.
    pub capacity_exhausted: usize,
    /// The drawn timestamp fell in a time bin that already holds its share
    /// of insertions.
    pub quota_full: usize,
}

impl StarvationDiagnosis {
    pub fn total(&self) -> usize {
        self.inactive_draws
            + self.empty_pools
            + self.partition_exhausted
            + self.novelty_exhausted
            + self.capacity_exhausted
            + self.quota_full
    }

    pub fn dominant(&self) -> &'static str {
        [
            (self.inactive_draws, "inactive"),
            (self.empty_pools, "empty-pool"),
            (self.partition_exhausted, "partition"),
            (self.novelty_exhausted, "novelty"),
            (self.capacity_exhausted, "capacity"),
            (self.quota_full, "time-quota"),
        ]
        .into_iter()
        .rev()
        .max_by_key(|(n, _)| *n)
        .map(|(_, name)| name)
        .unwrap_or("none")
    }
}

impl fmt::Display for StarvationDiagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mostly {} (inactive {}, empty pool {}, partition {}, novelty {}, capacity {}, time quota {})",
            self.dominant(),
            self.inactive_draws,
            self.empty_pools,
            self.partition_exhausted,
            self.novelty_exhausted,
            self.capacity_exhausted,
            self.quota_full
        )
    }
}

/// Caps the number of insertions per quantile bin of the visible
/// timestamps at the bin's share of the budget, so that accepted
/// timestamps keep the stream's distribution even though acceptance
/// depends on node activity. Recovery round `r` widens every cap by
/// `10·r` percent.
#[derive(Debug, Clone)]
struct TimeQuota {
    /// Lower edges of bins `1..`; bin 0 starts at the sample minimum.
    edges: Vec<f64>,
    share: Vec<f64>,
    used: Vec<usize>,
    budget: usize,
}

const QUOTA_BINS: usize = 20;

impl TimeQuota {
    fn new(sample: &[f64], budget: usize) -> Self {
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut edges: Vec<f64> = (1..QUOTA_BINS).map(|i| sorted[(i * n / QUOTA_BINS).min(n - 1)]).collect();
        edges.dedup();
        let mut quota = Self {
            share: vec![0.0; edges.len() + 1],
            used: vec![0; edges.len() + 1],
            edges,
            budget,
        };
        for &t in &sorted {
            let b = quota.bin(t);
            quota.share[b] += 1.0 / n as f64;
        }
        quota
    }

    fn bin(&self, t: f64) -> usize {
        self.edges.partition_point(|&e| e <= t)
    }

    fn admits(&self, t: f64, round: usize) -> bool {
        let b = self.bin(t);
        let cap = (self.budget as f64 * self.share[b] * (1.0 + 0.1 * round as f64)).ceil() as usize;
        self.used[b] < cap
    }

    fn record(&mut self, t: f64) {
        let b = self.bin(t);
        self.used[b] += 1;
    }
}

/// Filter stage at which a candidate pool ran dry, in filter order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Starved {
    EmptyPool,
    Partition,
    Novelty,
    Capacity,
}

#[derive(Clone, Copy)]
struct Span {
    first: f64,
    last: f64,
    max_gap: f64,
}

impl Span {
    fn of(times: &[f64]) -> Self {
        match (times.first(), times.last()) {
            (Some(&first), Some(&last)) => Span {
                first,
                last,
                max_gap: times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max),
            },
            _ => Span {
                first: f64::INFINITY,
                last: f64::NEG_INFINITY,
                max_gap: 0.0,
            },
        }
    }
}

struct Selector<'a> {
    graph: &'a TemporalGraph,
    params: &'a SamplerParams,
    kde: KdeModel,
    /// Visible edges in stream order.
    visible: &'a [TemporalEdge],
    /// Sorted timestamps of visible edges per node.
    node_times: Vec<Vec<f64>>,
    /// First time, last time and largest gap of each `node_times` entry.
    spans: Vec<Span>,
    quota: TimeQuota,
    /// Distinct partners per node, in either direction.
    neighbours: Vec<Vec<NodeId>>,
    known: Vec<u32>,
    known_counter: u32,
    ledger: DegreeLedger,
    outstanding_out: Vec<VecDeque<usize>>,
    outstanding_in: Vec<VecDeque<usize>>,
    outstanding: BTreeSet<usize>,
    stamp: Vec<u32>,
    stamp_counter: u32,
    diagnosis: StarvationDiagnosis,
    inserted: Vec<InsertedEdge>,
    budget: usize,
    /// Insertions still owed to nodes more than `C` below their original
    /// out-degree and in-degree, summed over nodes.
    excess_out: i64,
    excess_in: i64,
}

impl<'a> Selector<'a> {
    fn required_side(&self, dir: Direction) -> Option<Side> {
        if !self.graph.is_bipartite() {
            return None;
        }
        // The partner takes the other end of the edge.
        Some(match dir {
            Direction::Out => Side::Target,
            Direction::In => Side::Source,
        })
    }

    fn own_side_ok(&self, v: NodeId, dir: Direction) -> bool {
        match self.required_side(dir.opposite()) {
            None => true,
            Some(side) => self.graph.nodes().side(v) == side,
        }
    }

    fn active(&self, v: NodeId, t: f64) -> bool {
        let span = self.spans[v as usize];
        let w = self.params.window;
        if !(t >= span.first && t <= span.last + w) {
            return false;
        }
        // No gap wider than the window: some edge lies within `w` before `t`.
        if span.max_gap <= w {
            return true;
        }
        self.last_activity(v, t).is_some_and(|x| x >= t - w)
    }

    fn last_activity(&self, v: NodeId, t: f64) -> Option<f64> {
        let times = &self.node_times[v as usize];
        let pos = times.partition_point(|&x| x <= t);
        pos.checked_sub(1).map(|i| times[i])
    }

    /// Nodes with an edge in `[t − W, t]`, from whichever is shorter: the
    /// window's edges or the node list.
    fn window_nodes(&mut self, t: f64) -> Vec<NodeId> {
        let lo = self.visible.partition_point(|e| e.timestamp < t - self.params.window);
        let hi = self.visible.partition_point(|e| e.timestamp <= t);
        if 2 * (hi - lo) >= self.node_times.len() {
            return (0..self.node_times.len() as NodeId).filter(|&n| self.active(n, t)).collect();
        }
        self.stamp_counter += 1;
        let mut out = Vec::new();
        for e in &self.visible[lo..hi] {
            for n in [e.source, e.target] {
                if self.stamp[n as usize] != self.stamp_counter {
                    self.stamp[n as usize] = self.stamp_counter;
                    out.push(n);
                }
            }
        }
        out
    }

    /// Partners for an edge at `v` in direction `dir` at time `t`, or the
    /// first filter that left nobody. Expects `v`'s neighbours to be
    /// marked.
    fn partners(&mut self, v: NodeId, dir: Direction, t: f64, floor: i64, strict: bool) -> std::result::Result<Vec<NodeId>, Starved> {
        let side = self.required_side(dir);
        let opp = dir.opposite();
        let side_ok = |s: &Self, n: NodeId| side.is_none_or(|side| s.graph.nodes().side(n) == side);
        let pool: Vec<NodeId> = (0..self.node_times.len() as NodeId)
            .filter(|&n| n != v && self.ledger.net(n, opp) < floor && side_ok(self, n) && self.is_novel(n) && self.active(n, t))
            .collect();
        if !pool.is_empty() {
            return Ok(pool);
        }
        if strict {
            return Err(Starved::Capacity);
        }
        // Rerun the filters in order to name the one that emptied the pool.
        let mut stage = Starved::EmptyPool;
        let mut pool = Vec::new();
        for n in self.window_nodes(t) {
            if n == v {
                continue;
            }
            stage = stage.max(Starved::Partition);
            if !side_ok(self, n) {
                continue;
            }
            stage = stage.max(Starved::Novelty);
            if !self.is_novel(n) {
                continue;
            }
            stage = stage.max(Starved::Capacity);
            if self.ledger.net(n, opp) < floor {
                pool.push(n);
            }
        }
        if pool.is_empty() {
            Err(stage)
        } else {
            Ok(pool)
        }
    }

    fn mark_neighbours(&mut self, v: NodeId) {
        self.known_counter += 1;
        for &n in &self.neighbours[v as usize] {
            self.known[n as usize] = self.known_counter;
        }
    }

    /// Whether `n` is not a neighbour of the node last marked.
    fn is_novel(&self, n: NodeId) -> bool {
        self.known[n as usize] != self.known_counter
    }

    /// Tries to add one edge at `v` in direction `dir`. In strict mode
    /// only partners that still miss an edge in the opposite direction
    /// qualify, and failures are not counted as starvation.
    fn place_one(&mut self, v: NodeId, dir: Direction, round: usize, strict: bool, rng: &mut ChaCha8Rng) -> bool {
        let capacity = self.params.node_capacity as i64;
        if self.ledger.net(v, dir) >= capacity || !self.own_side_ok(v, dir) {
            return false;
        }
        let opp = dir.opposite();
        self.mark_neighbours(v);
        let mut diag = StarvationDiagnosis::default();
        let mut placed = false;
        for _ in 0..self.params.draws_per_slot {
            let t = self.kde.sample(rng);
            if !self.quota.admits(t, round) {
                diag.quota_full += 1;
                continue;
            }
            if !self.active(v, t) {
                diag.inactive_draws += 1;
                continue;
            }
            let floor = if strict { 0 } else { capacity };
            let pool = match self.partners(v, dir, t, floor, strict) {
                Ok(pool) => pool,
                Err(Starved::EmptyPool) => {
                    diag.empty_pools += 1;
                    continue;
                }
                Err(Starved::Partition) => {
                    diag.partition_exhausted += 1;
                    continue;
                }
                Err(Starved::Novelty) => {
                    diag.novelty_exhausted += 1;
                    continue;
                }
                Err(Starved::Capacity) => {
                    diag.capacity_exhausted += 1;
                    continue;
                }
            };
            let partner = self.select_best(&pool, opp, t);
            let (source, target) = match dir {
                Direction::Out => (v, partner),
                Direction::In => (partner, v),
            };
            if !self.keeps_reserve(source, target) {
                diag.capacity_exhausted += 1;
                continue;
            }
            self.commit(v, partner, dir, t, round);
            placed = true;
            break;
        }
        if !strict {
            self.diagnosis.inactive_draws += diag.inactive_draws;
            self.diagnosis.empty_pools += diag.empty_pools;
            self.diagnosis.partition_exhausted += diag.partition_exhausted;
            self.diagnosis.novelty_exhausted += diag.novelty_exhausted;
            self.diagnosis.capacity_exhausted += diag.capacity_exhausted;
            self.diagnosis.quota_full += diag.quota_full;
        }
        placed
    }

    /// The partner furthest below its original degree in direction `opp`
    /// first, then the one idle longest before `t`, then the lowest id.
    fn select_best(&self, pool: &[NodeId], opp: Direction, t: f64) -> NodeId {
        let idle = |n: NodeId| t - self.last_activity(n, t).unwrap_or(f64::NEG_INFINITY);
        let mut best = pool[0];
        let mut best_net = self.ledger.net(best, opp);
        let mut best_idle: Option<f64> = None;
        for &n in &pool[1..] {
            let net = self.ledger.net(n, opp);
            if net > best_net {
                continue;
            }
            if net < best_net {
                best = n;
                best_net = net;
                best_idle = None;
                continue;
            }
            let current = *best_idle.get_or_insert_with(|| idle(best));
            let candidate = idle(n);
            if candidate > current || (candidate == current && n < best) {
                best = n;
                best_idle = Some(candidate);
            }
        }
        best
    }

    fn over_capacity(&self, v: NodeId, dir: Direction) -> bool {
        self.ledger.net(v, dir) < -(self.params.node_capacity as i64)
    }

    /// Whether the budget left after inserting `(source, target)` still
    /// covers every node that sits more than `C` below its original degree.
    fn keeps_reserve(&self, source: NodeId, target: NodeId) -> bool {
        let left = (self.budget - self.inserted.len()) as i64 - 1;
        let out = self.excess_out - i64::from(self.over_capacity(source, Direction::Out));
        let inn = self.excess_in - i64::from(self.over_capacity(target, Direction::In));
        out <= left && inn <= left
    }

    fn pop_outstanding(&mut self, queue_owner: NodeId, dir: Direction) -> Option<usize> {
        let queue = match dir {
            Direction::Out => &mut self.outstanding_out[queue_owner as usize],
            Direction::In => &mut self.outstanding_in[queue_owner as usize],
        };
        while let Some(idx) = queue.pop_front() {
            if self.outstanding.contains(&idx) {
                return Some(idx);
            }
        }
        None
    }

    fn commit(&mut self, v: NodeId, partner: NodeId, dir: Direction, t: f64, round: usize) {
        let (source, target) = match dir {
            Direction::Out => (v, partner),
            Direction::In => (partner, v),
        };
        let compensates = self
            .pop_outstanding(v, dir)
            .or_else(|| self.pop_outstanding(partner, dir.opposite()))
            .or_else(|| self.outstanding.first().copied())
            .expect("insertions never exceed removals");
        self.outstanding.remove(&compensates);
        self.excess_out -= i64::from(self.over_capacity(source, Direction::Out));
        self.excess_in -= i64::from(self.over_capacity(target, Direction::In));
        self.ledger.record_insertion(source, target);
        self.quota.record(t);
        self.neighbours[source as usize].push(target);
        self.neighbours[target as usize].push(source);
        self.inserted.push(InsertedEdge {
            source,
            target,
            timestamp: t,
            compensates,
            round,
            recovery: round > 0,
        });
    }

    fn done(&self) -> bool {
        self.inserted.len() >= self.budget
    }

    /// Both directions, the one further below its original degree first.
    fn neediest_first(&self, v: NodeId) -> [Direction; 2] {
        if self.ledger.net(v, Direction::In) < self.ledger.net(v, Direction::Out) {
            [Direction::In, Direction::Out]
        } else {
            [Direction::Out, Direction::In]
        }
    }

    fn deficit_order(&self) -> Vec<NodeId> {
        let mut nodes: Vec<NodeId> = self
            .ledger
            .iter()
            .filter(|(_, b)| b.deletions() > 0)
            .map(|(v, _)| v)
            .collect();
        nodes.sort_by(|&a, &b| {
            let (ba, bb) = (self.ledger.get(a), self.ledger.get(b));
            bb.deletions()
                .cmp(&ba.deletions())
                .then(bb.original_degree().cmp(&ba.original_degree()))
                .then(a.cmp(&b))
        });
        nodes
    }

    /// One sweep over nodes with deletions, raising each node's net degree
    /// to `goal`. The strict sweep pairs deficits with deficits; the
    /// relaxed sweep accepts any partner with spare capacity.
    fn main_pass(&mut self, goal: i64, strict: bool, rng: &mut ChaCha8Rng) {
        for v in self.deficit_order() {
            for dir in self.neediest_first(v) {
                while !self.done() && self.ledger.net(v, dir) < goal {
                    if !self.place_one(v, dir, 0, strict, rng) {
                        break;
                    }
                }
            }
            if self.done() {
                return;
            }
        }
    }

    fn recovery_round(&mut self, round: usize, rng: &mut ChaCha8Rng) {
        let capacity = self.params.node_capacity as i64;
        let mut candidates = self.deficit_order();
        let mut in_list = vec![false; self.ledger.len()];
        for &v in &candidates {
            in_list[v as usize] = true;
        }
        let mut rest: Vec<NodeId> = self
            .ledger
            .iter()
            .filter(|(v, b)| !in_list[*v as usize] && b.original_degree() > 0)
            .map(|(v, _)| v)
            .collect();
        rest.sort_by(|&a, &b| {
            self.ledger
                .get(b)
                .original_degree()
                .cmp(&self.ledger.get(a).original_degree())
                .then(a.cmp(&b))
        });
        candidates.extend(rest);
        for v in candidates {
            for dir in self.neediest_first(v) {
                while !self.done() && self.ledger.net(v, dir) < capacity {
                    if !self.place_one(v, dir, round, false, rng) {
                        break;
                    }
                }
                if self.done() {
                    return;
                }
            }
        }
    }
}

/// Places `|removed|` new edges on the visible training prefix.
pub fn timestamp_selector(train: &TemporalGraph, removal: &RemovalPlan, params: &SamplerParams) -> Result<InsertionPlan> {
    params.validate()?;
    let visible = removal.visible.min(train.edge_count());
    let mut removed_flag = vec![false; visible];
    for r in &removal.removed {
        if r.index >= visible {
            return Err(Error::PlanMismatch(format!("removed index {} outside visible prefix {visible}", r.index)));
        }
        if std::mem::replace(&mut removed_flag[r.index], true) {
            return Err(Error::PlanMismatch(format!("edge {} removed twice", r.index)));
        }
    }
    let budget = removal.removed.len();
    let mut plan = InsertionPlan {
        inserted: Vec::new(),
        budget,
        window: params.window,
        node_capacity: params.node_capacity,
    };
    if budget == 0 {
        return Ok(plan);
    }

    let view = &train.edges()[..visible];
    let sample: Vec<f64> = view.iter().map(|e| e.timestamp).collect();
    let kde = fit_kde(&sample)?;
    let n = train.id_space();
    let mut node_times = vec![Vec::new(); n];
    for e in view {
        node_times[e.source as usize].push(e.timestamp);
        node_times[e.target as usize].push(e.timestamp);
    }
    let mut neighbours = vec![Vec::new(); n];
    for e in view {
        neighbours[e.source as usize].push(e.target);
        neighbours[e.target as usize].push(e.source);
    }
    for list in &mut neighbours {
        list.sort_unstable();
        list.dedup();
    }
    let mut ledger = DegreeLedger::from_graph(&train.prefix(visible));
    let mut outstanding_out = vec![VecDeque::new(); n];
    let mut outstanding_in = vec![VecDeque::new(); n];
    let mut sorted_removed: Vec<usize> = removal.removed.iter().map(|r| r.index).collect();
    sorted_removed.sort_unstable();
    for &idx in &sorted_removed {
        let e = &view[idx];
        ledger.record_deletion(e.source, e.target);
        outstanding_out[e.source as usize].push_back(idx);
        outstanding_in[e.target as usize].push_back(idx);
    }

    let capacity = params.node_capacity as i64;
    let excess = |dir: Direction| -> i64 { ledger.iter().map(|(v, _)| (-ledger.net(v, dir) - capacity).max(0)).sum() };
    let (excess_out, excess_in) = (excess(Direction::Out), excess(Direction::In));
    let mut selector = Selector {
        graph: train,
        params,
        kde,
        visible: view,
        spans: node_times.iter().map(|times| Span::of(times)).collect(),
        node_times,
        quota: TimeQuota::new(&sample, budget),
        neighbours,
        known: vec![0; n],
        known_counter: 0,
        ledger,
        outstanding_out,
        outstanding_in,
        outstanding: sorted_removed.into_iter().collect(),
        stamp: vec![0; n],
        stamp_counter: 0,
        diagnosis: StarvationDiagnosis::default(),
        inserted: Vec::with_capacity(budget),
        budget,
        excess_out,
        excess_in,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    // Deficits beyond the capacity must be closed; the rest is best effort.
    for goal in [-capacity, 0] {
        selector.main_pass(goal, true, &mut rng);
        selector.main_pass(goal, false, &mut rng);
    }
    for round in 1..=params.max_attempts {
        if selector.done() {
            break;
        }
        log::info!(
            "recovery round {round}: {}/{} placed",
            selector.inserted.len(),
            budget
        );
        selector.kde = fit_kde(&sample)?;
        let mut round_rng = ChaCha8Rng::seed_from_u64(params.seed);
        round_rng.set_stream(round as u64);
        selector.recovery_round(round, &mut round_rng);
    }

    plan.inserted = selector.inserted;
    if plan.inserted.len() < budget {
        return Err(Error::SamplingInfeasible {
            placed: plan.inserted.len(),
            budget,
            diagnosis: selector.diagnosis,
            partial: Box::new(plan),
        });
    }
    Ok(plan)
}

/// Builds the poisoned training stream: removed edges dropped, inserted
/// edges merged after existing edges with the same timestamp. Inserted
/// edges carry label 0 and zero features.
pub fn insertion_positioning(train: &TemporalGraph, removal: &RemovalPlan, insertion: &InsertionPlan) -> Result<TemporalGraph> {
    let mut removed = vec![false; train.edge_count()];
    for r in &removal.removed {
        match removed.get_mut(r.index) {
            Some(flag) => *flag = true,
            None => return Err(Error::PlanMismatch(format!("removed index {} out of range", r.index))),
        }
    }
    let id_space = train.id_space();
    let mut added: Vec<TemporalEdge> = Vec::with_capacity(insertion.len());
    for ins in &insertion.inserted {
        if ins.source as usize >= id_space || ins.target as usize >= id_space {
            return Err(Error::PlanMismatch(format!("inserted edge ({}, {}) names an unknown node", ins.source, ins.target)));
        }
        if !ins.timestamp.is_finite() {
            return Err(Error::PlanMismatch("inserted timestamp is not finite".into()));
        }
        let mut e = TemporalEdge::new(ins.source, ins.target, ins.timestamp);
        e.features = vec![0.0; train.feature_dim()];
        added.push(e);
    }
    added.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

    let mut out = Vec::with_capacity(train.edge_count() - removal.len() + added.len());
    let mut pending = added.into_iter().peekable();
    for (e, gone) in train.edges().iter().zip(&removed) {
        while pending.peek().is_some_and(|a| a.timestamp < e.timestamp) {
            out.push(pending.next().expect("peeked"));
        }
        if !gone {
            out.push(e.clone());
        }
    }
    out.extend(pending);
    Ok(train.with_edges_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsify::{RemovalPlan, RemovedEdge, SparsifyStrategy, Heuristic};

    fn plan_for(indices: &[usize], visible: usize) -> RemovalPlan {
        let mut plan = RemovalPlan::empty(SparsifyStrategy::heuristic(Heuristic::Degree), 1.0, visible);
        plan.removed = indices
            .iter()
            .enumerate()
            .map(|(rank, &index)| RemovedEdge { index, score: 0.0, rank })
            .collect();
        plan.budget = indices.len();
        plan
    }

    #[test]
    fn recovery_round_rescues_starved_pair() {
        let inst = crate::synthetic::starvation_instance().unwrap();
        let plan = plan_for(&[inst.removed], inst.graph.edge_count());
        let params = SamplerParams { window: inst.window, max_attempts: 0, ..SamplerParams::default() };
        assert!(matches!(
            timestamp_selector(&inst.graph, &plan, &params),
            Err(Error::SamplingInfeasible { .. })
        ));
        let params = SamplerParams { window: inst.window, ..SamplerParams::default() };
        let out = timestamp_selector(&inst.graph, &plan, &params).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out.recovery_rounds() >= 1);
        let e = &out.inserted[0];
        assert!(e.source >= 2 && e.target >= 2);
    }

    #[test]
    fn kde_scott_bandwidth() {
        let data: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let kde = fit_kde(&data).unwrap();
        let mean = 15.5;
        let sd = (data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 31.0).sqrt();
        assert!((kde.bandwidth() - sd * 32f64.powf(-0.2)).abs() < 1e-12);
        let integral: f64 = (-400..800).map(|i| kde.density(i as f64 * 0.1) * 0.1).sum();
        assert!((integral - 1.0).abs() < 1e-3);
    }

    #[test]
    fn kde_single_point_and_empty() {
        let kde = fit_kde(&[5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(kde.sample(&mut rng), 5.0);
        assert!(matches!(fit_kde(&[]), Err(Error::EmptySample)));
    }

    #[test]
    fn draws_stay_in_range() {
        let kde = fit_kde(&[1.0, 2.0, 10.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let t = kde.sample(&mut rng);
            assert!((1.0..=10.0).contains(&t));
        }
    }

    fn ring(n: u64, rounds: u64) -> TemporalGraph {
        let mut triples = Vec::new();
        for r in 0..rounds {
            for i in 0..n {
                triples.push((i, (i + 1 + r) % n, (r * n + i) as f64));
            }
        }
        TemporalGraph::from_triples(&triples).unwrap()
    }

    #[test]
    fn replaces_every_removal_and_keeps_degrees() {
        let g = ring(12, 3);
        let removal = plan_for(&[5, 17, 30], g.edge_count());
        let params = SamplerParams {
            window: 1000.0,
            ..SamplerParams::default()
        };
        let plan = timestamp_selector(&g, &removal, &params).unwrap();
        assert_eq!(plan.len(), 3);
        let poisoned = insertion_positioning(&g, &removal, &plan).unwrap();
        assert_eq!(poisoned.edge_count(), g.edge_count());
        let comp: BTreeSet<usize> = plan.inserted.iter().map(|e| e.compensates).collect();
        assert_eq!(comp, BTreeSet::from([5, 17, 30]));
        for e in &plan.inserted {
            assert_ne!(e.source, e.target);
            let fresh = |o: &TemporalEdge| (o.source, o.target) != (e.source, e.target) && (o.source, o.target) != (e.target, e.source);
            assert!(g.edges().iter().all(fresh));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = ring(10, 4);
        let removal = plan_for(&[1, 2, 3, 20], g.edge_count());
        let params = SamplerParams {
            window: 500.0,
            seed: 42,
            ..SamplerParams::default()
        };
        assert_eq!(
            timestamp_selector(&g, &removal, &params).unwrap(),
            timestamp_selector(&g, &removal, &params).unwrap()
        );
    }

    #[test]
    fn infeasible_on_a_complete_graph() {
        // Two nodes that already interacted: no novel pair exists.
        let g = TemporalGraph::from_triples(&[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        let removal = plan_for(&[1], 3);
        let err = timestamp_selector(&g, &removal, &SamplerParams::default()).unwrap_err();
        match err {
            Error::SamplingInfeasible { placed, budget, diagnosis, .. } => {
                assert_eq!((placed, budget), (0, 1));
                assert_eq!(diagnosis.dominant(), "novelty");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn positioning_merges_after_equal_timestamps() {
        let g = TemporalGraph::from_triples(&[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 2.0), (3, 0, 4.0)]).unwrap();
        let removal = plan_for(&[0], 4);
        let insertion = InsertionPlan {
            inserted: vec![InsertedEdge {
                source: 0,
                target: 2,
                timestamp: 2.0,
                compensates: 0,
                round: 0,
                recovery: false,
            }],
            budget: 1,
            window: 10.0,
            node_capacity: 1,
        };
        let p = insertion_positioning(&g, &removal, &insertion).unwrap();
        let seq: Vec<(u32, u32)> = p.edges().iter().map(|e| (e.source, e.target)).collect();
        assert_eq!(seq, vec![(1, 2), (2, 3), (0, 2), (3, 0)]);
        assert_eq!(p.edges()[2].label, 0);
    }

    #[test]
    fn rejects_bad_plans() {
        let g = ring(5, 1);
        let removal = plan_for(&[1, 1], 5);
        assert!(matches!(
            timestamp_selector(&g, &removal, &SamplerParams::default()),
            Err(Error::PlanMismatch(_))
        ));
        let removal = plan_for(&[9], 5);
        assert!(matches!(
            insertion_positioning(&g, &removal, &InsertionPlan {
                inserted: vec![],
                budget: 0,
                window: 1.0,
                node_capacity: 1
            }),
            Err(Error::PlanMismatch(_))
        ));
    }

    #[test]
    fn diagnosis_dominant() {
        let d = StarvationDiagnosis {
            capacity_exhausted: 4,
            inactive_draws: 2,
            ..Default::default()
        };
        assert_eq!(d.dominant(), "capacity");
        assert_eq!(StarvationDiagnosis::default().dominant(), "inactive");
    }
}
