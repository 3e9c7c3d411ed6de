//! Edge removal: choose exactly Δ edges of the visible training stream,
//! either by per-edge importance scores or by walking timestamps in order
//! of decreasing TPR drift.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::drift::{drift, DriftKind, DriftMetric};
use crate::error::{Error, Result};
use crate::graph::{floor_fraction, NodeId, StaticAggregate, TemporalGraph};
use crate::tpr::{compute_combined_ter, compute_tpr_stream, compute_tpr_stream_raw, SnapshotKind, TprParams, TprTimeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heuristic {
    Degree,
    Jaccard,
    PageRank,
    Preference,
    Random,
}

impl Heuristic {
    pub const ALL: [Heuristic; 5] = [
        Heuristic::Degree,
        Heuristic::Jaccard,
        Heuristic::PageRank,
        Heuristic::Preference,
        Heuristic::Random,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Heuristic::Degree => "Degree",
            Heuristic::Jaccard => "Jaccard",
            Heuristic::PageRank => "PageRank",
            Heuristic::Preference => "Preference",
            Heuristic::Random => "Random",
        }
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Heuristic::ALL
            .into_iter()
            .find(|h| h.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeRankVariant {
    Ter,
    CombinedTer,
}

/// One of the sixteen removal strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum SparsifyStrategy {
    EdgeHeuristic { heuristic: Heuristic, seed: u64 },
    TimestampDrift { metric: DriftMetric },
    EdgeRank { variant: EdgeRankVariant },
}

impl SparsifyStrategy {
    pub fn heuristic(heuristic: Heuristic) -> Self {
        SparsifyStrategy::EdgeHeuristic { heuristic, seed: 0 }
    }

    pub fn drift(kind: DriftKind) -> Self {
        SparsifyStrategy::TimestampDrift {
            metric: DriftMetric::new(kind),
        }
    }

    /// Every registered strategy with default parameters.
    pub fn catalog() -> Vec<SparsifyStrategy> {
        let mut all: Vec<_> = Heuristic::ALL.into_iter().map(Self::heuristic).collect();
        all.push(SparsifyStrategy::EdgeRank {
            variant: EdgeRankVariant::Ter,
        });
        all.push(SparsifyStrategy::EdgeRank {
            variant: EdgeRankVariant::CombinedTer,
        });
        all.extend(DriftKind::ALL.into_iter().map(Self::drift));
        all
    }

    pub fn name(&self) -> String {
        match self {
            SparsifyStrategy::EdgeHeuristic { heuristic, .. } => heuristic.label().to_string(),
            SparsifyStrategy::EdgeRank {
                variant: EdgeRankVariant::Ter,
            } => "TER".to_string(),
            SparsifyStrategy::EdgeRank {
                variant: EdgeRankVariant::CombinedTer,
            } => "Combined-TER".to_string(),
            SparsifyStrategy::TimestampDrift { metric } => format!("TPR-{}", metric.kind.label()),
        }
    }

    /// Parses a catalog name such as `Degree`, `Combined-TER` or
    /// `TPR-Cosine`. `seed` only matters for `Random`.
    pub fn from_name(name: &str, seed: u64) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        if lower == "ter" {
            return Ok(SparsifyStrategy::EdgeRank {
                variant: EdgeRankVariant::Ter,
            });
        }
        if lower == "combined-ter" {
            return Ok(SparsifyStrategy::EdgeRank {
                variant: EdgeRankVariant::CombinedTer,
            });
        }
        if let Some(suffix) = lower.strip_prefix("tpr-") {
            let kind: DriftKind = suffix.parse().map_err(|_| Error::UnknownStrategy(name.to_string()))?;
            return Ok(Self::drift(kind));
        }
        let heuristic: Heuristic = name.parse().map_err(|_| Error::UnknownStrategy(name.to_string()))?;
        Ok(SparsifyStrategy::EdgeHeuristic { heuristic, seed })
    }
}

impl fmt::Display for SparsifyStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Static PageRank settings for the `PageRank` heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankParams {
    pub damping: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for PageRankParams {
    fn default() -> Self {
        Self {
            damping: 0.85,
            max_iterations: 100,
            tolerance: 1e-9,
        }
    }
}

/// What the perturbation rate is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetBase {
    /// `Δ = ⌊p · |E_train|⌋`.
    #[default]
    Training,
    /// `Δ = ⌊p · |visible prefix|⌋`, used for knowledge sweeps.
    Visible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsifyOptions {
    pub tpr: TprParams,
    pub combined_weight: f64,
    pub pagerank: PageRankParams,
    pub budget_base: BudgetBase,
    pub snapshots: SnapshotKind,
}

impl Default for SparsifyOptions {
    fn default() -> Self {
        Self {
            tpr: TprParams::default(),
            combined_weight: 0.5,
            pagerank: PageRankParams::default(),
            budget_base: BudgetBase::Training,
            snapshots: SnapshotKind::Normalized,
        }
    }
}

/// `Δ = ⌊p · edge_count⌋`.
pub fn compute_budget(edge_count: usize, p: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("perturbation rate must be in [0, 1], got {p}")));
    }
    Ok(floor_fraction(p, edge_count))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredEdge {
    /// Position in the scored stream.
    pub index: usize,
    pub score: f64,
}

/// Sorts descending by score; equal scores keep stream order.
fn rank_descending(scores: Vec<f64>) -> Vec<ScoredEdge> {
    let mut ranked: Vec<ScoredEdge> = scores
        .into_iter()
        .enumerate()
        .map(|(index, score)| ScoredEdge { index, score })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    ranked
}

pub fn score_edges(graph: &TemporalGraph, strategy: &SparsifyStrategy) -> Result<Vec<ScoredEdge>> {
    score_edges_with(graph, strategy, &SparsifyOptions::default())
}

/// Per-edge scores ranked best-first. Heuristics are evaluated on the
/// aggregate `G^(j)` of the edge's own timestamp.
pub fn score_edges_with(
    graph: &TemporalGraph,
    strategy: &SparsifyStrategy,
    options: &SparsifyOptions,
) -> Result<Vec<ScoredEdge>> {
    let scores = match *strategy {
        SparsifyStrategy::EdgeHeuristic { heuristic, seed } => heuristic_scores(graph, heuristic, seed, &options.pagerank)?,
        SparsifyStrategy::EdgeRank { variant } => {
            let timeline = timeline_for(graph, options)?;
            let weight = match variant {
                EdgeRankVariant::Ter => 1.0,
                EdgeRankVariant::CombinedTer => options.combined_weight,
            };
            compute_combined_ter(graph, &timeline, weight, options.snapshots)?
        }
        SparsifyStrategy::TimestampDrift { .. } => {
            return Err(Error::InvalidParameter(
                "timestamp-drift strategies rank timestamps, not edges".into(),
            ))
        }
    };
    Ok(rank_descending(scores))
}

fn timeline_for(graph: &TemporalGraph, options: &SparsifyOptions) -> Result<TprTimeline> {
    match options.snapshots {
        SnapshotKind::Normalized => compute_tpr_stream(graph, options.tpr),
        SnapshotKind::Raw => compute_tpr_stream_raw(graph, options.tpr),
    }
}

/// Score of the pair `(u, v)` on a static aggregate.
pub(crate) fn pair_score(agg: &StaticAggregate, heuristic: Heuristic, pagerank: Option<&[f64]>, u: NodeId, v: NodeId) -> f64 {
    let du = agg.neighbor_count(u) as f64;
    let dv = agg.neighbor_count(v) as f64;
    match heuristic {
        Heuristic::Degree => du + dv,
        Heuristic::Preference => du * dv,
        Heuristic::Jaccard => {
            let common = agg.common_neighbors(u, v) as f64;
            let union = du + dv - common;
            if union > 0.0 {
                common / union
            } else {
                0.0
            }
        }
        Heuristic::PageRank => {
            let pr = pagerank.expect("PageRank scores required");
            pr[u as usize] + pr[v as usize]
        }
        Heuristic::Random => unreachable!("random scores are drawn, not computed"),
    }
}

fn heuristic_scores(graph: &TemporalGraph, heuristic: Heuristic, seed: u64, pr_params: &PageRankParams) -> Result<Vec<f64>> {
    if heuristic == Heuristic::Jaccard && graph.is_bipartite() {
        return Err(Error::UnsupportedOnBipartite("Jaccard"));
    }
    if heuristic == Heuristic::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok((0..graph.edge_count()).map(|_| rng.random::<f64>()).collect());
    }

    let edges = graph.edges();
    let n = graph.id_space();
    let mut agg = StaticAggregate::empty(n, f64::NEG_INFINITY);
    let mut adjacency: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut pagerank_vec: Option<Vec<f64>> = None;
    let mut scores = vec![0.0; edges.len()];

    for group in graph.timestamp_groups() {
        for e in &edges[group.clone()] {
            if agg.multiplicity(e.source, e.target) == 0 {
                adjacency[e.source as usize].push(e.target);
                adjacency[e.target as usize].push(e.source);
            }
            agg.add_edge(e.source, e.target);
        }
        agg.cutoff = edges[group.start].timestamp;
        if heuristic == Heuristic::PageRank {
            pagerank_vec = Some(static_pagerank(&adjacency, pr_params, pagerank_vec.as_deref()));
        }
        for i in group {
            let e = &edges[i];
            scores[i] = pair_score(&agg, heuristic, pagerank_vec.as_deref(), e.source, e.target);
        }
    }
    Ok(scores)
}

/// Power-iteration PageRank on an undirected adjacency list. Isolated
/// nodes spread their mass uniformly. `warm` seeds the iteration.
pub fn static_pagerank(adjacency: &[Vec<NodeId>], params: &PageRankParams, warm: Option<&[f64]>) -> Vec<f64> {
    let n = adjacency.len();
    if n == 0 {
        return Vec::new();
    }
    let d = params.damping;
    let uniform = 1.0 / n as f64;
    let mut x = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => vec![uniform; n],
    };
    let mut next = vec![0.0; n];
    for _ in 0..params.max_iterations {
        let dangling: f64 = adjacency
            .iter()
            .zip(&x)
            .filter(|(nbrs, _)| nbrs.is_empty())
            .map(|(_, xi)| xi)
            .sum();
        let base = (1.0 - d) * uniform + d * dangling * uniform;
        next.iter_mut().for_each(|v| *v = base);
        for (u, nbrs) in adjacency.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let share = d * x[u] / nbrs.len() as f64;
            for &v in nbrs {
                next[v as usize] += share;
            }
        }
        let delta: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if delta < params.tolerance {
            break;
        }
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedTimestamp {
    /// Position in the timeline.
    pub index: usize,
    pub timestamp: f64,
    pub drift: f64,
}

pub fn rank_timestamps(timeline: &TprTimeline, metric: &DriftMetric) -> Result<Vec<RankedTimestamp>> {
    rank_timestamps_with(timeline, metric, SnapshotKind::Normalized)
}

/// Timestamps ordered by decreasing drift from the previous snapshot.
/// The first timestamp has drift 0 and sorts after every other zero.
pub fn rank_timestamps_with(timeline: &TprTimeline, metric: &DriftMetric, kind: SnapshotKind) -> Result<Vec<RankedTimestamp>> {
    if timeline.len() < 2 {
        return Err(Error::TooFewTimestamps(timeline.len()));
    }
    let mut ranked = Vec::with_capacity(timeline.len());
    ranked.push(RankedTimestamp {
        index: 0,
        timestamp: timeline.timestamps()[0],
        drift: 0.0,
    });
    for i in 1..timeline.len() {
        let value = drift(timeline.snapshot_of(i - 1, kind)?, timeline.snapshot_of(i, kind)?, metric)?;
        ranked.push(RankedTimestamp {
            index: i,
            timestamp: timeline.timestamps()[i],
            drift: value,
        });
    }
    ranked.sort_by(|a, b| {
        b.drift
            .total_cmp(&a.drift)
            .then((a.index == 0).cmp(&(b.index == 0)))
            .then(a.index.cmp(&b.index))
    });
    Ok(ranked)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemovedEdge {
    /// Position in the training stream.
    pub index: usize,
    pub score: f64,
    /// 0-based selection order.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalPlan {
    pub removed: Vec<RemovedEdge>,
    pub budget: usize,
    pub strategy: SparsifyStrategy,
    pub knowledge: f64,
    /// Length of the visible training prefix.
    pub visible: usize,
}

impl RemovalPlan {
    pub fn empty(strategy: SparsifyStrategy, knowledge: f64, visible: usize) -> Self {
        Self {
            removed: Vec::new(),
            budget: 0,
            strategy,
            knowledge,
            visible,
        }
    }

    pub fn len(&self) -> usize {
        self.removed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.removed.iter().map(|r| r.index).collect()
    }
}

pub fn select_removals(train: &TemporalGraph, strategy: &SparsifyStrategy, p: f64, knowledge: f64) -> Result<RemovalPlan> {
    Sparsifier::new(*strategy).select(train, p, knowledge)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sparsifier {
    pub strategy: SparsifyStrategy,
    pub options: SparsifyOptions,
}

impl Sparsifier {
    pub fn new(strategy: SparsifyStrategy) -> Self {
        Self {
            strategy,
            options: SparsifyOptions::default(),
        }
    }

    pub fn with_options(strategy: SparsifyStrategy, options: SparsifyOptions) -> Self {
        Self { strategy, options }
    }

    pub fn select(&self, train: &TemporalGraph, p: f64, knowledge: f64) -> Result<RemovalPlan> {
        if !(knowledge > 0.0 && knowledge <= 1.0) {
            return Err(Error::InvalidParameter(format!("knowledge must be in (0, 1], got {knowledge}")));
        }
        let visible = floor_fraction(knowledge, train.edge_count());
        let budget = match self.options.budget_base {
            BudgetBase::Training => compute_budget(train.edge_count(), p)?,
            BudgetBase::Visible => compute_budget(visible, p)?,
        };
        let mut plan = RemovalPlan::empty(self.strategy, knowledge, visible);
        plan.budget = budget;
        if budget == 0 {
            return Ok(plan);
        }
        let view = train.prefix(visible);
        let take = budget.min(visible);
        plan.removed = match self.strategy {
            SparsifyStrategy::TimestampDrift { metric } => self.walk_timestamps(&view, &metric, take)?,
            _ => score_edges_with(&view, &self.strategy, &self.options)?
                .into_iter()
                .take(take)
                .enumerate()
                .map(|(rank, s)| RemovedEdge {
                    index: s.index,
                    score: s.score,
                    rank,
                })
                .collect(),
        };
        if budget > visible {
            return Err(Error::BudgetExceedsVisible {
                budget,
                visible,
                partial: Box::new(plan),
            });
        }
        Ok(plan)
    }

    /// Removes whole timestamps in drift order; the last one visited is
    /// cut to the remaining budget, keeping its highest Combined-TER edges.
    fn walk_timestamps(&self, view: &TemporalGraph, metric: &DriftMetric, budget: usize) -> Result<Vec<RemovedEdge>> {
        let timeline = timeline_for(view, &self.options)?;
        let ranked = rank_timestamps_with(&timeline, metric, self.options.snapshots)?;
        let groups = view.timestamp_groups();
        let mut removed = Vec::with_capacity(budget);
        let mut tie_scores: Option<Vec<f64>> = None;

        for ts in ranked {
            let remaining = budget - removed.len();
            if remaining == 0 {
                break;
            }
            let group = groups[ts.index].clone();
            let chosen: Vec<usize> = if group.len() <= remaining {
                group.collect()
            } else {
                let scores = match &tie_scores {
                    Some(s) => s,
                    None => tie_scores.insert(compute_combined_ter(
                        view,
                        &timeline,
                        self.options.combined_weight,
                        self.options.snapshots,
                    )?),
                };
                let mut members: Vec<usize> = group.collect();
                members.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
                members.truncate(remaining);
                members
            };
            for index in chosen {
                let rank = removed.len();
                removed.push(RemovedEdge {
                    index,
                    score: ts.drift,
                    rank,
                });
            }
        }
        Ok(removed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tpr::TprParams;

    #[test]
    fn budget_floor() {
        assert_eq!(compute_budget(100, 0.3).unwrap(), 30);
        assert_eq!(compute_budget(157_474, 0.3).unwrap(), 472_422 / 10);
        assert_eq!(compute_budget(10, 0.0).unwrap(), 0);
        assert!(compute_budget(10, 1.5).is_err());
        assert!(compute_budget(10, -0.1).is_err());
    }

    #[test]
    fn catalog_has_sixteen_distinct_names() {
        let names: Vec<String> = SparsifyStrategy::catalog().iter().map(|s| s.name()).collect();
        assert_eq!(names.len(), 16);
        let unique: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(unique.len(), 16);
        for name in &names {
            assert_eq!(&SparsifyStrategy::from_name(name, 0).unwrap().name(), name);
        }
        assert!(SparsifyStrategy::from_name("TPR-Hamming", 0).is_err());
    }

    #[test]
    fn degree_prefers_hub_edges() {
        // a=0, b=1, c=2, d=3: edges a-b, b-c, b-d at t=1
        let g = TemporalGraph::from_triples(&[(0, 1, 1.0), (1, 2, 1.0), (1, 3, 1.0)]).unwrap();
        let ranked = score_edges(&g, &SparsifyStrategy::heuristic(Heuristic::Degree)).unwrap();
        assert_eq!(ranked[0].score, 4.0);
        assert!(ranked.iter().all(|s| s.score == 4.0));
        assert_eq!(ranked.iter().map(|s| s.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn heuristics_use_aggregate_at_edge_timestamp() {
        // Edge 0 is scored before edge 2 exists.
        let g = TemporalGraph::from_triples(&[(0, 1, 1.0), (2, 3, 2.0), (0, 2, 3.0)]).unwrap();
        let ranked = score_edges(&g, &SparsifyStrategy::heuristic(Heuristic::Preference)).unwrap();
        let by_index: Vec<f64> = {
            let mut v = vec![0.0; 3];
            for s in &ranked {
                v[s.index] = s.score;
            }
            v
        };
        assert_eq!(by_index, vec![1.0, 1.0, 4.0]);
    }

    #[test]
    fn singleton_ranks_first_everywhere() {
        let g = TemporalGraph::from_triples(&[(0, 1, 1.0)]).unwrap();
        for strategy in SparsifyStrategy::catalog() {
            if matches!(strategy, SparsifyStrategy::TimestampDrift { .. }) {
                continue;
            }
            let ranked = score_edges(&g, &strategy).unwrap();
            assert_eq!(ranked[0].index, 0, "{strategy}");
        }
    }

    #[test]
    fn random_is_seeded() {
        let triples: Vec<_> = (0..50).map(|i| (i % 7, 7 + i % 5, i as f64)).collect();
        let g = TemporalGraph::from_triples(&triples).unwrap();
        let s = SparsifyStrategy::EdgeHeuristic {
            heuristic: Heuristic::Random,
            seed: 9,
        };
        assert_eq!(score_edges(&g, &s).unwrap(), score_edges(&g, &s).unwrap());
    }

    #[test]
    fn jaccard_rejected_on_bipartite() {
        let fmt = crate::graph::DatasetFormat::new("bp", true);
        let g = crate::graph::parse_edge_stream("h\n0,0,1\n1,0,2\n", &fmt).unwrap();
        let err = score_edges(&g, &SparsifyStrategy::heuristic(Heuristic::Jaccard)).unwrap_err();
        assert!(matches!(err, Error::UnsupportedOnBipartite(_)));
    }

    #[test]
    fn pagerank_sums_to_one() {
        let adj = vec![vec![1], vec![0, 2], vec![1], vec![]];
        let pr = static_pagerank(&adj, &PageRankParams::default(), None);
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(pr[1] > pr[0]);
        assert!((pr[0] - pr[2]).abs() < 1e-12);
    }

    #[test]
    fn constant_timeline_keeps_timestamp_order() {
        // Normalized snapshots all have mean 1/|V|, so MSS2 drift is zero.
        let g = TemporalGraph::from_triples(&[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0)]).unwrap();
        let tl = compute_tpr_stream(&g, TprParams::default()).unwrap();
        let ranked = rank_timestamps(&tl, &DriftMetric::new(DriftKind::Mss2)).unwrap();
        assert!(ranked.iter().all(|r| r.drift.abs() < 1e-15));
        // index 0 sorts last among the zeros
        assert_eq!(ranked.iter().map(|r| r.index).collect::<Vec<_>>(), vec![1, 2, 0]);
    }

    #[test]
    fn too_few_timestamps() {
        let g = TemporalGraph::from_triples(&[(0, 1, 1.0)]).unwrap();
        let tl = compute_tpr_stream(&g, TprParams::default()).unwrap();
        assert!(matches!(
            rank_timestamps(&tl, &DriftMetric::new(DriftKind::Cosine)),
            Err(Error::TooFewTimestamps(1))
        ));
    }

    #[test]
    fn zero_rate_gives_empty_plan() {
        let g = TemporalGraph::from_triples(&[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        for strategy in SparsifyStrategy::catalog() {
            let plan = select_removals(&g, &strategy, 0.0, 1.0).unwrap();
            assert!(plan.is_empty());
        }
    }

    #[test]
    fn budget_beyond_visible_is_an_error_with_partial_plan() {
        let triples: Vec<_> = (0..10).map(|i| (i % 3, 3, i as f64)).collect();
        let g = TemporalGraph::from_triples(&triples).unwrap();
        let err = select_removals(&g, &SparsifyStrategy::heuristic(Heuristic::Degree), 0.5, 0.2).unwrap_err();
        match err {
            Error::BudgetExceedsVisible { budget, visible, partial } => {
                assert_eq!((budget, visible), (5, 2));
                assert_eq!(partial.len(), 2);
                assert!(partial.removed.iter().all(|r| r.index < 2));
            }
            other => panic!("unexpected {other}"),
        }
    }
}
