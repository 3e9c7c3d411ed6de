//! Temporal PageRank over an edge stream, per-timestamp snapshots, and the
//! edge-level scores derived from them (Temporal EdgeRank and its
//! local/global blend).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TemporalGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TprParams {
    /// Jump (continuation) probability.
    pub alpha: f64,
    /// Transition decay.
    pub beta: f64,
}

impl Default for TprParams {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            beta: 0.5,
        }
    }
}

impl TprParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!("beta must be in [0, 1], got {}", self.beta)));
        }
        Ok(())
    }

    /// Fraction of a node's active mass that follows an outgoing
    /// interaction, and the fraction that stays behind.
    fn transfer_split(&self) -> (f64, f64) {
        if self.beta < 1.0 {
            (1.0 - self.beta, self.beta)
        } else {
            (1.0, 0.0)
        }
    }
}

/// Which copy of the snapshot vectors to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotKind {
    #[default]
    Normalized,
    Raw,
}

/// One score vector per distinct timestamp, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TprTimeline {
    timestamps: Vec<f64>,
    width: usize,
    normalized: Vec<f64>,
    raw: Option<Vec<f64>>,
}

impl TprTimeline {
    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Length of every snapshot vector (the node id space).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn has_raw(&self) -> bool {
        self.raw.is_some()
    }

    pub fn snapshot(&self, i: usize) -> &[f64] {
        &self.normalized[i * self.width..(i + 1) * self.width]
    }

    pub fn raw_snapshot(&self, i: usize) -> Option<&[f64]> {
        self.raw
            .as_ref()
            .map(|r| &r[i * self.width..(i + 1) * self.width])
    }

    pub fn snapshot_of(&self, i: usize, kind: SnapshotKind) -> Result<&[f64]> {
        match kind {
            SnapshotKind::Normalized => Ok(self.snapshot(i)),
            SnapshotKind::Raw => self.raw_snapshot(i).ok_or_else(|| {
                Error::TimelineMismatch("raw snapshots were not retained".into())
            }),
        }
    }

    pub fn final_snapshot(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.snapshot(self.len() - 1))
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.timestamps
            .binary_search_by(|x| x.total_cmp(&t))
            .ok()
    }

    /// CSV matrix `timestamp,n0,n1,...` (debug export).
    pub fn to_csv(&self, kind: SnapshotKind) -> Result<String> {
        use std::fmt::Write as _;
        let mut out = String::from("timestamp");
        for v in 0..self.width {
            let _ = write!(out, ",n{v}");
        }
        out.push('\n');
        for (i, t) in self.timestamps.iter().enumerate() {
            let _ = write!(out, "{t}");
            for x in self.snapshot_of(i, kind)? {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        Ok(out)
    }
}

fn normalize_into(src: &[f64], dst: &mut Vec<f64>) {
    let total: f64 = src.iter().sum();
    if total > 0.0 {
        dst.extend(src.iter().map(|x| x / total));
    } else {
        dst.extend_from_slice(src);
    }
}

/// Streaming Temporal PageRank; stores normalized snapshots only.
pub fn compute_tpr_stream(graph: &TemporalGraph, params: TprParams) -> Result<TprTimeline> {
    tpr_stream(graph, params, false)
}

/// Streaming Temporal PageRank keeping both raw and normalized snapshots.
pub fn compute_tpr_stream_raw(graph: &TemporalGraph, params: TprParams) -> Result<TprTimeline> {
    tpr_stream(graph, params, true)
}

fn tpr_stream(graph: &TemporalGraph, params: TprParams, keep_raw: bool) -> Result<TprTimeline> {
    params.validate()?;
    let n = graph.id_space();
    let alpha = params.alpha;
    let (moved, kept) = params.transfer_split();
    let mut score = vec![0.0; n];
    let mut active = vec![0.0; n];

    let groups = graph.timestamp_groups();
    let mut timestamps = Vec::with_capacity(groups.len());
    let mut normalized = Vec::with_capacity(groups.len() * n);
    let mut raw = keep_raw.then(|| Vec::with_capacity(groups.len() * n));

    let edges = graph.edges();
    for group in groups {
        for e in &edges[group.clone()] {
            let (u, v) = (e.source as usize, e.target as usize);
            score[u] += 1.0 - alpha;
            active[u] += 1.0 - alpha;
            score[v] += alpha * active[u];
            active[v] += alpha * moved * active[u];
            active[u] *= kept;
        }
        timestamps.push(edges[group.start].timestamp);
        normalize_into(&score, &mut normalized);
        if let Some(r) = raw.as_mut() {
            r.extend_from_slice(&score);
        }
    }

    Ok(TprTimeline {
        timestamps,
        width: n,
        normalized,
        raw,
    })
}

/// How enumerated walk weights are combined in [`brute_force_tpr_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WalkWeighting {
    /// Sum the decay-weighted counts directly; every out-interaction of a
    /// node is a walk origin. Agrees with the streaming update.
    #[default]
    DecayCount,
    /// Divide each count by the total count of equal-length walks from
    /// the same origin before summing.
    OriginNormalized,
}

const BRUTE_FORCE_MAX_EDGES: usize = 16;
const BRUTE_FORCE_MAX_WALK: usize = 6;

/// Final-time Temporal PageRank by explicit enumeration of time-respecting
/// walks of at most `max_walk_len` edges. Returns a normalized vector.
pub fn brute_force_tpr(graph: &TemporalGraph, params: TprParams, max_walk_len: usize) -> Result<Vec<f64>> {
    brute_force_tpr_with(graph, params, max_walk_len, WalkWeighting::DecayCount)
}

pub fn brute_force_tpr_with(
    graph: &TemporalGraph,
    params: TprParams,
    max_walk_len: usize,
    weighting: WalkWeighting,
) -> Result<Vec<f64>> {
    params.validate()?;
    if graph.edge_count() > BRUTE_FORCE_MAX_EDGES || max_walk_len > BRUTE_FORCE_MAX_WALK {
        return Err(Error::InstanceTooLarge(format!(
            "{} edges, walk length {max_walk_len} (limits {BRUTE_FORCE_MAX_EDGES}, {BRUTE_FORCE_MAX_WALK})",
            graph.edge_count()
        )));
    }

    let edges: Vec<(usize, usize)> = graph
        .edges()
        .iter()
        .map(|e| (e.source as usize, e.target as usize))
        .collect();
    let (moved, kept) = params.transfer_split();
    let alpha = params.alpha;
    let mut scores = vec![0.0; graph.id_space()];

    // A walk is a sequence of edge positions i1 < i2 < ... whose endpoints
    // chain; stream order implies non-decreasing timestamps. It originates
    // at an out-interaction `origin` of its first node and pays `kept` for
    // every out-interaction of an intermediate node that it waits through.
    for (origin, &(start, _)) in edges.iter().enumerate() {
        scores[start] += 1.0 - alpha;
        // (endpoint, length, decay-weighted count)
        let mut walks: Vec<(usize, usize, f64)> = Vec::new();
        // (node, first usable position, accumulated weight, length)
        let mut stack = vec![(start, origin, 1.0, 0usize)];
        while let Some((node, from, weight, len)) = stack.pop() {
            if len == max_walk_len {
                continue;
            }
            let mut waited = 0;
            for (i, &(s, t)) in edges.iter().enumerate().skip(from) {
                if s != node {
                    continue;
                }
                let w = weight * kept.powi(waited);
                walks.push((t, len + 1, w));
                stack.push((t, i + 1, w * moved, len + 1));
                waited += 1;
            }
        }

        let mut totals = vec![0.0; max_walk_len + 1];
        if weighting == WalkWeighting::OriginNormalized {
            for &(_, len, w) in &walks {
                totals[len] += w;
            }
        }
        for (end, len, w) in walks {
            let p = match weighting {
                WalkWeighting::DecayCount => w,
                WalkWeighting::OriginNormalized if totals[len] > 0.0 => w / totals[len],
                WalkWeighting::OriginNormalized => 0.0,
            };
            scores[end] += (1.0 - alpha) * alpha.powi(len as i32) * p;
        }
    }

    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        scores.iter_mut().for_each(|x| *x /= total);
    }
    Ok(scores)
}

fn check_alignment(graph: &TemporalGraph, timeline: &TprTimeline) -> Result<()> {
    let ts = graph.distinct_timestamps();
    if ts.len() != timeline.len() || ts.iter().zip(timeline.timestamps()).any(|(a, b)| a != b) {
        return Err(Error::TimelineMismatch(format!(
            "graph has {} distinct timestamps, timeline {}",
            ts.len(),
            timeline.len()
        )));
    }
    if timeline.width() != graph.id_space() {
        return Err(Error::TimelineMismatch(format!(
            "timeline width {} vs node space {}",
            timeline.width(),
            graph.id_space()
        )));
    }
    Ok(())
}

/// Temporal EdgeRank: for each distinct timestamp `t`, the sum over the
/// distinct sources `n` active at `t` of `r^(t)(n) / out_deg(n)`, with
/// whole-stream out-degrees.
pub fn compute_ter(graph: &TemporalGraph, timeline: &TprTimeline, kind: SnapshotKind) -> Result<Vec<(f64, f64)>> {
    check_alignment(graph, timeline)?;
    let (out_deg, _) = graph.degrees();
    let edges = graph.edges();
    let mut seen = vec![usize::MAX; graph.id_space()];
    graph
        .timestamp_groups()
        .into_iter()
        .enumerate()
        .map(|(i, group)| {
            let snap = timeline.snapshot_of(i, kind)?;
            let mut total = 0.0;
            for e in &edges[group.clone()] {
                let u = e.source as usize;
                if seen[u] != i {
                    seen[u] = i;
                    total += snap[u] / out_deg[u] as f64;
                }
            }
            Ok((edges[group.start].timestamp, total))
        })
        .collect()
}

/// Per-edge EdgeRank attribution: each edge `(u, v, t)` receives its
/// source's term `r^(t)(u) / out_deg(u)`.
pub fn edge_ter_scores(graph: &TemporalGraph, timeline: &TprTimeline, kind: SnapshotKind) -> Result<Vec<f64>> {
    compute_combined_ter(graph, timeline, 1.0, kind)
}

/// Blend of the local attribution (snapshot at the edge's own timestamp)
/// and the global attribution (final snapshot):
/// `w · local + (1 − w) · global`.
pub fn compute_combined_ter(
    graph: &TemporalGraph,
    timeline: &TprTimeline,
    weight: f64,
    kind: SnapshotKind,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidParameter(format!("blend weight must be in [0, 1], got {weight}")));
    }
    check_alignment(graph, timeline)?;
    if timeline.is_empty() {
        return Ok(Vec::new());
    }
    let (out_deg, _) = graph.degrees();
    let last = timeline.snapshot_of(timeline.len() - 1, kind)?;
    let edges = graph.edges();
    let mut scores = Vec::with_capacity(edges.len());
    for (i, group) in graph.timestamp_groups().into_iter().enumerate() {
        let snap = timeline.snapshot_of(i, kind)?;
        for e in &edges[group] {
            let u = e.source as usize;
            let d = out_deg[u] as f64;
            scores.push(weight * snap[u] / d + (1.0 - weight) * last[u] / d);
        }
    }
    Ok(scores)
}
