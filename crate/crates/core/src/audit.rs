//! Independent constraint checks on an (original, poisoned, manifest)
//! triple.
//!
//! Everything is recomputed from the two edge streams. Nodes are compared
//! by `(side, raw id)` so the two graphs need not share a node table, and
//! none of the sampler's bookkeeping is reused.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::graph::{floor_fraction, Side, TemporalGraph};
use crate::manifest::{Manifest, RunMode};

type NodeKey = (Side, u64);
type EdgeKey = (NodeKey, NodeKey, u64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub ks_threshold: f64,
    /// Below this many insertions the KS check is reported but not enforced.
    pub ks_min_sample: usize,
    /// Overrides the manifest's window.
    pub window: Option<f64>,
    /// Overrides the manifest's node capacity.
    pub node_capacity: Option<u32>,
    /// Overrides the manifest's mode.
    pub mode: Option<RunMode>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            ks_threshold: 0.1,
            ks_min_sample: 100,
            window: None,
            node_capacity: None,
            mode: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCheck {
    /// Manifest removals that are still in the poisoned stream.
    pub missing_removals: usize,
    /// Edges gone from the poisoned stream without a removal record.
    pub unlisted_removals: usize,
    /// Manifest insertions absent from the poisoned stream.
    pub missing_insertions: usize,
    /// Edges new in the poisoned stream without an insertion record.
    pub unlisted_insertions: usize,
    /// Removal records whose `edge_index` points at a different edge.
    pub index_mismatches: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetCheck {
    pub budget: usize,
    pub removed: usize,
    pub inserted: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KsCheck {
    pub applicable: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub sample: usize,
    pub min_sample: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActivityCheck {
    pub applicable: bool,
    pub window: f64,
    pub violations: usize,
    pub total: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DegreeCheck {
    pub applicable: bool,
    pub capacity: u32,
    /// Largest `|poisoned out-degree − original out-degree|`.
    pub max_out_delta: u64,
    pub max_in_delta: u64,
    /// Total-variation distance between the total-degree histograms.
    pub histogram_tv: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CountCheck {
    pub applicable: bool,
    pub violations: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub mode: RunMode,
    pub consistency: ConsistencyCheck,
    pub c1: BudgetCheck,
    pub c2: KsCheck,
    pub c3: ActivityCheck,
    pub c4: DegreeCheck,
    pub novelty: CountCheck,
    pub bipartite: CountCheck,
    pub warnings: Vec<String>,
}

impl AuditReport {
    pub fn failed_checks(&self) -> Vec<String> {
        let mut failed = Vec::new();
        let checks = [
            ("consistency", self.consistency.passed),
            ("C1", self.c1.passed),
            ("C2", self.c2.passed),
            ("C3", self.c3.passed),
            ("C4", self.c4.passed),
            ("novelty", self.novelty.passed),
            ("bipartite", self.bipartite.passed),
        ];
        for (name, ok) in checks {
            if !ok {
                failed.push(name.to_string());
            }
        }
        failed
    }

    pub fn passed(&self) -> bool {
        self.failed_checks().is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn applicable_verdict(applicable: bool, ok: bool) -> &'static str {
    if applicable {
        verdict(ok)
    } else {
        "SKIP"
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.consistency;
        writeln!(f, "mode: {:?}", self.mode)?;
        writeln!(
            f,
            "consistency  {}  missing removals {}, unlisted removals {}, missing insertions {}, unlisted insertions {}, index mismatches {}",
            verdict(c.passed),
            c.missing_removals,
            c.unlisted_removals,
            c.missing_insertions,
            c.unlisted_insertions,
            c.index_mismatches
        )?;
        writeln!(
            f,
            "C1 budget    {}  budget {}, removed {}, inserted {}",
            verdict(self.c1.passed),
            self.c1.budget,
            self.c1.removed,
            self.c1.inserted
        )?;
        writeln!(
            f,
            "C2 KS        {}  statistic {:.4} (threshold {}, sample {}, enforced from {})",
            applicable_verdict(self.c2.applicable, self.c2.passed),
            self.c2.statistic,
            self.c2.threshold,
            self.c2.sample,
            self.c2.min_sample
        )?;
        writeln!(
            f,
            "C3 activity  {}  {} of {} insertions outside the window (W = {})",
            applicable_verdict(self.c3.applicable, self.c3.passed),
            self.c3.violations,
            self.c3.total,
            self.c3.window
        )?;
        writeln!(
            f,
            "C4 degree    {}  max delta out {}, in {} (capacity {}), histogram TV {:.6}",
            applicable_verdict(self.c4.applicable, self.c4.passed),
            self.c4.max_out_delta,
            self.c4.max_in_delta,
            self.c4.capacity,
            self.c4.histogram_tv
        )?;
        writeln!(
            f,
            "novelty      {}  {} violations",
            applicable_verdict(self.novelty.applicable, self.novelty.passed),
            self.novelty.violations
        )?;
        writeln!(
            f,
            "bipartite    {}  {} violations",
            applicable_verdict(self.bipartite.applicable, self.bipartite.passed),
            self.bipartite.violations
        )?;
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        write!(f, "overall: {}", verdict(self.passed()))
    }
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

fn node_key(graph: &TemporalGraph, id: u32) -> NodeKey {
    let nodes = graph.nodes();
    (nodes.side(id), nodes.raw_id(id))
}

fn edge_keys(graph: &TemporalGraph) -> Vec<EdgeKey> {
    graph
        .edges()
        .iter()
        .map(|e| (node_key(graph, e.source), node_key(graph, e.target), e.timestamp.to_bits()))
        .collect()
}

fn multiset<I: IntoIterator<Item = EdgeKey>>(items: I) -> HashMap<EdgeKey, i64> {
    let mut m = HashMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

/// `a − b` as a multiset.
fn difference(a: &HashMap<EdgeKey, i64>, b: &HashMap<EdgeKey, i64>) -> HashMap<EdgeKey, i64> {
    a.iter()
        .filter_map(|(k, &n)| {
            let left = n - b.get(k).copied().unwrap_or(0);
            (left > 0).then_some((*k, left))
        })
        .collect()
}

/// Number of elements in the symmetric difference of two multisets.
fn mismatch(a: &HashMap<EdgeKey, i64>, b: &HashMap<EdgeKey, i64>) -> (usize, usize) {
    let only_a: i64 = difference(a, b).values().sum();
    let only_b: i64 = difference(b, a).values().sum();
    (only_a as usize, only_b as usize)
}

fn undirected(u: NodeKey, v: NodeKey) -> (NodeKey, NodeKey) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Audits `poisoned` against `original` (the unpoisoned training stream).
pub fn audit(original: &TemporalGraph, poisoned: &TemporalGraph, manifest: &Manifest, config: &AuditConfig) -> AuditReport {
    let meta = &manifest.meta;
    let mode = config.mode.unwrap_or(meta.mode);
    let window = config.window.unwrap_or(meta.window);
    let capacity = config.node_capacity.unwrap_or(meta.node_capacity);
    let mut warnings = Vec::new();

    let orig_keys = edge_keys(original);
    let pois_keys = edge_keys(poisoned);
    let orig_ms = multiset(orig_keys.iter().copied());
    let pois_ms = multiset(pois_keys.iter().copied());
    let removed_ms = difference(&orig_ms, &pois_ms);
    let inserted_ms = difference(&pois_ms, &orig_ms);
    let removed_count: i64 = removed_ms.values().sum();
    let inserted_count: i64 = inserted_ms.values().sum();

    // Consistency with the manifest.
    let (src_side, dst_side) = if original.is_bipartite() {
        (Side::Source, Side::Target)
    } else {
        (Side::Shared, Side::Shared)
    };
    let claimed_removed = multiset(
        manifest
            .removals
            .iter()
            .map(|r| ((src_side, r.source), (dst_side, r.target), r.timestamp.to_bits())),
    );
    let claimed_inserted = multiset(
        manifest
            .insertions
            .iter()
            .map(|r| ((src_side, r.source), (dst_side, r.target), r.timestamp.to_bits())),
    );
    let (missing_removals, unlisted_removals) = mismatch(&claimed_removed, &removed_ms);
    let (missing_insertions, unlisted_insertions) = mismatch(&claimed_inserted, &inserted_ms);
    let index_mismatches = manifest
        .removals
        .iter()
        .filter(|r| {
            orig_keys.get(r.edge_index)
                != Some(&((src_side, r.source), (dst_side, r.target), r.timestamp.to_bits()))
        })
        .count();
    if meta.train_edges != original.edge_count() {
        warnings.push(format!(
            "manifest was produced for {} training edges, original has {}",
            meta.train_edges,
            original.edge_count()
        ));
    }
    let consistency = ConsistencyCheck {
        missing_removals,
        unlisted_removals,
        missing_insertions,
        unlisted_insertions,
        index_mismatches,
        passed: missing_removals + unlisted_removals + missing_insertions + unlisted_insertions + index_mismatches == 0,
    };

    // C1
    let budget = floor_fraction(meta.p, original.edge_count());
    let (removed, inserted) = (removed_count as usize, inserted_count as usize);
    let c1_ok = match mode {
        RunMode::Attack => removed <= budget && inserted <= budget && removed == inserted,
        RunMode::Add => removed == 0 && inserted <= budget,
        RunMode::Remove => inserted == 0 && removed <= budget,
    };
    let c1 = BudgetCheck {
        budget,
        removed,
        inserted,
        passed: c1_ok,
    };

    // Inserted edges in poisoned stream order.
    let mut pending = inserted_ms.clone();
    let mut inserted_edges: Vec<EdgeKey> = Vec::with_capacity(inserted);
    for k in &pois_keys {
        if let Some(n) = pending.get_mut(k) {
            if *n > 0 {
                *n -= 1;
                inserted_edges.push(*k);
            }
        }
    }

    let visible = floor_fraction(meta.knowledge, original.edge_count()).min(original.edge_count());
    let visible_keys = &orig_keys[..visible];

    // C2
    let c2 = if mode == RunMode::Remove {
        KsCheck {
            threshold: config.ks_threshold,
            min_sample: config.ks_min_sample,
            passed: true,
            ..KsCheck::default()
        }
    } else {
        let ins_t: Vec<f64> = inserted_edges.iter().map(|k| f64::from_bits(k.2)).collect();
        let vis_t: Vec<f64> = visible_keys.iter().map(|k| f64::from_bits(k.2)).collect();
        let statistic = ks_statistic(&ins_t, &vis_t);
        KsCheck {
            applicable: true,
            statistic,
            threshold: config.ks_threshold,
            sample: ins_t.len(),
            min_sample: config.ks_min_sample,
            passed: ins_t.len() < config.ks_min_sample || statistic <= config.ks_threshold,
        }
    };

    // C3: activity in the visible original stream.
    let c3 = if mode == RunMode::Attack {
        let mut activity: HashMap<NodeKey, Vec<f64>> = HashMap::new();
        for k in visible_keys {
            let t = f64::from_bits(k.2);
            activity.entry(k.0).or_default().push(t);
            activity.entry(k.1).or_default().push(t);
        }
        let active = |node: &NodeKey, t: f64| {
            activity
                .get(node)
                .is_some_and(|times| times.iter().any(|&x| x >= t - window && x <= t))
        };
        let violations = inserted_edges
            .iter()
            .filter(|k| {
                let t = f64::from_bits(k.2);
                !(active(&k.0, t) && active(&k.1, t))
            })
            .count();
        ActivityCheck {
            applicable: true,
            window,
            violations,
            total: inserted_edges.len(),
            passed: violations == 0,
        }
    } else {
        ActivityCheck {
            window,
            passed: true,
            ..ActivityCheck::default()
        }
    };

    // C4
    let c4 = {
        let mut delta: BTreeMap<NodeKey, (i64, i64)> = BTreeMap::new();
        let mut orig_deg: BTreeMap<NodeKey, u64> = BTreeMap::new();
        let mut pois_deg: BTreeMap<NodeKey, u64> = BTreeMap::new();
        for k in &orig_keys {
            delta.entry(k.0).or_default().0 -= 1;
            delta.entry(k.1).or_default().1 -= 1;
            *orig_deg.entry(k.0).or_default() += 1;
            *orig_deg.entry(k.1).or_default() += 1;
        }
        for k in &pois_keys {
            delta.entry(k.0).or_default().0 += 1;
            delta.entry(k.1).or_default().1 += 1;
            *pois_deg.entry(k.0).or_default() += 1;
            *pois_deg.entry(k.1).or_default() += 1;
        }
        let max_out_delta = delta.values().map(|d| d.0.unsigned_abs()).max().unwrap_or(0);
        let max_in_delta = delta.values().map(|d| d.1.unsigned_abs()).max().unwrap_or(0);
        let nodes: Vec<NodeKey> = delta.keys().copied().collect();
        let histogram = |deg: &BTreeMap<NodeKey, u64>| {
            let mut h: BTreeMap<u64, f64> = BTreeMap::new();
            for n in &nodes {
                *h.entry(deg.get(n).copied().unwrap_or(0)).or_default() += 1.0;
            }
            h
        };
        let (ho, hp) = (histogram(&orig_deg), histogram(&pois_deg));
        let total = nodes.len().max(1) as f64;
        let mut tv = 0.0;
        for d in ho.keys().chain(hp.keys()).collect::<std::collections::BTreeSet<_>>() {
            tv += (ho.get(d).copied().unwrap_or(0.0) - hp.get(d).copied().unwrap_or(0.0)).abs() / total;
        }
        let applicable = mode == RunMode::Attack;
        DegreeCheck {
            applicable,
            capacity,
            max_out_delta,
            max_in_delta,
            histogram_tv: 0.5 * tv,
            passed: !applicable || (max_out_delta <= capacity as u64 && max_in_delta <= capacity as u64),
        }
    };

    // Novelty: no inserted pair interacted before, in either direction.
    let novelty = if mode == RunMode::Remove {
        CountCheck {
            passed: true,
            ..CountCheck::default()
        }
    } else {
        let mut first_seen: HashMap<(NodeKey, NodeKey), f64> = HashMap::new();
        for k in &orig_keys {
            let t = f64::from_bits(k.2);
            first_seen
                .entry(undirected(k.0, k.1))
                .and_modify(|x| *x = x.min(t))
                .or_insert(t);
        }
        let mut earlier_insertions: std::collections::HashSet<(NodeKey, NodeKey)> = Default::default();
        let mut violations = 0;
        for k in &inserted_edges {
            let pair = undirected(k.0, k.1);
            let t = f64::from_bits(k.2);
            let historical = first_seen.get(&pair).is_some_and(|&t0| t0 <= t);
            if historical || !earlier_insertions.insert(pair) || k.0 == k.1 {
                violations += 1;
            }
        }
        CountCheck {
            applicable: true,
            violations,
            passed: violations == 0,
        }
    };

    // Bipartite: inserted endpoints must be existing nodes of the right side.
    let bipartite = if original.is_bipartite() && mode != RunMode::Remove {
        let mut known: std::collections::HashSet<NodeKey> = Default::default();
        for k in &orig_keys {
            known.insert(k.0);
            known.insert(k.1);
        }
        let violations = inserted_edges
            .iter()
            .filter(|k| k.0 .0 != Side::Source || k.1 .0 != Side::Target || !known.contains(&k.0) || !known.contains(&k.1))
            .count();
        CountCheck {
            applicable: true,
            violations,
            passed: violations == 0,
        }
    } else {
        CountCheck {
            passed: true,
            ..CountCheck::default()
        }
    };

    if poisoned.is_empty() {
        warnings.push("poisoned graph has no edges".into());
    }
    if mode == RunMode::Attack && inserted < config.ks_min_sample && inserted > 0 {
        let mut msg = String::new();
        let _ = write!(msg, "only {inserted} insertions; KS threshold not enforced");
        warnings.push(msg);
    }

    AuditReport {
        mode,
        consistency,
        c1,
        c2,
        c3,
        c4,
        novelty,
        bipartite,
        warnings,
    }
}
