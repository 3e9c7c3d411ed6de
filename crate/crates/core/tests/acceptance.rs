//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test -p tgpoison --test acceptance`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tgpoison::audit::{audit, AuditConfig, AuditReport};
use tgpoison::drift::{drift, DriftKind, DriftMetric};
use tgpoison::graph::{NodeId, TemporalGraph};
use tgpoison::manifest::{Manifest, ManifestMeta, RemoveRecord, RunMode};
use tgpoison::pipeline::{benchmark, poison_train, PoisonOutcome, PoisonSettings};
use tgpoison::sampler::{timestamp_selector, SamplerParams};
use tgpoison::sparsify::{BudgetBase, RemovalPlan, RemovedEdge, Sparsifier, SparsifyOptions, SparsifyStrategy};
use tgpoison::synthetic::{prefix_stable_stream, replicate, starvation_instance, SyntheticStream};
use tgpoison::tpr::{brute_force_tpr, compute_tpr_stream, TprParams};
use tgpoison::Error;

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn base_stream() -> TemporalGraph {
    SyntheticStream {
        edges: 10_000,
        nodes: 1000,
        zipf_exponent: 0.5,
        edges_per_timestamp: 10,
        seed: 0,
        ..SyntheticStream::default()
    }
    .generate()
    .expect("synthetic stream")
}

fn settings(strategy: SparsifyStrategy, p: f64) -> PoisonSettings {
    PoisonSettings {
        strategy,
        p,
        ..PoisonSettings::default()
    }
}

// ---------------------------------------------------------------------
// TPR oracle

/// Out-interactions of `node` at stream positions in `lo..hi`.
fn waits(edges: &[(usize, usize)], node: usize, lo: usize, hi: usize) -> i32 {
    edges[lo..hi].iter().filter(|e| e.0 == node).count() as i32
}

/// Weight of one time-respecting walk `path` (stream positions) that
/// starts from mass injected at position `origin`.
fn walk_weight(edges: &[(usize, usize)], origin: usize, path: &[usize], alpha: f64, beta: f64) -> f64 {
    let (moved, kept) = if beta < 1.0 { (1.0 - beta, beta) } else { (1.0, 0.0) };
    let mut w = kept.powi(waits(edges, edges[origin].0, origin, path[0]));
    for pair in path.windows(2) {
        let node = edges[pair[0]].1;
        w *= moved * kept.powi(waits(edges, node, pair[0] + 1, pair[1]));
    }
    (1.0 - alpha) * alpha.powi(path.len() as i32) * w
}

fn enumerate_walks(edges: &[(usize, usize)], node: usize, from: usize, path: &mut Vec<usize>, max_len: usize, out: &mut Vec<Vec<usize>>) {
    if path.len() == max_len {
        return;
    }
    for i in from..edges.len() {
        if edges[i].0 == node {
            path.push(i);
            out.push(path.clone());
            enumerate_walks(edges, edges[i].1, i + 1, path, max_len, out);
            path.pop();
        }
    }
}

fn oracle_tpr(edges: &[(usize, usize)], n: usize, alpha: f64, beta: f64, max_len: usize) -> Vec<f64> {
    let mut score = vec![0.0; n];
    for (origin, &(u, _)) in edges.iter().enumerate() {
        score[u] += 1.0 - alpha;
        let mut walks = Vec::new();
        enumerate_walks(edges, u, origin, &mut Vec::new(), max_len, &mut walks);
        for path in walks {
            let end = edges[*path.last().unwrap()].1;
            score[end] += walk_weight(edges, origin, &path, alpha, beta);
        }
    }
    let total: f64 = score.iter().sum();
    score.iter().map(|x| x / total).collect()
}

fn same_ordering(a: &[f64], b: &[f64]) -> bool {
    let sign = |x: f64, scale: f64| {
        if x.abs() <= 1e-9 * scale {
            0
        } else if x > 0.0 {
            1
        } else {
            -1
        }
    };
    let sa = a.iter().cloned().fold(0.0, f64::max);
    let sb = b.iter().cloned().fold(0.0, f64::max);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            if sign(a[i] - a[j], sa) != sign(b[i] - b[j], sb) {
                return false;
            }
        }
    }
    true
}

fn random_small_graph(rng: &mut ChaCha8Rng) -> (TemporalGraph, Vec<(usize, usize)>) {
    let nodes = rng.random_range(2..=8u64);
    let m = rng.random_range(1..=12usize);
    let mut triples = Vec::with_capacity(m);
    for _ in 0..m {
        let u = rng.random_range(0..nodes);
        let mut v = rng.random_range(0..nodes);
        while v == u {
            v = rng.random_range(0..nodes);
        }
        triples.push((u, v, rng.random_range(0..6u32) as f64));
    }
    let graph = TemporalGraph::from_triples(&triples).expect("small graph");
    let edges = graph.edges().iter().map(|e| (e.source as usize, e.target as usize)).collect();
    (graph, edges)
}

fn tpr_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cases = 0;
    let mut rank_failures = 0;
    let mut value_failures = 0;
    for _ in 0..50 {
        let (graph, edges) = random_small_graph(&mut rng);
        for alpha in [0.5, 0.85] {
            for beta in [0.0, 0.5, 1.0] {
                let params = TprParams::new(alpha, beta).unwrap();
                let oracle = oracle_tpr(&edges, graph.id_space(), alpha, beta, 5);
                let library = brute_force_tpr(&graph, params, 5).unwrap();
                if oracle.iter().zip(&library).any(|(a, b)| (a - b).abs() > 1e-12) {
                    value_failures += 1;
                }
                let timeline = compute_tpr_stream(&graph, params).unwrap();
                if !same_ordering(timeline.final_snapshot().unwrap(), &oracle) {
                    rank_failures += 1;
                }
                cases += 1;
            }
        }
    }
    Verdict::new(
        rank_failures == 0 && value_failures == 0,
        format!("{cases} cases, {rank_failures} ranking disagreements, {value_failures} enumerator mismatches"),
    )
}

// ---------------------------------------------------------------------
// Drift oracle

fn reference_metric(kind: DriftKind, p: &[f64], q: &[f64]) -> Option<f64> {
    let n = p.len();
    let normalize = |v: &[f64]| -> Option<Vec<f64>> {
        let s: f64 = v.iter().sum();
        (s > 0.0).then(|| v.iter().map(|x| x / s).collect())
    };
    let entropy_like = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            if a[i] > 0.0 {
                s += a[i] * (a[i].ln() - b[i].ln());
            }
        }
        s
    };
    Some(match kind {
        DriftKind::Mss => {
            let mut s = 0.0;
            for i in 0..n {
                s += (q[i] - p[i]).abs();
            }
            s / n as f64
        }
        DriftKind::Mss2 => (q.iter().sum::<f64>() / n as f64 - p.iter().sum::<f64>() / n as f64).abs(),
        DriftKind::Cosine => {
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let (a, b) = (norm(p), norm(q));
            if a == 0.0 && b == 0.0 {
                0.0
            } else if a == 0.0 || b == 0.0 {
                1.0
            } else {
                let dot: f64 = (0..n).map(|i| p[i] * q[i]).sum();
                1.0 - dot / (a * b)
            }
        }
        DriftKind::JaccardTopK => {
            let k = ((n as f64 / 10.0).ceil() as usize).max(1);
            let top = |v: &[f64]| -> Vec<bool> {
                let mut mark = vec![false; n];
                for _ in 0..k.min(n) {
                    let mut best: Option<usize> = None;
                    for i in 0..n {
                        if !mark[i] && best.is_none_or(|b| v[i] > v[b]) {
                            best = Some(i);
                        }
                    }
                    mark[best.unwrap()] = true;
                }
                mark
            };
            let (a, b) = (top(p), top(q));
            let inter = (0..n).filter(|&i| a[i] && b[i]).count() as f64;
            let union = (0..n).filter(|&i| a[i] || b[i]).count() as f64;
            1.0 - inter / union
        }
        DriftKind::Euclidean => (0..n).map(|i| (p[i] - q[i]).powi(2)).sum::<f64>().sqrt(),
        DriftKind::Chebyshev => {
            let mut m = 0.0;
            for i in 0..n {
                m = f64::max(m, (p[i] - q[i]).abs());
            }
            m
        }
        DriftKind::Kl => {
            let (a, b) = (normalize(p)?, normalize(q)?);
            let mut s = 0.0;
            for i in 0..n {
                if a[i] > 0.0 {
                    s += a[i] * (a[i] / (b[i] + 1e-12)).ln();
                }
            }
            s.max(0.0)
        }
        DriftKind::Jsd => {
            let (a, b) = (normalize(p)?, normalize(q)?);
            let m: Vec<f64> = (0..n).map(|i| (a[i] + b[i]) / 2.0).collect();
            ((entropy_like(&a, &m) + entropy_like(&b, &m)) / 2.0).max(0.0)
        }
        DriftKind::Wasserstein => {
            let (a, b) = (normalize(p)?, normalize(q)?);
            let cdf = |v: &[f64]| -> Vec<f64> {
                v.iter()
                    .scan(0.0, |acc, x| {
                        *acc += x;
                        Some(*acc)
                    })
                    .collect()
            };
            let (ca, cb) = (cdf(&a), cdf(&b));
            (0..n - 1).map(|i| (ca[i] - cb[i]).abs()).sum()
        }
    })
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() })
        .collect()
}

fn drift_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = Vec::new();
    let mut property_failures = Vec::new();
    let mut kl_gap: f64 = 0.0;
    for pair in 0..100 {
        let n = rng.random_range(1..=50);
        let p = random_vector(&mut rng, n);
        let mut q = random_vector(&mut rng, n);
        // Keep both vectors away from zero mass so every metric is defined.
        if q.iter().all(|x| *x == 0.0) {
            q[0] = 1.0;
        }
        let p = if p.iter().all(|x| *x == 0.0) { vec![1.0; n] } else { p };
        for kind in DriftKind::ALL {
            let metric = DriftMetric::new(kind);
            let got = drift(&p, &q, &metric).unwrap();
            let want = reference_metric(kind, &p, &q).unwrap();
            if (got - want).abs() > 1e-9 {
                mismatches.push(format!("{kind} pair {pair}: {got} vs {want}"));
            }
            let back = drift(&q, &p, &metric).unwrap();
            if kind.is_symmetric() && (got - back).abs() > 1e-12 {
                property_failures.push(format!("{kind} asymmetric on pair {pair}"));
            }
            if kind == DriftKind::Kl {
                kl_gap = kl_gap.max((got - back).abs());
            }
            if got < 0.0 {
                property_failures.push(format!("{kind} negative on pair {pair}"));
            }
            if drift(&p, &p, &metric).unwrap() > 1e-9 {
                property_failures.push(format!("{kind} identity fails on pair {pair}"));
            }
            if kind == DriftKind::Jsd && got > std::f64::consts::LN_2 + 1e-12 {
                property_failures.push(format!("JSD above ln 2 on pair {pair}"));
            }
        }
    }
    let witnessed = kl_gap > 1e-3;
    let mut detail = format!(
        "9 metrics x 100 pairs, {} mismatches, {} property failures, KL asymmetry gap {:.3}",
        mismatches.len(),
        property_failures.len(),
        kl_gap
    );
    for m in mismatches.iter().chain(&property_failures).take(3) {
        detail.push_str("; ");
        detail.push_str(m);
    }
    Verdict::new(mismatches.is_empty() && property_failures.is_empty() && witnessed, detail)
}

// ---------------------------------------------------------------------
// Budget exactness and the constraint suite

fn budget_exactness(train: &TemporalGraph, at_030: &mut Vec<PoisonOutcome>) -> Verdict {
    let mut failures = Vec::new();
    let mut runs = 0;
    for strategy in SparsifyStrategy::catalog() {
        for p in [0.1, 0.2, 0.3, 0.5] {
            let expected = (p * train.edge_count() as f64).floor() as usize;
            runs += 1;
            match poison_train(train, &settings(strategy, p)) {
                Ok(out) => {
                    if out.removal.len() != expected || out.insertion.len() != expected {
                        failures.push(format!("{strategy} p={p}: {} / {} vs {expected}", out.removal.len(), out.insertion.len()));
                    }
                    if p == 0.3 {
                        at_030.push(out);
                    }
                }
                Err(e) => failures.push(format!("{strategy} p={p}: {e}")),
            }
        }
    }
    let mut detail = format!("{runs} runs, {} failures", failures.len());
    for f in failures.iter().take(3) {
        detail.push_str("; ");
        detail.push_str(f);
    }
    Verdict::new(failures.is_empty() && runs == 64, detail)
}

fn constraint_suite(unipartite: &[PoisonOutcome]) -> Verdict {
    let mut failures = Vec::new();
    let mut worst_ks: f64 = 0.0;
    let mut worst_delta = 0;
    let mut check = |label: &str, r: &AuditReport, bipartite: bool, failures: &mut Vec<String>| {
        worst_ks = worst_ks.max(r.c2.statistic);
        worst_delta = worst_delta.max(r.c4.max_out_delta.max(r.c4.max_in_delta));
        let ok = r.consistency.passed
            && r.c2.applicable
            && r.c2.statistic <= 0.1
            && r.c3.violations == 0
            && r.c4.max_out_delta <= 1
            && r.c4.max_in_delta <= 1
            && r.novelty.violations == 0
            && (!bipartite || (r.bipartite.applicable && r.bipartite.violations == 0));
        if !ok {
            failures.push(format!("{label}: {:?}", r.failed_checks()));
        }
    };
    for out in unipartite {
        check(&out.manifest.meta.strategy, &out.audit, false, &mut failures);
    }
    let bipartite_train = SyntheticStream {
        edges: 10_000,
        nodes: 1000,
        zipf_exponent: 0.5,
        edges_per_timestamp: 10,
        seed: 0,
        ..SyntheticStream::default()
    }
    .bipartite(1000)
    .generate()
    .expect("bipartite stream");
    let mut bipartite_runs = 0;
    for strategy in SparsifyStrategy::catalog() {
        let out = poison_train(&bipartite_train, &settings(strategy, 0.3));
        match out {
            Ok(out) => {
                bipartite_runs += 1;
                check(&format!("bipartite {strategy}"), &out.audit, true, &mut failures);
            }
            Err(e) if matches!(e.root(), Error::UnsupportedOnBipartite(_)) => {}
            Err(e) => failures.push(format!("bipartite {strategy}: {e}")),
        }
    }
    let mut detail = format!(
        "{} unipartite + {bipartite_runs} bipartite runs at p = 0.3, max KS {worst_ks:.4}, max degree delta {worst_delta}, {} failures",
        unipartite.len(),
        failures.len()
    );
    for f in failures.iter().take(3) {
        detail.push_str("; ");
        detail.push_str(f);
    }
    Verdict::new(failures.is_empty() && unipartite.len() == 16 && bipartite_runs == 15, detail)
}

// ---------------------------------------------------------------------
// Planted faults

type Flags = [bool; 7];

fn flags(r: &AuditReport) -> Flags {
    [
        r.consistency.passed,
        r.c1.passed,
        r.c2.passed,
        r.c3.passed,
        r.c4.passed,
        r.novelty.passed,
        r.bipartite.passed,
    ]
}

const FLAG_NAMES: [&str; 7] = ["consistency", "C1", "C2", "C3", "C4", "novelty", "bipartite"];

/// A mutable copy of a poisoned stream and its manifest.
struct Mutant {
    edges: Vec<(NodeId, NodeId, f64)>,
    manifest: Manifest,
}

impl Mutant {
    fn from(out: &PoisonOutcome) -> Self {
        Self {
            edges: out.poisoned.edges().iter().map(|e| (e.source, e.target, e.timestamp)).collect(),
            manifest: out.manifest.clone(),
        }
    }

    fn insertion(&self, i: usize) -> (NodeId, NodeId, f64) {
        let r = &self.manifest.insertions[i];
        (r.source as NodeId, r.target as NodeId, r.timestamp)
    }

    /// Replaces insertion `i` in both the stream and the manifest.
    fn rewrite(&mut self, i: usize, to: (NodeId, NodeId, f64)) {
        let from = self.insertion(i);
        let pos = self
            .edges
            .iter()
            .position(|e| e.0 == from.0 && e.1 == from.1 && e.2.to_bits() == from.2.to_bits())
            .expect("insertion present in the stream");
        self.edges[pos] = to;
        let r = &mut self.manifest.insertions[i];
        r.source = to.0 as u64;
        r.target = to.1 as u64;
        r.timestamp = to.2;
    }

    fn audit(&self, train: &TemporalGraph) -> AuditReport {
        let edges = self
            .edges
            .iter()
            .map(|&(u, v, t)| tgpoison::TemporalEdge::new(u, v, t))
            .collect();
        let poisoned = train.with_edges(edges).expect("mutant stream");
        audit(train, &poisoned, &self.manifest, &AuditConfig::default())
    }
}

struct Facts {
    window: f64,
    times: Vec<Vec<f64>>,
    first_pair: HashMap<(NodeId, NodeId), f64>,
    keys: HashSet<(NodeId, NodeId, u64)>,
    out_delta: Vec<i64>,
    in_delta: Vec<i64>,
}

impl Facts {
    fn new(train: &TemporalGraph, out: &PoisonOutcome) -> Self {
        let mut times = vec![Vec::new(); train.id_space()];
        let mut first_pair = HashMap::new();
        let mut keys = HashSet::new();
        for e in train.edges() {
            times[e.source as usize].push(e.timestamp);
            times[e.target as usize].push(e.timestamp);
            let pair = (e.source.min(e.target), e.source.max(e.target));
            first_pair.entry(pair).or_insert(e.timestamp);
            keys.insert((e.source, e.target, e.timestamp.to_bits()));
        }
        let (o0, i0) = train.degrees();
        let (o1, i1) = out.poisoned.degrees();
        Self {
            window: out.manifest.meta.window,
            times,
            first_pair,
            keys,
            out_delta: o0.iter().zip(&o1).map(|(a, b)| *b as i64 - *a as i64).collect(),
            in_delta: i0.iter().zip(&i1).map(|(a, b)| *b as i64 - *a as i64).collect(),
        }
    }

    fn active(&self, v: NodeId, t: f64) -> bool {
        self.times[v as usize].iter().any(|&x| x >= t - self.window && x <= t)
    }

    fn novel(&self, u: NodeId, v: NodeId, t: f64) -> bool {
        u != v && self.first_pair.get(&(u.min(v), u.max(v))).is_none_or(|&t0| t0 > t)
    }
}

fn plant_budget(train: &TemporalGraph, out: &PoisonOutcome, f: &Facts) -> Option<Mutant> {
    let mut m = Mutant::from(out);
    let removed: HashSet<usize> = out.removal.indices().into_iter().collect();
    let (index, e) = train
        .edges()
        .iter()
        .enumerate()
        .find(|(i, e)| !removed.contains(i) && f.out_delta[e.source as usize] >= 0 && f.in_delta[e.target as usize] >= 0)?;
    let pos = m
        .edges
        .iter()
        .position(|x| x.0 == e.source && x.1 == e.target && x.2.to_bits() == e.timestamp.to_bits())?;
    m.edges.remove(pos);
    m.manifest.removals.push(RemoveRecord {
        edge_index: index,
        source: e.source as u64,
        target: e.target as u64,
        timestamp: e.timestamp,
        score: 0.0,
        rank: m.manifest.removals.len(),
        strategy: "planted".into(),
    });
    Some(m)
}

fn plant_distribution(train: &TemporalGraph, out: &PoisonOutcome, f: &Facts) -> Option<Mutant> {
    let mut m = Mutant::from(out);
    let stamps = train.distinct_timestamps();
    for i in 0..m.manifest.insertions.len() {
        let (u, v, t) = m.insertion(i);
        let earliest = stamps.iter().copied().find(|&s| s <= t && f.active(u, s) && f.active(v, s))?;
        m.rewrite(i, (u, v, earliest));
    }
    Some(m)
}

fn plant_activity(train: &TemporalGraph, out: &PoisonOutcome, f: &Facts) -> Option<Mutant> {
    let mut m = Mutant::from(out);
    let t0 = train.edges().first()?.timestamp;
    let i = (0..m.manifest.insertions.len()).find(|&i| {
        let (u, v, _) = m.insertion(i);
        !f.active(u, t0) || !f.active(v, t0)
    })?;
    let (u, v, _) = m.insertion(i);
    m.rewrite(i, (u, v, t0));
    Some(m)
}

fn plant_degree(out: &PoisonOutcome, f: &Facts) -> Option<Mutant> {
    let mut m = Mutant::from(out);
    let inserted: HashSet<(NodeId, NodeId)> = (0..m.manifest.insertions.len())
        .map(|i| {
            let (u, v, _) = m.insertion(i);
            (u.min(v), u.max(v))
        })
        .collect();
    for w in 0..f.in_delta.len() as NodeId {
        let need = 2 - f.in_delta[w as usize];
        if !(1..=2).contains(&need) {
            continue;
        }
        let picks: Vec<usize> = (0..m.manifest.insertions.len())
            .filter(|&i| {
                let (u, v, t) = m.insertion(i);
                v != w
                    && f.in_delta[v as usize] >= 0
                    && f.active(w, t)
                    && f.novel(u, w, t)
                    && !inserted.contains(&(u.min(w), u.max(w)))
            })
            .take(need as usize)
            .collect();
        let distinct_sources: BTreeSet<NodeId> = picks.iter().map(|&i| m.insertion(i).0).collect();
        if picks.len() == need as usize && distinct_sources.len() == picks.len() {
            for i in picks {
                let (u, _, t) = m.insertion(i);
                m.rewrite(i, (u, w, t));
            }
            return Some(m);
        }
    }
    None
}

fn plant_novelty(train: &TemporalGraph, out: &PoisonOutcome, f: &Facts) -> Option<Mutant> {
    let mut m = Mutant::from(out);
    for i in 0..m.manifest.insertions.len() {
        let (u, v, t) = m.insertion(i);
        if f.in_delta[v as usize] < 0 {
            continue;
        }
        let partner = train.edges().iter().find_map(|e| {
            let w = if e.source == u { e.target } else if e.target == u { e.source } else { return None };
            (e.timestamp <= t
                && w != v
                && f.in_delta[w as usize] <= 0
                && f.active(w, t)
                && !f.keys.contains(&(u, w, t.to_bits())))
            .then_some(w)
        });
        if let Some(w) = partner {
            m.rewrite(i, (u, w, t));
            return Some(m);
        }
    }
    None
}

fn planted_faults(train: &TemporalGraph, out: &PoisonOutcome) -> Verdict {
    let base = flags(&out.audit);
    if base.iter().any(|ok| !ok) {
        return Verdict::new(false, format!("clean run already fails {:?}", out.audit.failed_checks()));
    }
    let f = Facts::new(train, out);
    let cases: [(usize, Option<Mutant>); 5] = [
        (1, plant_budget(train, out, &f)),
        (2, plant_distribution(train, out, &f)),
        (3, plant_activity(train, out, &f)),
        (4, plant_degree(out, &f)),
        (5, plant_novelty(train, out, &f)),
    ];
    let mut parts = Vec::new();
    let mut all = true;
    for (flag, mutant) in cases {
        let Some(mutant) = mutant else {
            all = false;
            parts.push(format!("{}: no mutation site", FLAG_NAMES[flag]));
            continue;
        };
        let got = flags(&mutant.audit(train));
        let flipped: Vec<&str> = (0..7).filter(|&k| got[k] != base[k]).map(|k| FLAG_NAMES[k]).collect();
        let ok = flipped == [FLAG_NAMES[flag]];
        all &= ok;
        parts.push(format!("{} fault flips {:?}", FLAG_NAMES[flag], flipped));
    }
    Verdict::new(all, parts.join(", "))
}

// ---------------------------------------------------------------------
// Determinism and monotonicity

fn jaccard(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        1.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

fn determinism(train: &TemporalGraph, reference: &PoisonOutcome) -> Verdict {
    let strategy = SparsifyStrategy::drift(DriftKind::Cosine);
    let first = poison_train(train, &settings(strategy, 0.3)).unwrap().manifest.to_jsonl();
    let second = poison_train(train, &settings(strategy, 0.3)).unwrap().manifest.to_jsonl();
    let identical = first == second && first == reference.manifest.to_jsonl();

    let stream = prefix_stable_stream(5000, 40, 0.3, 0).unwrap();
    let options = SparsifyOptions {
        budget_base: BudgetBase::Visible,
        ..SparsifyOptions::default()
    };
    let sparsifier = Sparsifier::with_options(strategy, options);
    let ks = [0.2, 0.4, 0.8];
    let sets: Vec<BTreeSet<usize>> = ks
        .iter()
        .map(|&k| sparsifier.select(&stream, 0.1, k).unwrap().indices().into_iter().collect())
        .collect();
    let nested = sets[0].len() < sets[1].len()
        && sets[1].len() < sets[2].len()
        && sets[0].is_subset(&sets[1])
        && sets[1].is_subset(&sets[2]);
    let mut monotone = true;
    for i in 0..ks.len() {
        let mut row: Vec<(f64, f64)> = (0..ks.len())
            .filter(|&j| j != i)
            .map(|j| ((ks[i] - ks[j]).abs(), jaccard(&sets[i], &sets[j])))
            .collect();
        row.sort_by(|a, b| a.0.total_cmp(&b.0));
        monotone &= row.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    }
    Verdict::new(
        identical && nested && monotone,
        format!(
            "manifests identical {identical}, removal sets {:?} nested {nested}, Jaccard(0.2,0.4) {:.3} (0.4,0.8) {:.3} (0.2,0.8) {:.3} monotone {monotone}",
            sets.iter().map(BTreeSet::len).collect::<Vec<_>>(),
            jaccard(&sets[0], &sets[1]),
            jaccard(&sets[1], &sets[2]),
            jaccard(&sets[0], &sets[2]),
        ),
    )
}

// ---------------------------------------------------------------------
// Scaling

fn scaling(train: &TemporalGraph) -> Verdict {
    let streams: Vec<TemporalGraph> = [1, 2, 4].iter().map(|&c| replicate(train, c).unwrap()).collect();
    let report = benchmark(&streams, &settings(SparsifyStrategy::drift(DriftKind::Cosine), 0.3), 5).unwrap();
    let ok = (0.8..=1.3).contains(&report.tpr_slope) && report.selector_slope <= 1.3;
    let times: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{}: tpr {:.4}s selector {:.4}s", r.edges, r.tpr_seconds, r.selector_seconds))
        .collect();
    Verdict::new(
        ok,
        format!("tpr slope {:.3}, selector slope {:.3} ({})", report.tpr_slope, report.selector_slope, times.join(", ")),
    )
}

// ---------------------------------------------------------------------
// Recovery liveness

fn recovery_liveness() -> Verdict {
    let inst = starvation_instance().unwrap();
    let mut plan = RemovalPlan::empty(SparsifyStrategy::drift(DriftKind::Cosine), 1.0, inst.graph.edge_count());
    plan.removed.push(RemovedEdge {
        index: inst.removed,
        score: 0.0,
        rank: 0,
    });
    plan.budget = 1;
    let main_only = SamplerParams {
        window: inst.window,
        max_attempts: 0,
        ..SamplerParams::default()
    };
    let starved = timestamp_selector(&inst.graph, &plan, &main_only)
        .is_err_and(|e| matches!(e.root(), Error::SamplingInfeasible { .. }));
    let params = SamplerParams {
        window: inst.window,
        ..SamplerParams::default()
    };
    let insertion = match timestamp_selector(&inst.graph, &plan, &params) {
        Ok(ins) => ins,
        Err(e) => return Verdict::new(false, format!("recovery failed: {e}")),
    };
    let meta = ManifestMeta {
        strategy: "TPR-Cosine".into(),
        mode: RunMode::Attack,
        p: 1.0 / inst.graph.edge_count() as f64,
        knowledge: 1.0,
        budget: 1,
        train_edges: inst.graph.edge_count(),
        window: inst.window,
        node_capacity: params.node_capacity,
        seed: params.seed,
        priority: "deletion-deficit".into(),
    };
    let manifest = Manifest::from_plans(&inst.graph, meta, Some(&plan), Some(&insertion)).unwrap();
    let poisoned = tgpoison::sampler::insertion_positioning(&inst.graph, &plan, &insertion).unwrap();
    let report = audit(&inst.graph, &poisoned, &manifest, &AuditConfig::default());
    let recorded = manifest.max_round() >= 1 && manifest.insertions.iter().all(|r| r.recovery && r.round >= 1);
    Verdict::new(
        starved && recorded && report.passed(),
        format!(
            "main pass alone infeasible {starved}, inserted {} in round {}, manifest records recovery {recorded}, audit {}",
            insertion.len(),
            manifest.max_round(),
            if report.passed() { "passes" } else { "fails" }
        ),
    )
}

// ---------------------------------------------------------------------

fn report(id: usize, name: &str, limit_seconds: f64, start: Instant, verdict: Verdict) -> bool {
    let elapsed = start.elapsed().as_secs_f64();
    let in_time = elapsed < limit_seconds;
    let passed = verdict.passed && in_time;
    println!(
        "{} [{id}] {name}: {} ({elapsed:.2}s, limit {limit_seconds:.0}s)",
        if passed { "PASS" } else { "FAIL" },
        verdict.detail
    );
    passed
}

fn main() -> ExitCode {
    let mut passed = 0;
    let mut total = 0;
    let mut tally = |ok: bool| {
        total += 1;
        passed += usize::from(ok);
    };

    let start = Instant::now();
    tally(report(1, "TPR oracle equivalence", 10.0, start, tpr_oracle()));

    let start = Instant::now();
    tally(report(2, "Drift-metric oracle", 5.0, start, drift_oracle()));

    let train = base_stream();
    let mut at_030 = Vec::new();
    let start = Instant::now();
    tally(report(3, "Budget exactness", 120.0, start, budget_exactness(&train, &mut at_030)));

    let start = Instant::now();
    tally(report(4, "Constraint suite", 300.0, start, constraint_suite(&at_030)));

    let degree = at_030.iter().find(|o| o.manifest.meta.strategy == "Degree");
    let start = Instant::now();
    let verdict = match degree {
        Some(out) => planted_faults(&train, out),
        None => Verdict::new(false, "no clean Degree run to mutate"),
    };
    tally(report(5, "Planted-fault sensitivity", 60.0, start, verdict));

    let cosine = at_030.iter().find(|o| o.manifest.meta.strategy == "TPR-Cosine");
    let start = Instant::now();
    let verdict = match cosine {
        Some(out) => determinism(&train, out),
        None => Verdict::new(false, "no TPR-Cosine run to compare"),
    };
    tally(report(6, "Determinism and monotonicity", 60.0, start, verdict));

    let start = Instant::now();
    tally(report(7, "Scaling", 300.0, start, scaling(&train)));

    let start = Instant::now();
    tally(report(8, "Recovery liveness", 10.0, start, recovery_liveness()));

    println!("acceptance: {passed}/{total} criteria passed");
    if passed == total {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
