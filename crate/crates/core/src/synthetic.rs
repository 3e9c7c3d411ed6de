//! Seeded synthetic edge streams for tests, benchmarks and demos.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeTable, Side, TemporalEdge, TemporalGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticStream {
    /// Unipartite node count, or the source partition size.
    pub nodes: usize,
    /// Target partition size; `0` gives a unipartite stream.
    pub targets: usize,
    pub edges: usize,
    pub edges_per_timestamp: usize,
    pub time_step: f64,
    /// Endpoint `i` is drawn with weight `(i + 1)^(−s)`.
    pub zipf_exponent: f64,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for SyntheticStream {
    fn default() -> Self {
        Self {
            nodes: 200,
            targets: 0,
            edges: 10_000,
            edges_per_timestamp: 5,
            time_step: 1.0,
            zipf_exponent: 0.5,
            feature_dim: 0,
            seed: 0,
        }
    }
}

fn zipf(n: usize, s: f64) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new((0..n).map(|i| ((i + 1) as f64).powf(-s)))
        .map_err(|e| Error::InvalidParameter(format!("endpoint weights: {e}")))
}

impl SyntheticStream {
    pub fn bipartite(mut self, targets: usize) -> Self {
        self.targets = targets;
        self
    }

    pub fn generate(&self) -> Result<TemporalGraph> {
        let bipartite = self.targets > 0;
        if self.nodes < 2 && !bipartite {
            return Err(Error::InvalidParameter("need at least 2 nodes".into()));
        }
        if self.nodes == 0 || self.edges_per_timestamp == 0 || !(self.time_step > 0.0) {
            return Err(Error::InvalidParameter("nodes, edges_per_timestamp and time_step must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut table = NodeTable::new();
        let (src_side, dst_side) = if bipartite {
            (Side::Source, Side::Target)
        } else {
            (Side::Shared, Side::Shared)
        };
        for raw in 0..self.nodes {
            table.intern(src_side, raw as u64);
        }
        let target_base = if bipartite {
            for raw in 0..self.targets {
                table.intern(dst_side, raw as u64);
            }
            self.nodes
        } else {
            0
        };
        let src_dist = zipf(self.nodes, self.zipf_exponent)?;
        let dst_dist = if bipartite {
            zipf(self.targets, self.zipf_exponent)?
        } else {
            src_dist.clone()
        };

        let mut edges = Vec::with_capacity(self.edges);
        for i in 0..self.edges {
            let u = src_dist.sample(&mut rng);
            let mut v = dst_dist.sample(&mut rng);
            while !bipartite && v == u {
                v = dst_dist.sample(&mut rng);
            }
            let t = (i / self.edges_per_timestamp) as f64 * self.time_step;
            let mut e = TemporalEdge::new(u as u32, (target_base + v) as u32, t);
            e.features = vec![0.0; self.feature_dim];
            edges.push(e);
        }
        let mut graph = TemporalGraph::from_edges(edges, Arc::new(table), bipartite)?;
        if self.feature_dim > 0 {
            graph = graph.with_edges(graph.edges().to_vec())?;
        }
        Ok(graph)
    }
}

/// Concatenates `copies` shifted copies of `graph`, each starting one
/// time unit after the previous copy ends.
pub fn replicate(graph: &TemporalGraph, copies: usize) -> Result<TemporalGraph> {
    if graph.is_empty() || copies == 0 {
        return Err(Error::EmptyStream);
    }
    let first = graph.edges()[0].timestamp;
    let last = graph.edges()[graph.edge_count() - 1].timestamp;
    let span = last - first + 1.0;
    let mut edges = Vec::with_capacity(graph.edge_count() * copies);
    for c in 0..copies {
        for e in graph.edges() {
            let mut e = e.clone();
            e.timestamp += c as f64 * span;
            edges.push(e);
        }
    }
    graph.with_edges(edges)
}

/// A stream whose first `core_fraction` is dense traffic among `core`
/// nodes and whose tail is one-off interactions between fresh node pairs.
/// Edge scores that depend only on the past are then identical on every
/// prefix, and tail edges never outrank core edges.
pub fn prefix_stable_stream(edges: usize, core: usize, core_fraction: f64, seed: u64) -> Result<TemporalGraph> {
    if core < 2 || !(0.0..=1.0).contains(&core_fraction) {
        return Err(Error::InvalidParameter("need at least 2 core nodes and a fraction in [0, 1]".into()));
    }
    let core_edges = crate::graph::floor_fraction(core_fraction, edges);
    let tail_edges = edges - core_edges;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = zipf(core, 0.3)?;
    let mut triples = Vec::with_capacity(edges);
    for i in 0..core_edges {
        let u = dist.sample(&mut rng);
        let mut v = dist.sample(&mut rng);
        while v == u {
            v = dist.sample(&mut rng);
        }
        triples.push((u as u64, v as u64, i as f64));
    }
    for j in 0..tail_edges {
        let a = (core + 2 * j) as u64;
        triples.push((a, a + 1, (core_edges + j) as f64));
    }
    TemporalGraph::from_triples(&triples)
}

/// A stream, one edge to remove and a window under which the insertion
/// main pass cannot succeed but a recovery round can.
#[derive(Debug, Clone)]
pub struct StarvationInstance {
    pub graph: TemporalGraph,
    pub removed: usize,
    pub window: f64,
}

/// Nodes 0 and 1 interact at t = 0, 1, 2 and the middle edge is removed.
/// Nodes 2..=5 interact from t = 100 on. Within the window, 0 and 1 only
/// ever see each other, so no novel partner exists for the nodes that
/// lost an edge; only the wider candidate set of a recovery round finds
/// a novel pair among 2..=5.
pub fn starvation_instance() -> Result<StarvationInstance> {
    let triples = [
        (0, 1, 0.0),
        (0, 1, 1.0),
        (0, 1, 2.0),
        (2, 3, 100.0),
        (4, 5, 101.0),
        (2, 3, 102.0),
        (4, 5, 103.0),
    ];
    Ok(StarvationInstance {
        graph: TemporalGraph::from_triples(&triples)?,
        removed: 1,
        window: 5.0,
    })
}
