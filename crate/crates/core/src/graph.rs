//! Continuous-time dynamic graphs: the timestamped edge stream, its CSV
//! representation, chronological splits, static aggregates and activity
//! queries.
//!
//! Node ids are remapped to dense `u32` indices on load. The remapping
//! table is shared (via `Arc`) by every graph derived from the same
//! dataset, so train/val/test pieces and poisoned copies index the same
//! node space.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u32;

/// Which id column a raw node id came from.
///
/// Bipartite datasets number users and items independently, so the same
/// raw id may denote two different nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
    Shared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub timestamp: f64,
    pub label: i64,
    pub features: Vec<f64>,
}

impl TemporalEdge {
    pub fn new(source: NodeId, target: NodeId, timestamp: f64) -> Self {
        Self {
            source,
            target,
            timestamp,
            label: 0,
            features: Vec::new(),
        }
    }
}

/// Raw-id ↔ dense-id mapping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeTable {
    raw: Vec<u64>,
    side: Vec<Side>,
    lookup: HashMap<(Side, u64), NodeId>,
}

impl NodeTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn intern(&mut self, side: Side, raw: u64) -> NodeId {
        if let Some(&id) = self.lookup.get(&(side, raw)) {
            return id;
        }
        let id = self.raw.len() as NodeId;
        self.raw.push(raw);
        self.side.push(side);
        self.lookup.insert((side, raw), id);
        id
    }

    pub fn get(&self, side: Side, raw: u64) -> Option<NodeId> {
        self.lookup.get(&(side, raw)).copied()
    }

    pub fn raw_id(&self, id: NodeId) -> u64 {
        self.raw[id as usize]
    }

    pub fn side(&self, id: NodeId) -> Side {
        self.side[id as usize]
    }
}

/// Dataset descriptor, usually read from a small TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFormat {
    pub name: String,
    #[serde(default)]
    pub bipartite: bool,
    #[serde(default)]
    pub feature_count: Option<usize>,
}

impl DatasetFormat {
    pub fn new(name: impl Into<String>, bipartite: bool) -> Self {
        Self {
            name: name.into(),
            bipartite,
            feature_count: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

pub const DEFAULT_HEADER: &str = "user_id,item_id,timestamp,state_label,comma_separated_list_of_features";

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGraph {
    edges: Vec<TemporalEdge>,
    nodes: Arc<NodeTable>,
    bipartite: bool,
    feature_dim: usize,
    header: String,
}

impl TemporalGraph {
    /// Builds a graph, stably sorting `edges` by timestamp.
    pub fn from_edges(
        mut edges: Vec<TemporalEdge>,
        nodes: Arc<NodeTable>,
        bipartite: bool,
    ) -> Result<Self> {
        if !is_time_sorted(&edges) {
            edges.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        }
        let feature_dim = edges.first().map_or(0, |e| e.features.len());
        let graph = Self {
            edges,
            nodes,
            bipartite,
            feature_dim,
            header: DEFAULT_HEADER.to_string(),
        };
        graph.validate()?;
        Ok(graph)
    }

    /// Graph over an explicit `(source, target, timestamp)` list with a
    /// fresh unipartite node table whose raw ids equal the dense ids.
    pub fn from_triples(triples: &[(u64, u64, f64)]) -> Result<Self> {
        let mut table = NodeTable::new();
        let mut max = 0;
        for &(u, v, _) in triples {
            max = max.max(u).max(v);
        }
        if !triples.is_empty() {
            for raw in 0..=max {
                table.intern(Side::Shared, raw);
            }
        }
        let edges = triples
            .iter()
            .map(|&(u, v, t)| TemporalEdge::new(u as NodeId, v as NodeId, t))
            .collect();
        Self::from_edges(edges, Arc::new(table), false)
    }

    /// Same node space, flags and header, different edges.
    pub fn with_edges(&self, edges: Vec<TemporalEdge>) -> Result<Self> {
        let mut graph = Self::from_edges(edges, Arc::clone(&self.nodes), self.bipartite)?;
        graph.feature_dim = self.feature_dim;
        graph.header = self.header.clone();
        Ok(graph)
    }

    pub(crate) fn with_edges_unchecked(&self, edges: Vec<TemporalEdge>) -> Self {
        Self {
            edges,
            nodes: Arc::clone(&self.nodes),
            bipartite: self.bipartite,
            feature_dim: self.feature_dim,
            header: self.header.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (i, e) in self.edges.iter().enumerate() {
            let bad = |msg: String| Err(Error::InvalidParameter(format!("edge {i}: {msg}")));
            if e.source as usize >= n || e.target as usize >= n {
                return bad("node id outside the node table".into());
            }
            if e.source == e.target {
                return bad("self-loop".into());
            }
            if !e.timestamp.is_finite() || e.timestamp < 0.0 {
                return bad(format!("timestamp {} is not finite and non-negative", e.timestamp));
            }
            if self.bipartite
                && (self.nodes.side(e.source) != Side::Source
                    || self.nodes.side(e.target) != Side::Target)
            {
                return bad("endpoints violate the bipartition".into());
            }
            if e.features.len() != self.feature_dim {
                return bad(format!(
                    "{} features, expected {}",
                    e.features.len(),
                    self.feature_dim
                ));
            }
        }
        Ok(())
    }

    pub fn edges(&self) -> &[TemporalEdge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Number of distinct nodes appearing in the edges.
    pub fn node_count(&self) -> usize {
        let mut seen = vec![false; self.nodes.len()];
        let mut count = 0;
        for e in &self.edges {
            for x in [e.source, e.target] {
                if !std::mem::replace(&mut seen[x as usize], true) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Size of the shared dense id space.
    pub fn id_space(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &Arc<NodeTable> {
        &self.nodes
    }

    pub fn is_bipartite(&self) -> bool {
        self.bipartite
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn header(&self) -> &str {
        &self.header
    }

    /// (source-side nodes, target-side nodes) present in the edges; `None`
    /// for unipartite graphs.
    pub fn partition(&self) -> Option<(BTreeSet<NodeId>, BTreeSet<NodeId>)> {
        if !self.bipartite {
            return None;
        }
        let sources = self.edges.iter().map(|e| e.source).collect();
        let targets = self.edges.iter().map(|e| e.target).collect();
        Some((sources, targets))
    }

    /// Sorted distinct timestamps.
    pub fn distinct_timestamps(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for e in &self.edges {
            if out.last() != Some(&e.timestamp) {
                out.push(e.timestamp);
            }
        }
        out
    }

    /// Index ranges of edges sharing a timestamp, in time order.
    pub fn timestamp_groups(&self) -> Vec<Range<usize>> {
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=self.edges.len() {
            if i == self.edges.len() || self.edges[i].timestamp != self.edges[start].timestamp {
                groups.push(start..i);
                start = i;
            }
        }
        groups
    }

    /// Edge index range with timestamps in the closed interval `[lo, hi]`.
    pub fn time_range(&self, lo: f64, hi: f64) -> Range<usize> {
        let start = self.edges.partition_point(|e| e.timestamp < lo);
        let end = self.edges.partition_point(|e| e.timestamp <= hi);
        start..end.max(start)
    }

    /// Whole-stream out- and in-degrees (with multiplicity).
    pub fn degrees(&self) -> (Vec<u32>, Vec<u32>) {
        let mut out = vec![0; self.id_space()];
        let mut inn = vec![0; self.id_space()];
        for e in &self.edges {
            out[e.source as usize] += 1;
            inn[e.target as usize] += 1;
        }
        (out, inn)
    }

    /// First `count` edges in stream order.
    pub fn prefix(&self, count: usize) -> TemporalGraph {
        self.with_edges_unchecked(self.edges[..count.min(self.edges.len())].to_vec())
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.timestamp).collect()
    }
}

fn is_time_sorted(edges: &[TemporalEdge]) -> bool {
    edges.windows(2).all(|w| w[0].timestamp <= w[1].timestamp)
}

/// Parses a header-bearing `user_id,item_id,timestamp,state_label,f1,...`
/// stream.
pub fn parse_edge_stream(text: &str, format: &DatasetFormat) -> Result<TemporalGraph> {
    read_edge_stream(text.as_bytes(), format)
}

pub fn read_edge_stream<R: BufRead>(reader: R, format: &DatasetFormat) -> Result<TemporalGraph> {
    read_edge_stream_into(reader, format, NodeTable::new())
}

/// Like [`read_edge_stream`] but extends an existing node table, so the
/// result shares id assignments with a previously loaded graph. Raw ids
/// unknown to `base` are appended.
pub fn read_edge_stream_into<R: BufRead>(
    reader: R,
    format: &DatasetFormat,
    base: NodeTable,
) -> Result<TemporalGraph> {
    let mut table = base;
    let mut edges = Vec::new();
    let mut header: Option<String> = None;
    let mut feature_dim = format.feature_count;
    let (src_side, dst_side) = if format.bipartite {
        (Side::Source, Side::Target)
    } else {
        (Side::Shared, Side::Shared)
    };

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(line.to_string());
            continue;
        }
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(err(format!("expected at least 3 columns, found {}", fields.len())));
        }
        let parse_id = |s: &str, what: &str| {
            s.parse::<u64>()
                .map_err(|_| err(format!("{what} `{s}` is not a non-negative integer")))
        };
        let src = parse_id(fields[0], "source id")?;
        let dst = parse_id(fields[1], "target id")?;
        let timestamp: f64 = fields[2]
            .parse()
            .map_err(|_| err(format!("timestamp `{}` is not a number", fields[2])))?;
        if !timestamp.is_finite() || timestamp < 0.0 {
            return Err(err(format!("timestamp {timestamp} must be finite and non-negative")));
        }
        let label = match fields.get(3) {
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|x| x.fract() == 0.0)
                .map(|x| x as i64)
                .ok_or_else(|| err(format!("label `{s}` is not an integer")))?,
            None => 0,
        };
        let features = fields
            .iter()
            .skip(4)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| err(format!("feature `{s}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match feature_dim {
            Some(k) if k != features.len() => {
                return Err(err(format!("{} features, expected {k}", features.len())));
            }
            None => feature_dim = Some(features.len()),
            _ => {}
        }
        if !format.bipartite && src == dst {
            return Err(err(format!("self-loop on node {src}")));
        }
        let source = table.intern(src_side, src);
        let target = table.intern(dst_side, dst);
        edges.push(TemporalEdge {
            source,
            target,
            timestamp,
            label,
            features,
        });
    }

    if edges.is_empty() {
        return Err(Error::EmptyStream);
    }
    if !is_time_sorted(&edges) {
        log::warn!(
            "{}: timestamps are not monotone; re-sorting {} edges",
            format.name,
            edges.len()
        );
    }
    let mut graph = TemporalGraph::from_edges(edges, Arc::new(table), format.bipartite)?;
    graph.feature_dim = feature_dim.unwrap_or(0);
    graph.header = header.unwrap_or_else(|| DEFAULT_HEADER.to_string());
    Ok(graph)
}

pub fn load_edge_stream(path: impl AsRef<Path>, format: &DatasetFormat) -> Result<TemporalGraph> {
    let file = std::fs::File::open(path)?;
    read_edge_stream(std::io::BufReader::new(file), format)
}

/// Writes the graph in the same CSV layout it was parsed from, using the
/// original raw node ids. Reals use the shortest representation that
/// parses back to the identical `f64`.
pub fn write_edge_stream<W: Write>(graph: &TemporalGraph, mut out: W) -> Result<()> {
    writeln!(out, "{}", graph.header)?;
    let mut line = String::new();
    for e in &graph.edges {
        use std::fmt::Write as _;
        line.clear();
        let _ = write!(
            line,
            "{},{},{},{}",
            graph.nodes.raw_id(e.source),
            graph.nodes.raw_id(e.target),
            e.timestamp,
            e.label
        );
        for f in &e.features {
            let _ = write!(line, ",{f}");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn edge_stream_to_string(graph: &TemporalGraph) -> String {
    let mut buf = Vec::new();
    write_edge_stream(graph, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

/// `⌊fraction · n⌋`, snapping products within 1e-9 (relative) of an
/// integer so that e.g. `0.7 · 100` is 70 rather than 69.
pub fn floor_fraction(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let nearest = x.round();
    let v = if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest
    } else {
        x.floor()
    };
    v.max(0.0) as usize
}

/// Splits into train/val/test by stream order: `⌊r₀·|E|⌋`, `⌊r₁·|E|⌋`
/// and the remainder.
pub fn chronological_split(
    graph: &TemporalGraph,
    ratios: (f64, f64, f64),
) -> Result<(TemporalGraph, TemporalGraph, TemporalGraph)> {
    let (a, b, c) = ratios;
    let sum = a + b + c;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::RatioSum(sum));
    }
    if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::InvalidParameter(format!("split ratios {ratios:?} outside [0, 1]")));
    }
    if graph.is_empty() {
        return Err(Error::EmptyStream);
    }
    let n = graph.edge_count();
    let train = floor_fraction(a, n);
    let val = floor_fraction(b, n).min(n - train);
    if train == 0 || val == 0 || train + val == n {
        log::warn!("degenerate split of {n} edges: train {train}, val {val}, test {}", n - train - val);
    }
    let piece = |r: Range<usize>| graph.with_edges_unchecked(graph.edges[r].to_vec());
    Ok((piece(0..train), piece(train..train + val), piece(train + val..n)))
}

/// Static aggregate `G^(i)` of all edges with `t ≤ cutoff`.
///
/// Adjacency is undirected with multiplicities; degrees are directed and
/// counted with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticAggregate {
    pub cutoff: f64,
    neighbors: Vec<BTreeMap<NodeId, u32>>,
    out_degree: Vec<u32>,
    in_degree: Vec<u32>,
    edge_count: usize,
}

impl StaticAggregate {
    pub fn empty(id_space: usize, cutoff: f64) -> Self {
        Self {
            cutoff,
            neighbors: vec![BTreeMap::new(); id_space],
            out_degree: vec![0; id_space],
            in_degree: vec![0; id_space],
            edge_count: 0,
        }
    }

    pub(crate) fn add_edge(&mut self, source: NodeId, target: NodeId) {
        *self.neighbors[source as usize].entry(target).or_insert(0) += 1;
        *self.neighbors[target as usize].entry(source).or_insert(0) += 1;
        self.out_degree[source as usize] += 1;
        self.in_degree[target as usize] += 1;
        self.edge_count += 1;
    }

    pub fn id_space(&self) -> usize {
        self.neighbors.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Distinct neighbors `N(u)` in ascending id order.
    pub fn neighbors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.neighbors[u as usize].keys().copied()
    }

    /// `|N(u)|`.
    pub fn neighbor_count(&self, u: NodeId) -> usize {
        self.neighbors[u as usize].len()
    }

    pub fn multiplicity(&self, u: NodeId, v: NodeId) -> u32 {
        self.neighbors[u as usize].get(&v).copied().unwrap_or(0)
    }

    pub fn out_degree(&self, u: NodeId) -> u32 {
        self.out_degree[u as usize]
    }

    pub fn in_degree(&self, u: NodeId) -> u32 {
        self.in_degree[u as usize]
    }

    /// `|N(u) ∩ N(v)|`.
    pub fn common_neighbors(&self, u: NodeId, v: NodeId) -> usize {
        let (a, b) = (&self.neighbors[u as usize], &self.neighbors[v as usize]);
        let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        small.keys().filter(|k| large.contains_key(k)).count()
    }
}

pub fn aggregate_until(graph: &TemporalGraph, cutoff: f64) -> StaticAggregate {
    let mut agg = StaticAggregate::empty(graph.id_space(), cutoff);
    for e in graph.edges.iter().take_while(|e| e.timestamp <= cutoff) {
        agg.add_edge(e.source, e.target);
    }
    agg
}

/// Endpoints of every edge with timestamp in `[t − window, t]`.
pub fn active_nodes(graph: &TemporalGraph, t: f64, window: f64) -> Result<BTreeSet<NodeId>> {
    if !(window > 0.0) {
        return Err(Error::InvalidParameter(format!("window must be positive, got {window}")));
    }
    Ok(graph.edges[graph.time_range(t - window, t)]
        .iter()
        .flat_map(|e| [e.source, e.target])
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Out,
    In,
}

impl Direction {
    pub fn opposite(self) -> Direction {
        match self {
            Direction::Out => Direction::In,
            Direction::In => Direction::Out,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeBalance {
    pub original_out: u32,
    pub original_in: u32,
    pub deletions_out: u32,
    pub deletions_in: u32,
    pub insertions_out: u32,
    pub insertions_in: u32,
}

impl NodeBalance {
    /// Insertions minus deletions in one direction.
    pub fn net(&self, dir: Direction) -> i64 {
        match dir {
            Direction::Out => self.insertions_out as i64 - self.deletions_out as i64,
            Direction::In => self.insertions_in as i64 - self.deletions_in as i64,
        }
    }

    pub fn deletions(&self) -> u32 {
        self.deletions_out + self.deletions_in
    }

    pub fn original_degree(&self) -> u32 {
        self.original_out + self.original_in
    }
}

/// Per-node deletion/insertion bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeLedger {
    entries: Vec<NodeBalance>,
}

impl DegreeLedger {
    pub fn from_graph(graph: &TemporalGraph) -> Self {
        let (out, inn) = graph.degrees();
        let entries = out
            .into_iter()
            .zip(inn)
            .map(|(o, i)| NodeBalance {
                original_out: o,
                original_in: i,
                ..NodeBalance::default()
            })
            .collect();
        Self { entries }
    }

    pub fn record_deletion(&mut self, source: NodeId, target: NodeId) {
        self.entries[source as usize].deletions_out += 1;
        self.entries[target as usize].deletions_in += 1;
    }

    pub fn record_insertion(&mut self, source: NodeId, target: NodeId) {
        self.entries[source as usize].insertions_out += 1;
        self.entries[target as usize].insertions_in += 1;
    }

    pub fn get(&self, v: NodeId) -> &NodeBalance {
        &self.entries[v as usize]
    }

    pub fn net(&self, v: NodeId, dir: Direction) -> i64 {
        self.entries[v as usize].net(dir)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &NodeBalance)> {
        self.entries.iter().enumerate().map(|(i, b)| (i as NodeId, b))
    }
}
