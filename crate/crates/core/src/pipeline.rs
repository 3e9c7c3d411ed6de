//! End-to-end runs: configuration, the in-memory attack on a training
//! stream, ADD/REM baselines, on-disk outputs and timing benchmarks.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::audit::{audit, AuditConfig, AuditReport};
use crate::drift::DriftMetric;
use crate::error::{Error, Result, Stage, StageExt};
use crate::graph::{
    chronological_split, load_edge_stream, write_edge_stream, DatasetFormat, NodeId, Side, StaticAggregate, TemporalGraph,
};
use crate::manifest::{Manifest, ManifestMeta, RunMode};
use crate::sampler::{fit_kde, insertion_positioning, timestamp_selector, InsertedEdge, InsertionPlan, SamplerParams};
use crate::sparsify::{
    compute_budget, pair_score, static_pagerank, BudgetBase, Heuristic, PageRankParams, RemovalPlan, RemovedEdge, Sparsifier,
    SparsifyOptions, SparsifyStrategy,
};
use crate::tpr::{compute_tpr_stream, SnapshotKind, TprParams};

/// Node ordering rule recorded in manifests.
pub const PRIORITY_RULE: &str = "deletion-deficit, then original degree, then id";

/// A tunable value together with whether the attack's original
/// description fixes it.
///
/// In TOML either a bare value (`alpha = 0.85`) or a table
/// (`alpha = { value = 0.85, method_specified = false }`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Param<T> {
    pub value: T,
    pub method_specified: bool,
}

impl<T> Param<T> {
    pub fn unspecified(value: T) -> Self {
        Self {
            value,
            method_specified: false,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ParamRepr<T> {
    Full {
        value: T,
        #[serde(default)]
        method_specified: bool,
    },
    Bare(T),
}

impl<T: Serialize + Clone> Serialize for Param<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ParamRepr::Full {
            value: self.value.clone(),
            method_specified: self.method_specified,
        }
        .serialize(serializer)
    }
}

impl<'de, T: DeserializeOwned> Deserialize<'de> for Param<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Ok(match ParamRepr::<T>::deserialize(deserializer)? {
            ParamRepr::Full { value, method_specified } => Param { value, method_specified },
            ParamRepr::Bare(value) => Param::unspecified(value),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub path: Option<PathBuf>,
    pub name: Option<String>,
    /// Separate TOML file holding a [`DatasetFormat`].
    pub descriptor: Option<PathBuf>,
    pub bipartite: bool,
    pub feature_count: Option<usize>,
    pub split: [f64; 3],
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            path: None,
            name: None,
            descriptor: None,
            bipartite: false,
            feature_count: None,
            split: [0.7, 0.15, 0.15],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    /// A catalog name such as `TPR-Cosine`, or a baseline like `ADD-Degree`.
    pub strategy: String,
    pub p: f64,
    pub knowledge: f64,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            strategy: "TPR-Cosine".into(),
            p: 0.1,
            knowledge: 1.0,
            seed: 0,
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parameters {
    pub alpha: Param<f64>,
    pub beta: Param<f64>,
    pub window: Param<f64>,
    pub node_capacity: Param<u32>,
    pub max_attempts: Param<usize>,
    pub draws_per_slot: Param<usize>,
    /// Top-k support for the Jaccard drift; 0 means `⌈0.1·|V|⌉`.
    pub topk: Param<usize>,
    pub kl_epsilon: Param<f64>,
    pub ks_threshold: Param<f64>,
    pub ks_min_sample: Param<usize>,
    pub combined_weight: Param<f64>,
    pub snapshots: Param<SnapshotKind>,
    pub budget_base: Param<BudgetBase>,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            alpha: Param::unspecified(0.85),
            beta: Param::unspecified(0.5),
            window: Param::unspecified(1800.0),
            node_capacity: Param::unspecified(1),
            max_attempts: Param::unspecified(5),
            draws_per_slot: Param::unspecified(64),
            topk: Param::unspecified(0),
            kl_epsilon: Param::unspecified(crate::drift::DEFAULT_KL_EPSILON),
            ks_threshold: Param::unspecified(0.1),
            ks_min_sample: Param::unspecified(100),
            combined_weight: Param::unspecified(0.5),
            snapshots: Param::unspecified(SnapshotKind::Normalized),
            budget_base: Param::unspecified(BudgetBase::Training),
        }
    }
}

/// Declarative description of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub dataset: DatasetSection,
    pub attack: AttackSection,
    pub parameters: Parameters,
}

/// What a strategy name resolves to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Plan {
    Attack(SparsifyStrategy),
    Baseline(BaselineMode, Heuristic),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineMode {
    Add,
    Remove,
}

impl BaselineMode {
    pub fn prefix(self) -> &'static str {
        match self {
            BaselineMode::Add => "ADD",
            BaselineMode::Remove => "REM",
        }
    }
}

pub fn baseline_name(mode: BaselineMode, heuristic: Heuristic) -> String {
    format!("{}-{}", mode.prefix(), heuristic.label())
}

/// Resolves a strategy or baseline name.
pub fn resolve_plan(name: &str, seed: u64) -> Result<Plan> {
    let upper = name.to_ascii_uppercase();
    for mode in [BaselineMode::Add, BaselineMode::Remove] {
        let prefix = format!("{}-", mode.prefix());
        if upper.starts_with(&prefix) {
            let heuristic: Heuristic = name[prefix.len()..]
                .parse()
                .map_err(|_| Error::UnknownStrategy(name.to_string()))?;
            return Ok(Plan::Baseline(mode, heuristic));
        }
    }
    Ok(Plan::Attack(SparsifyStrategy::from_name(name, seed)?))
}

/// Every registered attack strategy and baseline name.
pub fn catalog() -> Vec<String> {
    let mut names: Vec<String> = SparsifyStrategy::catalog().iter().map(|s| s.name()).collect();
    for mode in [BaselineMode::Add, BaselineMode::Remove] {
        names.extend(Heuristic::ALL.iter().map(|h| baseline_name(mode, *h)));
    }
    names
}

impl AttackConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn plan(&self) -> Result<Plan> {
        resolve_plan(&self.attack.strategy, self.attack.seed)
    }

    pub fn dataset_format(&self) -> Result<DatasetFormat> {
        if let Some(path) = &self.dataset.descriptor {
            return DatasetFormat::from_path(path);
        }
        let name = self.dataset_name();
        let mut format = DatasetFormat::new(name, self.dataset.bipartite);
        format.feature_count = self.dataset.feature_count;
        Ok(format)
    }

    pub fn dataset_name(&self) -> String {
        self.dataset.name.clone().unwrap_or_else(|| {
            self.dataset
                .path
                .as_ref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    /// In-memory settings for [`poison_train`] and [`baseline_train`].
    pub fn settings(&self) -> Result<PoisonSettings> {
        let p = &self.parameters;
        let tpr = TprParams::new(p.alpha.value, p.beta.value)?;
        let mut strategy = match self.plan()? {
            Plan::Attack(s) => s,
            Plan::Baseline(..) => SparsifyStrategy::heuristic(Heuristic::Degree),
        };
        if let SparsifyStrategy::TimestampDrift { metric } = &mut strategy {
            *metric = DriftMetric {
                kind: metric.kind,
                topk: (p.topk.value > 0).then_some(p.topk.value),
                epsilon: p.kl_epsilon.value,
            };
            metric.validate()?;
        }
        let settings = PoisonSettings {
            strategy,
            p: self.attack.p,
            knowledge: self.attack.knowledge,
            sparsify: SparsifyOptions {
                tpr,
                combined_weight: p.combined_weight.value,
                pagerank: PageRankParams::default(),
                budget_base: p.budget_base.value,
                snapshots: p.snapshots.value,
            },
            sampler: SamplerParams {
                window: p.window.value,
                node_capacity: p.node_capacity.value,
                max_attempts: p.max_attempts.value,
                draws_per_slot: p.draws_per_slot.value,
                seed: self.attack.seed,
            },
            audit: AuditConfig {
                ks_threshold: p.ks_threshold.value,
                ks_min_sample: p.ks_min_sample.value,
                ..AuditConfig::default()
            },
        };
        settings.validate()?;
        Ok(settings)
    }
}

/// Parameters of an in-memory run on a training stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PoisonSettings {
    pub strategy: SparsifyStrategy,
    pub p: f64,
    pub knowledge: f64,
    pub sparsify: SparsifyOptions,
    pub sampler: SamplerParams,
    pub audit: AuditConfig,
}

impl Default for PoisonSettings {
    fn default() -> Self {
        Self {
            strategy: SparsifyStrategy::heuristic(Heuristic::Degree),
            p: 0.1,
            knowledge: 1.0,
            sparsify: SparsifyOptions::default(),
            sampler: SamplerParams::default(),
            audit: AuditConfig::default(),
        }
    }
}

impl PoisonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!("p must be in [0, 1], got {}", self.p)));
        }
        if !(self.knowledge > 0.0 && self.knowledge <= 1.0) {
            return Err(Error::InvalidParameter(format!("knowledge must be in (0, 1], got {}", self.knowledge)));
        }
        if self.sampler.node_capacity == 0 {
            return Err(Error::InvalidParameter("node capacity must be at least 1".into()));
        }
        if self.sampler.max_attempts == 0 {
            return Err(Error::InvalidParameter("max_attempts must be at least 1".into()));
        }
        self.sparsify.tpr.validate()?;
        self.sampler.validate()
    }

    fn meta(&self, name: String, mode: RunMode, budget: usize, train_edges: usize) -> ManifestMeta {
        ManifestMeta {
            strategy: name,
            mode,
            p: self.p,
            knowledge: self.knowledge,
            budget,
            train_edges,
            window: self.sampler.window,
            node_capacity: self.sampler.node_capacity,
            seed: self.sampler.seed,
            priority: PRIORITY_RULE.into(),
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub sparsify: f64,
    pub sample: f64,
    pub position: f64,
    pub audit: f64,
}

#[derive(Debug, Clone)]
pub struct PoisonOutcome {
    pub poisoned: TemporalGraph,
    pub removal: RemovalPlan,
    pub insertion: InsertionPlan,
    pub manifest: Manifest,
    pub audit: AuditReport,
    pub timings: StageTimings,
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed().as_secs_f64();
    out
}

/// Removes and replaces `⌊p·|E|⌋` edges of `train`, then audits the
/// result. A failed audit is reported in the outcome, not as an error.
pub fn poison_train(train: &TemporalGraph, settings: &PoisonSettings) -> Result<PoisonOutcome> {
    settings.validate()?;
    let mut timings = StageTimings::default();
    let sparsifier = Sparsifier::with_options(settings.strategy, settings.sparsify);
    let removal = timed(&mut timings.sparsify, || sparsifier.select(train, settings.p, settings.knowledge)).stage(Stage::Sparsify)?;
    let insertion = timed(&mut timings.sample, || timestamp_selector(train, &removal, &settings.sampler)).stage(Stage::Sample)?;
    let poisoned = timed(&mut timings.position, || insertion_positioning(train, &removal, &insertion)).stage(Stage::Position)?;
    let meta = settings.meta(settings.strategy.name(), RunMode::Attack, removal.budget, train.edge_count());
    let manifest = Manifest::from_plans(train, meta, Some(&removal), Some(&insertion)).stage(Stage::Write)?;
    let report = timed(&mut timings.audit, || Ok(audit(train, &poisoned, &manifest, &settings.audit)))?;
    Ok(PoisonOutcome {
        poisoned,
        removal,
        insertion,
        manifest,
        audit: report,
        timings,
    })
}

fn final_aggregate(view: &TemporalGraph) -> (StaticAggregate, Vec<Vec<NodeId>>) {
    let mut agg = StaticAggregate::empty(view.id_space(), view.edges().last().map_or(0.0, |e| e.timestamp));
    let mut adjacency: Vec<Vec<NodeId>> = vec![Vec::new(); view.id_space()];
    for e in view.edges() {
        if agg.multiplicity(e.source, e.target) == 0 {
            adjacency[e.source as usize].push(e.target);
            adjacency[e.target as usize].push(e.source);
        }
        agg.add_edge(e.source, e.target);
    }
    (agg, adjacency)
}

/// ADD or REM baseline: Δ lowest-scoring novel pairs are inserted, or Δ
/// lowest-scoring existing edges are removed, with scores taken on the
/// static aggregate of the visible stream.
pub fn baseline_train(train: &TemporalGraph, mode: BaselineMode, heuristic: Heuristic, settings: &PoisonSettings) -> Result<PoisonOutcome> {
    settings.validate()?;
    if heuristic == Heuristic::Jaccard && train.is_bipartite() {
        return Err(Error::UnsupportedOnBipartite("Jaccard").at(Stage::Sparsify));
    }
    let mut timings = StageTimings::default();
    let visible = crate::graph::floor_fraction(settings.knowledge, train.edge_count());
    let budget = match settings.sparsify.budget_base {
        BudgetBase::Training => compute_budget(train.edge_count(), settings.p)?,
        BudgetBase::Visible => compute_budget(visible, settings.p)?,
    };
    let view = train.prefix(visible);
    let name = baseline_name(mode, heuristic);
    let strategy = SparsifyStrategy::EdgeHeuristic {
        heuristic,
        seed: settings.sampler.seed,
    };
    let mut removal = RemovalPlan::empty(strategy, settings.knowledge, visible);
    let mut insertion = InsertionPlan {
        inserted: Vec::new(),
        budget: 0,
        window: settings.sampler.window,
        node_capacity: settings.sampler.node_capacity,
    };

    let start = Instant::now();
    let (agg, adjacency) = final_aggregate(&view);
    let pagerank = (heuristic == Heuristic::PageRank).then(|| static_pagerank(&adjacency, &settings.sparsify.pagerank, None));
    let mut rng = ChaCha8Rng::seed_from_u64(settings.sampler.seed);
    let score = |u: NodeId, v: NodeId, rng: &mut ChaCha8Rng| match heuristic {
        Heuristic::Random => rng.random::<f64>(),
        h => pair_score(&agg, h, pagerank.as_deref(), u, v),
    };

    match mode {
        BaselineMode::Remove => {
            removal.budget = budget;
            let mut scored: Vec<(f64, usize)> = view
                .edges()
                .iter()
                .enumerate()
                .map(|(i, e)| (score(e.source, e.target, &mut rng), i))
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if budget > scored.len() {
                log::warn!("{name}: budget {budget} exceeds the {} visible edges; removing all of them", scored.len());
            }
            removal.removed = scored
                .into_iter()
                .take(budget)
                .enumerate()
                .map(|(rank, (score, index))| RemovedEdge { index, score, rank })
                .collect();
            timings.sparsify = start.elapsed().as_secs_f64();
        }
        BaselineMode::Add => {
            insertion.budget = budget;
            let mut existing: HashSet<(NodeId, NodeId)> = HashSet::new();
            let mut present = vec![false; view.id_space()];
            for e in view.edges() {
                existing.insert((e.source.min(e.target), e.source.max(e.target)));
                present[e.source as usize] = true;
                present[e.target as usize] = true;
            }
            let nodes: Vec<NodeId> = (0..view.id_space() as NodeId).filter(|&v| present[v as usize]).collect();
            let mut candidates: Vec<(f64, NodeId, NodeId)> = Vec::new();
            if view.is_bipartite() {
                let sources: Vec<NodeId> = nodes.iter().copied().filter(|&v| view.nodes().side(v) == Side::Source).collect();
                let targets: Vec<NodeId> = nodes.iter().copied().filter(|&v| view.nodes().side(v) == Side::Target).collect();
                for &u in &sources {
                    for &v in &targets {
                        if !existing.contains(&(u.min(v), u.max(v))) {
                            candidates.push((score(u, v, &mut rng), u, v));
                        }
                    }
                }
            } else {
                for (i, &u) in nodes.iter().enumerate() {
                    for &v in &nodes[i + 1..] {
                        if !existing.contains(&(u, v)) {
                            candidates.push((score(u, v, &mut rng), u, v));
                        }
                    }
                }
            }
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
            if budget > candidates.len() {
                log::warn!("{name}: only {} novel pairs for a budget of {budget}", candidates.len());
            }
            timings.sparsify = start.elapsed().as_secs_f64();
            let sample_start = Instant::now();
            if budget > 0 && !candidates.is_empty() {
                let kde = fit_kde(&view.timestamps()).stage(Stage::Sample)?;
                let mut time_rng = ChaCha8Rng::seed_from_u64(settings.sampler.seed);
                time_rng.set_stream(1);
                insertion.inserted = candidates
                    .into_iter()
                    .take(budget)
                    .map(|(_, u, v)| InsertedEdge {
                        source: u,
                        target: v,
                        timestamp: kde.sample(&mut time_rng),
                        compensates: 0,
                        round: 0,
                        recovery: false,
                    })
                    .collect();
            }
            timings.sample = sample_start.elapsed().as_secs_f64();
        }
    }

    let poisoned = timed(&mut timings.position, || insertion_positioning(train, &removal, &insertion)).stage(Stage::Position)?;
    let run_mode = match mode {
        BaselineMode::Add => RunMode::Add,
        BaselineMode::Remove => RunMode::Remove,
    };
    let meta = settings.meta(name, run_mode, budget, train.edge_count());
    let manifest = Manifest::from_plans(train, meta, Some(&removal), Some(&insertion)).stage(Stage::Write)?;
    let report = timed(&mut timings.audit, || Ok(audit(train, &poisoned, &manifest, &settings.audit)))?;
    Ok(PoisonOutcome {
        poisoned,
        removal,
        insertion,
        manifest,
        audit: report,
        timings,
    })
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Files written by [`run_attack`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub directory: PathBuf,
    pub strategy: String,
    pub budget: usize,
    pub removed: usize,
    pub inserted: usize,
    pub recovery_rounds: usize,
    pub manifest_sha256: String,
    pub audit_passed: bool,
    pub timings: StageTimings,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: budget {}, removed {}, inserted {}, recovery rounds {}, audit {}, outputs in {}",
            self.strategy,
            self.budget,
            self.removed,
            self.inserted,
            self.recovery_rounds,
            if self.audit_passed { "passed" } else { "FAILED" },
            self.directory.display()
        )
    }
}

/// `out/<dataset>/<strategy>/p<rate>/`.
pub fn output_dir(config: &AttackConfig) -> PathBuf {
    config
        .attack
        .output
        .join(config.dataset_name())
        .join(&config.attack.strategy)
        .join(format!("p{}", config.attack.p))
}

fn write_graph(graph: &TemporalGraph, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_edge_stream(graph, &mut out)?;
    std::io::Write::flush(&mut out)?;
    Ok(())
}

fn write_partial(dir: &Path, config: &AttackConfig, train: &TemporalGraph, err: &Error) -> Result<()> {
    let quarantine = dir.join("quarantine");
    std::fs::create_dir_all(&quarantine)?;
    std::fs::write(quarantine.join("error.txt"), format!("{err}\n"))?;
    std::fs::write(quarantine.join("config.lock"), config.to_toml())?;
    let settings = config.settings()?;
    let (removal, insertion) = match err.root() {
        Error::BudgetExceedsVisible { partial, .. } => (Some(partial.as_ref()), None),
        Error::SamplingInfeasible { partial, .. } => (None, Some(partial.as_ref())),
        _ => (None, None),
    };
    if removal.is_some() || insertion.is_some() {
        let meta = settings.meta(config.attack.strategy.clone(), RunMode::Attack, 0, train.edge_count());
        let manifest = Manifest::from_plans(train, meta, removal, insertion)?;
        std::fs::write(quarantine.join("manifest.partial.jsonl"), manifest.to_jsonl())?;
    }
    Ok(())
}

/// Loads, splits, poisons the training piece, writes every artifact and
/// fails with [`Error::AuditFailed`] if the audit does not pass.
pub fn run_attack(config: &AttackConfig) -> Result<RunSummary> {
    let settings = config.settings()?;
    let format = config.dataset_format().stage(Stage::Load)?;
    let path = config
        .dataset
        .path
        .as_ref()
        .ok_or_else(|| Error::Config("dataset.path is required".into()).at(Stage::Load))?;
    let graph = load_edge_stream(path, &format).stage(Stage::Load)?;
    let [a, b, c] = config.dataset.split;
    let (train, val, test) = chronological_split(&graph, (a, b, c)).stage(Stage::Split)?;
    let dir = output_dir(config);
    std::fs::create_dir_all(&dir).map_err(Error::from).stage(Stage::Write)?;

    let outcome = match config.plan()? {
        Plan::Attack(_) => poison_train(&train, &settings),
        Plan::Baseline(mode, heuristic) => baseline_train(&train, mode, heuristic, &settings),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(err) => {
            if let Err(write_err) = write_partial(&dir, config, &train, &err) {
                log::error!("could not write quarantine outputs: {write_err}");
            }
            return Err(err);
        }
    };

    let target = if outcome.audit.passed() { dir.clone() } else { dir.join("quarantine") };
    let write = || -> Result<String> {
        std::fs::create_dir_all(&target)?;
        write_graph(&train, &target.join("train.csv"))?;
        write_graph(&outcome.poisoned, &target.join("train_poisoned.csv"))?;
        write_graph(&val, &target.join("val.csv"))?;
        write_graph(&test, &target.join("test.csv"))?;
        let jsonl = outcome.manifest.to_jsonl();
        std::fs::write(target.join("manifest.jsonl"), &jsonl)?;
        std::fs::write(target.join("audit.json"), outcome.audit.to_json())?;
        std::fs::write(target.join("audit.txt"), format!("{}\n", outcome.audit))?;
        std::fs::write(target.join("config.lock"), config.to_toml())?;
        Ok(sha256_hex(jsonl.as_bytes()))
    };
    let digest = write().stage(Stage::Write)?;
    if !outcome.audit.passed() {
        return Err(Error::AuditFailed(Box::new(outcome.audit)).at(Stage::Audit));
    }
    Ok(RunSummary {
        directory: dir,
        strategy: config.attack.strategy.clone(),
        budget: outcome.manifest.meta.budget,
        removed: outcome.removal.len(),
        inserted: outcome.insertion.len(),
        recovery_rounds: outcome.insertion.recovery_rounds(),
        manifest_sha256: digest,
        audit_passed: true,
        timings: outcome.timings,
    })
}

/// One benchmarked stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub edges: usize,
    pub tpr_seconds: f64,
    pub sparsify_seconds: f64,
    pub selector_seconds: f64,
    pub position_seconds: f64,
    pub audit_seconds: f64,
    pub manifest_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    /// Least-squares slope of `ln(seconds)` against `ln(|E|)`.
    pub tpr_slope: f64,
    pub selector_slope: f64,
}

impl fmt::Display for BenchmarkReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>10} {:>10} {:>10} {:>10} {:>10} {:>10}  manifest", "edges", "tpr", "sparsify", "selector", "position", "audit")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>10} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}  {}",
                r.edges,
                r.tpr_seconds,
                r.sparsify_seconds,
                r.selector_seconds,
                r.position_seconds,
                r.audit_seconds,
                &r.manifest_sha256[..16]
            )?;
        }
        write!(f, "slopes: tpr {:.3}, selector {:.3}", self.tpr_slope, self.selector_slope)
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::NothingToBenchmark("need at least two sizes".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::NothingToBenchmark("all sizes are equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Runs the attack on every stream and fits scaling slopes. Each stage is
/// timed `repeats` times and the minimum is kept.
pub fn benchmark(streams: &[TemporalGraph], settings: &PoisonSettings, repeats: usize) -> Result<BenchmarkReport> {
    if streams.len() < 2 {
        return Err(Error::NothingToBenchmark(format!("{} input size(s); need at least two", streams.len())));
    }
    let repeats = repeats.max(1);
    let mut rows = Vec::with_capacity(streams.len());
    for graph in streams {
        let mut tpr_best = f64::INFINITY;
        let mut best: Option<PoisonOutcome> = None;
        let mut selector_best = f64::INFINITY;
        for _ in 0..repeats {
            let start = Instant::now();
            compute_tpr_stream(graph, settings.sparsify.tpr)?;
            tpr_best = tpr_best.min(start.elapsed().as_secs_f64());
            let outcome = poison_train(graph, settings)?;
            selector_best = selector_best.min(outcome.timings.sample);
            best = Some(outcome);
        }
        let outcome = best.expect("at least one repeat");
        rows.push(BenchmarkRow {
            edges: graph.edge_count(),
            tpr_seconds: tpr_best,
            sparsify_seconds: outcome.timings.sparsify,
            selector_seconds: selector_best,
            position_seconds: outcome.timings.position,
            audit_seconds: outcome.timings.audit,
            manifest_sha256: sha256_hex(outcome.manifest.to_jsonl().as_bytes()),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.edges as f64).collect();
    let tpr: Vec<f64> = rows.iter().map(|r| r.tpr_seconds.max(1e-9)).collect();
    let sel: Vec<f64> = rows.iter().map(|r| r.selector_seconds.max(1e-9)).collect();
    Ok(BenchmarkReport {
        tpr_slope: log_log_slope(&xs, &tpr)?,
        selector_slope: log_log_slope(&xs, &sel)?,
        rows,
    })
}
