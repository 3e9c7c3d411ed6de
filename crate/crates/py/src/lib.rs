//! Python bindings: dataset loading, in-memory poisoning, auditing and
//! the file-based attack run.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Deserialize;

use tgpoison::graph::{load_edge_stream, write_edge_stream, DatasetFormat, TemporalGraph};
use tgpoison::manifest::Manifest;
use tgpoison::pipeline::{self, AttackConfig, Plan};
use tgpoison::sparsify::BudgetBase;
use tgpoison::synthetic::SyntheticStream;
use tgpoison::{AuditConfig, Error};

create_exception!(tgpoison_py, TgPoisonError, PyException, "Error raised by the poisoning pipeline.");

fn to_py(py: Python<'_>, err: Error) -> PyErr {
    let pyerr = TgPoisonError::new_err(err.to_string());
    let stage = err.stage().map(|s| s.to_string());
    let _ = pyerr.value(py).setattr("stage", stage);
    pyerr
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn py_to_json(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

/// A loaded edge stream. Accessors return copies.
#[pyclass(name = "Dataset", module = "tgpoison_py", frozen)]
struct Dataset {
    graph: TemporalGraph,
}

#[pymethods]
impl Dataset {
    fn __len__(&self) -> usize {
        self.graph.edge_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(edges={}, nodes={}, bipartite={})",
            self.graph.edge_count(),
            self.graph.node_count(),
            self.graph.is_bipartite()
        )
    }

    /// Raw source ids in stream order.
    fn sources(&self) -> Vec<u64> {
        let nodes = self.graph.nodes();
        self.graph.edges().iter().map(|e| nodes.raw_id(e.source)).collect()
    }

    fn targets(&self) -> Vec<u64> {
        let nodes = self.graph.nodes();
        self.graph.edges().iter().map(|e| nodes.raw_id(e.target)).collect()
    }

    fn timestamps(&self) -> Vec<f64> {
        self.graph.timestamps()
    }

    fn labels(&self) -> Vec<i64> {
        self.graph.edges().iter().map(|e| e.label).collect()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        self.graph.edges().iter().map(|e| e.features.clone()).collect()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    #[getter]
    fn bipartite(&self) -> bool {
        self.graph.is_bipartite()
    }

    /// Writes the stream as CSV with the original node ids.
    fn save(&self, py: Python<'_>, path: PathBuf) -> PyResult<()> {
        let write = || -> tgpoison::Result<()> {
            let file = std::fs::File::create(&path)?;
            let mut out = std::io::BufWriter::new(file);
            write_edge_stream(&self.graph, &mut out)?;
            std::io::Write::flush(&mut out)?;
            Ok(())
        };
        write().map_err(|e| to_py(py, e))
    }
}

/// Reads a `user_id,item_id,timestamp,state_label,features...` CSV.
#[pyfunction]
#[pyo3(signature = (path, bipartite = false, descriptor = None))]
fn load(py: Python<'_>, path: PathBuf, bipartite: bool, descriptor: Option<PathBuf>) -> PyResult<Dataset> {
    let run = || -> tgpoison::Result<TemporalGraph> {
        let mut format = match &descriptor {
            Some(d) => DatasetFormat::from_path(d)?,
            None => DatasetFormat::new(path.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned()), false),
        };
        format.bipartite |= bipartite;
        load_edge_stream(&path, &format)
    };
    run().map(|graph| Dataset { graph }).map_err(|e| to_py(py, e))
}

/// Seeded synthetic stream with Zipf-distributed endpoints.
#[pyfunction]
#[pyo3(signature = (edges = 10_000, nodes = 1000, targets = 0, edges_per_timestamp = 10, zipf = 0.5, seed = 0))]
fn generate(py: Python<'_>, edges: usize, nodes: usize, targets: usize, edges_per_timestamp: usize, zipf: f64, seed: u64) -> PyResult<Dataset> {
    SyntheticStream {
        nodes,
        targets,
        edges,
        edges_per_timestamp,
        zipf_exponent: zipf,
        seed,
        ..SyntheticStream::default()
    }
    .generate()
    .map(|graph| Dataset { graph })
    .map_err(|e| to_py(py, e))
}

/// Keys accepted by [`poison`]; anything else is rejected.
#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PoisonRequest {
    strategy: String,
    p: f64,
    knowledge: f64,
    seed: u64,
    name: String,
    output: PathBuf,
    alpha: Option<f64>,
    beta: Option<f64>,
    window: Option<f64>,
    node_capacity: Option<u32>,
    max_attempts: Option<usize>,
    draws_per_slot: Option<usize>,
    topk: Option<usize>,
    combined_weight: Option<f64>,
    ks_threshold: Option<f64>,
    ks_min_sample: Option<usize>,
    budget_base: Option<BudgetBase>,
}

impl Default for PoisonRequest {
    fn default() -> Self {
        let attack = AttackConfig::default().attack;
        Self {
            strategy: attack.strategy,
            p: attack.p,
            knowledge: attack.knowledge,
            seed: attack.seed,
            name: "dataset".into(),
            output: attack.output,
            alpha: None,
            beta: None,
            window: None,
            node_capacity: None,
            max_attempts: None,
            draws_per_slot: None,
            topk: None,
            combined_weight: None,
            ks_threshold: None,
            ks_min_sample: None,
            budget_base: None,
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl PoisonRequest {
    fn config(&self) -> AttackConfig {
        let mut config = AttackConfig::default();
        config.dataset.name = Some(self.name.clone());
        config.attack.strategy.clone_from(&self.strategy);
        config.attack.p = self.p;
        config.attack.knowledge = self.knowledge;
        config.attack.seed = self.seed;
        config.attack.output.clone_from(&self.output);
        let q = &mut config.parameters;
        set(&mut q.alpha.value, self.alpha);
        set(&mut q.beta.value, self.beta);
        set(&mut q.window.value, self.window);
        set(&mut q.node_capacity.value, self.node_capacity);
        set(&mut q.max_attempts.value, self.max_attempts);
        set(&mut q.draws_per_slot.value, self.draws_per_slot);
        set(&mut q.topk.value, self.topk);
        set(&mut q.combined_weight.value, self.combined_weight);
        set(&mut q.ks_threshold.value, self.ks_threshold);
        set(&mut q.ks_min_sample.value, self.ks_min_sample);
        set(&mut q.budget_base.value, self.budget_base);
        config
    }
}

/// Poisons `dataset` as a training stream. Writes `manifest.jsonl` and
/// `audit.json` under `output/<name>/<strategy>/p<p>/` and returns the
/// poisoned dataset with a summary mapping.
#[pyfunction]
#[pyo3(signature = (dataset, config = None))]
fn poison<'py>(py: Python<'py>, dataset: &Dataset, config: Option<&Bound<'py, PyDict>>) -> PyResult<(Dataset, Bound<'py, PyAny>)> {
    let request: PoisonRequest = match config {
        Some(c) => serde_json::from_str(&py_to_json(c.as_any())?)
            .map_err(|e| to_py(py, Error::Config(e.to_string())))?,
        None => PoisonRequest::default(),
    };
    let config = request.config();
    let run = || -> tgpoison::Result<(TemporalGraph, String)> {
        let settings = config.settings()?;
        let outcome = match config.plan()? {
            Plan::Attack(_) => pipeline::poison_train(&dataset.graph, &settings)?,
            Plan::Baseline(mode, heuristic) => pipeline::baseline_train(&dataset.graph, mode, heuristic, &settings)?,
        };
        let dir = pipeline::output_dir(&config);
        std::fs::create_dir_all(&dir)?;
        let manifest_path = dir.join("manifest.jsonl");
        let jsonl = outcome.manifest.to_jsonl();
        std::fs::write(&manifest_path, &jsonl)?;
        std::fs::write(dir.join("audit.json"), outcome.audit.to_json())?;
        if !outcome.audit.passed() {
            return Err(Error::AuditFailed(Box::new(outcome.audit)));
        }
        let summary = serde_json::json!({
            "strategy": config.attack.strategy,
            "budget": outcome.manifest.meta.budget,
            "removed": outcome.removal.len(),
            "inserted": outcome.insertion.len(),
            "recovery_rounds": outcome.insertion.recovery_rounds(),
            "manifest_path": manifest_path,
            "manifest_sha256": pipeline::sha256_hex(jsonl.as_bytes()),
            "audit": outcome.audit,
        });
        Ok((outcome.poisoned, summary.to_string()))
    };
    let (graph, summary) = run().map_err(|e| to_py(py, e))?;
    Ok((Dataset { graph }, json_to_py(py, &summary)?))
}

/// Independent constraint audit; returns the report as a mapping.
#[pyfunction]
#[pyo3(signature = (original, poisoned, manifest, window = None, node_capacity = None, ks_threshold = 0.1, ks_min_sample = 100))]
fn audit<'py>(
    py: Python<'py>,
    original: &Dataset,
    poisoned: &Dataset,
    manifest: PathBuf,
    window: Option<f64>,
    node_capacity: Option<u32>,
    ks_threshold: f64,
    ks_min_sample: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let manifest = Manifest::load(&manifest).map_err(|e| to_py(py, e))?;
    let config = AuditConfig {
        ks_threshold,
        ks_min_sample,
        window,
        node_capacity,
        mode: None,
    };
    let report = tgpoison::audit(&original.graph, &poisoned.graph, &manifest, &config);
    let mut value = serde_json::to_value(&report).map_err(|e| to_py(py, e.into()))?;
    value["passed"] = report.passed().into();
    json_to_py(py, &value.to_string())
}

/// Same as the `attack` command: load, split, poison, write, audit.
/// `config` is a TOML file path.
#[pyfunction]
fn run_attack<'py>(py: Python<'py>, config: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let summary = AttackConfig::from_path(&config)
        .and_then(|c| pipeline::run_attack(&c))
        .map_err(|e| to_py(py, e))?;
    let text = serde_json::to_string(&summary).map_err(|e| to_py(py, e.into()))?;
    json_to_py(py, &text)
}

/// Every registered strategy and baseline name.
#[pyfunction]
fn catalog() -> Vec<String> {
    pipeline::catalog()
}

#[pymodule]
fn tgpoison_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(poison, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(run_attack, m)?)?;
    m.add_function(wrap_pyfunction!(catalog, m)?)?;
    m.add("TgPoisonError", m.py().get_type::<TgPoisonError>())?;
    Ok(())
}
