//! Poisoning attacks on continuous-time dynamic graphs.
//!
//! The attack removes the edges that matter most to the temporal structure
//! of a training stream (ranked by temporal PageRank drift, temporal
//! EdgeRank or classic static heuristics) and replaces each of them with a
//! new edge that looks plausible: its timestamp follows the stream's own
//! density, both endpoints were recently active, the pair never interacted
//! before, and no node's degree moves by more than a fixed capacity.
//!
//! ```
//! use tgpoison::synthetic::SyntheticStream;
//! use tgpoison::pipeline::{poison_train, PoisonSettings};
//! use tgpoison::sampler::SamplerParams;
//!
//! let train = SyntheticStream { edges: 2000, nodes: 400, ..Default::default() }.generate().unwrap();
//! let sampler = SamplerParams { window: 50.0, ..SamplerParams::default() };
//! let settings = PoisonSettings { p: 0.1, sampler, ..PoisonSettings::default() };
//! let out = poison_train(&train, &settings).unwrap();
//! assert_eq!(out.removal.len(), 200);
//! assert_eq!(out.insertion.len(), 200);
//! assert!(out.audit.passed());
//! ```

pub mod audit;
pub mod drift;
pub mod error;
pub mod graph;
pub mod manifest;
pub mod pipeline;
pub mod sampler;
pub mod sparsify;
pub mod synthetic;
pub mod tpr;

pub use audit::{audit, AuditConfig, AuditReport};
pub use drift::{drift, DriftKind, DriftMetric};
pub use error::{Error, Result, Stage};
pub use graph::{DatasetFormat, TemporalEdge, TemporalGraph};
pub use manifest::{Manifest, RunMode};
pub use sampler::{fit_kde, insertion_positioning, timestamp_selector, InsertionPlan, SamplerParams};
pub use sparsify::{select_removals, RemovalPlan, Sparsifier, SparsifyStrategy};
pub use tpr::{compute_tpr_stream, TprParams, TprTimeline};
