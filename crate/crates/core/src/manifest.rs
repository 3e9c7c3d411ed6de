//! JSON-lines record of a poisoning run.
//!
//! The first line is a `meta` record, followed by one `remove` record per
//! deleted edge (selection order) and one `insert` record per added edge
//! (placement order). Node ids are the raw ids from the input file, so the
//! manifest can be checked against the CSV outputs without the in-memory
//! node table.
//!
//! ```text
//! {"op":"meta","strategy":"Degree","mode":"attack","p":0.3,"knowledge":1.0,"budget":60,"train_edges":200,"window":1800.0,"node_capacity":1,"seed":0,"priority":"deletion-deficit"}
//! {"op":"remove","edge_index":17,"source":4,"target":9,"timestamp":12.0,"score":7.0,"rank":0,"strategy":"Degree"}
//! {"op":"insert","source":4,"target":11,"timestamp":13.5,"compensates":17,"round":0,"recovery":false,"strategy":"Degree"}
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TemporalGraph;
use crate::sampler::InsertionPlan;
use crate::sparsify::RemovalPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// Removals followed by compensating insertions.
    #[default]
    Attack,
    /// Insertions only.
    Add,
    /// Removals only.
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestMeta {
    pub strategy: String,
    pub mode: RunMode,
    pub p: f64,
    pub knowledge: f64,
    pub budget: usize,
    /// Edge count of the unpoisoned training stream.
    pub train_edges: usize,
    pub window: f64,
    pub node_capacity: u32,
    pub seed: u64,
    /// Node ordering rule used by the insertion pass.
    pub priority: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoveRecord {
    pub edge_index: usize,
    pub source: u64,
    pub target: u64,
    pub timestamp: f64,
    pub score: f64,
    pub rank: usize,
    pub strategy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertRecord {
    pub source: u64,
    pub target: u64,
    pub timestamp: f64,
    /// `edge_index` of the removal this insertion offsets, if any.
    pub compensates: Option<usize>,
    pub round: usize,
    pub recovery: bool,
    pub strategy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum ManifestRecord {
    Meta(ManifestMeta),
    Remove(RemoveRecord),
    Insert(InsertRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub meta: ManifestMeta,
    pub removals: Vec<RemoveRecord>,
    pub insertions: Vec<InsertRecord>,
}

impl Manifest {
    pub fn new(meta: ManifestMeta) -> Self {
        Self {
            meta,
            removals: Vec::new(),
            insertions: Vec::new(),
        }
    }

    /// Translates plans over `train` into raw-id records.
    pub fn from_plans(train: &TemporalGraph, meta: ManifestMeta, removal: Option<&RemovalPlan>, insertion: Option<&InsertionPlan>) -> Result<Self> {
        let nodes = train.nodes();
        let mut manifest = Manifest::new(meta);
        if let Some(plan) = removal {
            for r in &plan.removed {
                let e = train
                    .edges()
                    .get(r.index)
                    .ok_or_else(|| Error::PlanMismatch(format!("removed index {} out of range", r.index)))?;
                manifest.removals.push(RemoveRecord {
                    edge_index: r.index,
                    source: nodes.raw_id(e.source),
                    target: nodes.raw_id(e.target),
                    timestamp: e.timestamp,
                    score: r.score,
                    rank: r.rank,
                    strategy: manifest.meta.strategy.clone(),
                });
            }
        }
        if let Some(plan) = insertion {
            for ins in &plan.inserted {
                if ins.source as usize >= nodes.len() || ins.target as usize >= nodes.len() {
                    return Err(Error::PlanMismatch(format!("inserted edge ({}, {}) names an unknown node", ins.source, ins.target)));
                }
                manifest.insertions.push(InsertRecord {
                    source: nodes.raw_id(ins.source),
                    target: nodes.raw_id(ins.target),
                    timestamp: ins.timestamp,
                    compensates: (manifest.meta.mode == RunMode::Attack).then_some(ins.compensates),
                    round: ins.round,
                    recovery: ins.recovery,
                    strategy: manifest.meta.strategy.clone(),
                });
            }
        }
        Ok(manifest)
    }

    pub fn records(&self) -> impl Iterator<Item = ManifestRecord> + '_ {
        std::iter::once(ManifestRecord::Meta(self.meta.clone()))
            .chain(self.removals.iter().cloned().map(ManifestRecord::Remove))
            .chain(self.insertions.iter().cloned().map(ManifestRecord::Insert))
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for record in self.records() {
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut meta = None;
        let mut removals = Vec::new();
        let mut insertions = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ManifestRecord = serde_json::from_str(&line).map_err(|e| Error::Manifest {
                line: i + 1,
                message: e.to_string(),
            })?;
            match record {
                ManifestRecord::Meta(m) => {
                    if meta.replace(m).is_some() {
                        return Err(Error::Manifest {
                            line: i + 1,
                            message: "duplicate meta record".into(),
                        });
                    }
                }
                ManifestRecord::Remove(r) => removals.push(r),
                ManifestRecord::Insert(r) => insertions.push(r),
            }
        }
        let meta = meta.ok_or(Error::Manifest {
            line: 0,
            message: "missing meta record".into(),
        })?;
        Ok(Self {
            meta,
            removals,
            insertions,
        })
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    /// Highest recovery round that produced an insertion.
    pub fn max_round(&self) -> usize {
        self.insertions.iter().map(|r| r.round).max().unwrap_or(0)
    }
}
