//! The query-level shared note pool.
//!
//! Candidates extracted from branch segments are admitted only when their
//! maximum cosine similarity to every existing entry is strictly below the
//! dedup threshold. Admission within a step runs in ascending branch order and
//! then in the order the extractor listed the notes, so per-step new counts are
//! reproducible. Duplicates never enter the pool but are logged.

mod extract;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::embedding::{max_similarity, EmbedError, Embedder, EmbeddingVector};
use crate::rng::Stream;

pub use extract::{build_extraction_prompt, parse_bb_write, render_bb_write};

pub const BROADCAST_OPEN: &str = "[BLACKBOARD BROADCAST]";
pub const BROADCAST_CLOSE: &str = "[/BLACKBOARD BROADCAST]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoteKind {
    Insight,
    Pitfall,
}

impl NoteKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoteKind::Insight => "insight",
            NoteKind::Pitfall => "pitfall",
        }
    }
}

impl fmt::Display for NoteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoteKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "insight" => Ok(NoteKind::Insight),
            "pitfall" => Ok(NoteKind::Pitfall),
            other => Err(format!("unknown note kind `{other}`")),
        }
    }
}

/// A parsed extraction candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: NoteKind,
    pub text: String,
}

impl Candidate {
    pub fn new(kind: NoteKind, text: impl Into<String>) -> Self {
        Self {
            kind,
            text: text.into(),
        }
    }
}

/// An admitted note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoUnit {
    pub unit_id: u64,
    pub kind: NoteKind,
    pub text: String,
    pub source_branch: usize,
    pub step_admitted: usize,
    pub embedding: EmbeddingVector,
}

impl InfoUnit {
    pub fn record(&self) -> PoolRecord {
        PoolRecord {
            unit_id: self.unit_id,
            step: self.step_admitted,
            branch: self.source_branch,
            kind: self.kind,
            text: self.text.clone(),
        }
    }
}

/// One line of a pool dump, and the form notes take in broadcasts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub unit_id: u64,
    pub step: usize,
    pub branch: usize,
    pub kind: NoteKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AdmitResult {
    Admitted(InfoUnit),
    Duplicate(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Admitted { unit_id: u64 },
    Duplicate,
}

/// Every admission attempt, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionEvent {
    pub step: usize,
    pub branch: usize,
    pub kind: NoteKind,
    pub text: String,
    /// Max similarity to the pool at attempt time; `None` when the pool was empty.
    pub max_similarity: Option<f64>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub step: usize,
    pub new: usize,
    pub duplicate: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SharedPool {
    entries: Vec<InfoUnit>,
    admission_log: Vec<StepCounts>,
    events: Vec<AdmissionEvent>,
}

impl SharedPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[InfoUnit] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Per-step new / duplicate counts, one record per step begun.
    pub fn admission_log(&self) -> &[StepCounts] {
        &self.admission_log
    }

    pub fn events(&self) -> &[AdmissionEvent] {
        &self.events
    }

    /// Open the count record for `step`. Steps must be opened in increasing order.
    pub fn begin_step(&mut self, step: usize) {
        if let Some(last) = self.admission_log.last() {
            assert!(step > last.step, "steps must be opened in increasing order");
        }
        self.admission_log.push(StepCounts {
            step,
            new: 0,
            duplicate: 0,
        });
    }

    fn current_step(&mut self) -> &mut StepCounts {
        if self.admission_log.is_empty() {
            self.begin_step(0);
        }
        self.admission_log.last_mut().expect("step opened")
    }

    /// Admit `candidate` unless it duplicates an existing entry
    /// (`max_similarity >= dedup_threshold`). An empty pool always admits.
    pub fn admit(
        &mut self,
        candidate: &Candidate,
        source_branch: usize,
        embedder: &dyn Embedder,
        dedup_threshold: f64,
    ) -> Result<AdmitResult, EmbedError> {
        if candidate.text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let embedding = embedder.embed(&candidate.text)?;
        let similarity = if self.entries.is_empty() {
            None
        } else {
            Some(max_similarity(&embedding, self.entries.iter().map(|e| &e.embedding))?)
        };
        let step = self.current_step().step;
        let admitted = similarity.is_none_or(|s| s < dedup_threshold);
        let (result, outcome) = if admitted {
            let unit = InfoUnit {
                unit_id: self.entries.len() as u64,
                kind: candidate.kind,
                text: candidate.text.clone(),
                source_branch,
                step_admitted: step,
                embedding,
            };
            self.entries.push(unit.clone());
            self.current_step().new += 1;
            let id = unit.unit_id;
            (AdmitResult::Admitted(unit), Outcome::Admitted { unit_id: id })
        } else {
            self.current_step().duplicate += 1;
            let s = similarity.expect("duplicates require a nonempty pool");
            (AdmitResult::Duplicate(s), Outcome::Duplicate)
        };
        self.events.push(AdmissionEvent {
            step,
            branch: source_branch,
            kind: candidate.kind,
            text: candidate.text.clone(),
            max_similarity: similarity,
            outcome,
        });
        Ok(result)
    }

    /// New-entry count of the most recently opened step.
    pub fn current_new_count(&self) -> usize {
        self.admission_log.last().map_or(0, |c| c.new)
    }

    /// The `n` most recently admitted entries, oldest first.
    pub fn recent(&self, n: usize) -> Vec<PoolRecord> {
        let start = self.entries.len().saturating_sub(n);
        self.entries[start..].iter().map(InfoUnit::record).collect()
    }

    pub fn records(&self) -> Vec<PoolRecord> {
        self.entries.iter().map(InfoUnit::record).collect()
    }

    /// Line-delimited JSON dump: one `{unit_id, step, branch, kind, text}` per line.
    pub fn dump(&self) -> String {
        dump_records(&self.records())
    }
}

pub fn dump_records(records: &[PoolRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("pool record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_dump(text: &str) -> Result<Vec<PoolRecord>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

/// Entries offered to every branch at one step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastSet {
    pub step_issued: usize,
    pub entries: Vec<PoolRecord>,
}

impl BroadcastSet {
    pub fn ids(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.unit_id).collect()
    }
}

/// Uniform sample of `count` records without replacement, ordered by unit id.
pub fn sample_records(records: &[PoolRecord], count: usize, rng: &mut Stream) -> Vec<PoolRecord> {
    if records.len() <= count {
        return records.to_vec();
    }
    let mut picked = index::sample(rng, records.len(), count).into_vec();
    picked.sort_unstable();
    let mut out: Vec<PoolRecord> = picked.into_iter().map(|i| records[i].clone()).collect();
    out.sort_by_key(|r| r.unit_id);
    out
}

/// The whole pool when it fits in `broadcast_size`, otherwise a uniform sample
/// of `broadcast_size` entries ordered by unit id.
pub fn sample_broadcast(
    pool: &SharedPool,
    broadcast_size: usize,
    rng: &mut Stream,
    step: usize,
) -> BroadcastSet {
    BroadcastSet {
        step_issued: step,
        entries: sample_records(&pool.records(), broadcast_size, rng),
    }
}

/// The system-message block for a broadcast.
pub fn render_broadcast(set: &BroadcastSet) -> String {
    format!(
        "{BROADCAST_OPEN}\n{}\n{BROADCAST_CLOSE}",
        crate::backend::render_note_lines(&set.entries)
    )
}
