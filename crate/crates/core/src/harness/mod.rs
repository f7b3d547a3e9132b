//! Evaluation: answers, Pass@1 / majority vote, per-step information
//! statistics, offline injection and batch summaries.

mod answer;
mod stats;
mod summary;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use answer::{extract_answer, majority_vote, normalize_answer, pass_at_1};
pub use stats::{info_statistics, normalize_per_tokens, offline_inject, StepInfoStats, NORMALIZATION_TOKENS};
pub use summary::{summarize, BatchSummary, ProblemSummary, StepStatsTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("answer list is empty")]
    EmptyAnswers,
    #[error("run has no admission logs")]
    MissingLogs,
    #[error("injection ratio {0} outside 0..=100")]
    RatioOutOfRange(u32),
    #[error("dataset {path}: {message}")]
    Dataset { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub problem_id: String,
    pub statement: String,
    pub gold_answer: String,
}

/// Read a line-delimited dataset of `{problem_id, statement, gold_answer}`
/// records. Blank lines are skipped; ids must be unique and gold answers
/// nonempty.
pub fn load_dataset(path: &Path) -> Result<Vec<ProblemRecord>, HarnessError> {
    let err = |message: String| HarnessError::Dataset {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    parse_dataset(&text).map_err(err)
}

pub fn parse_dataset(text: &str) -> Result<Vec<ProblemRecord>, String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ProblemRecord = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        if rec.gold_answer.trim().is_empty() {
            return Err(format!("line {}: empty gold_answer", i + 1));
        }
        if !seen.insert(rec.problem_id.clone()) {
            return Err(format!("line {}: duplicate problem_id `{}`", i + 1, rec.problem_id));
        }
        out.push(rec);
    }
    Ok(out)
}
