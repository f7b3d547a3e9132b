use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::branch::FinishReason;
use crate::config::RunConfig;
use crate::cost::CostLedger;
use crate::harness::{majority_vote, normalize_answer, pass_at_1};
use crate::mode::Mode;
use crate::pool::{dump_records, AdmissionEvent, PoolRecord};
use crate::scheduler::{ModeTransition, WindowRecord};

use super::{RunResult, StepTrace, Variant};

pub const REPORT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub branch: usize,
    pub generated_tokens: u64,
    pub finish_reason: FinishReason,
    pub segments: usize,
    pub answer: Option<String>,
}

/// Serialized record of one query run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: u32,
    pub problem_id: String,
    pub run_index: usize,
    pub seed: u64,
    pub variant: Variant,
    pub config: RunConfig,
    /// Set when the query aborted; the rest of the report is the partial trace.
    pub error: Option<String>,
    pub step_count: usize,
    pub final_mode: Mode,
    pub g_ref: Option<f64>,
    pub new_counts: Vec<usize>,
    pub windows: Vec<WindowRecord>,
    pub transitions: Vec<ModeTransition>,
    pub steps: Vec<StepTrace>,
    pub branches: Vec<BranchSummary>,
    pub pool: Vec<PoolRecord>,
    pub admissions: Vec<AdmissionEvent>,
    pub injected: Vec<u64>,
    pub ledger: CostLedger,
    pub gold_answer: Option<String>,
    pub majority_answer: Option<String>,
    pub pass_at_1: Option<f64>,
    pub majority_correct: Option<bool>,
    pub generated_tokens: u64,
    pub wall_clock_s: f64,
}

impl RunReport {
    pub fn from_result(result: &RunResult, run_index: usize, gold: Option<&str>, error: Option<String>) -> Self {
        let answers = result.answers();
        let majority = majority_vote(&answers);
        let gold = gold.map(normalize_answer);
        let p1 = gold.as_deref().and_then(|g| pass_at_1(&answers, g).ok());
        let mv_correct = gold.as_ref().map(|g| majority.as_ref() == Some(g));
        Self {
            format: REPORT_FORMAT,
            problem_id: result.problem_id.clone(),
            run_index,
            seed: result.config.seed,
            variant: result.variant,
            config: result.config.clone(),
            error,
            step_count: result.step_count(),
            final_mode: result.final_mode(),
            g_ref: result.scheduler.g_ref(),
            new_counts: result.scheduler.record().to_vec(),
            windows: result.scheduler.windows().to_vec(),
            transitions: result.scheduler.transitions().to_vec(),
            steps: result.steps.clone(),
            branches: result
                .branches
                .iter()
                .zip(&answers)
                .map(|(b, a)| BranchSummary {
                    branch: b.branch_id,
                    generated_tokens: b.generated_tokens(),
                    finish_reason: b.finish_reason(),
                    segments: b.history().len(),
                    answer: a.clone(),
                })
                .collect(),
            pool: result.pool.records(),
            admissions: result.pool.events().to_vec(),
            injected: result.injected.clone(),
            ledger: result.ledger.clone(),
            gold_answer: gold,
            majority_answer: majority,
            pass_at_1: p1,
            majority_correct: mv_correct,
            generated_tokens: result.generated_tokens(),
            wall_clock_s: result.wall_clock_s,
        }
    }

    /// The report with all timing fields zeroed, for replay comparisons.
    pub fn without_timing(&self) -> RunReport {
        let mut r = self.clone();
        r.wall_clock_s = 0.0;
        r.ledger.timing = Default::default();
        r
    }

    pub fn answers(&self) -> Vec<Option<String>> {
        self.branches.iter().map(|b| b.answer.clone()).collect()
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// `<problem_id>__run<k>.json`, with path-hostile characters replaced.
pub fn report_file_name(problem_id: &str, run_index: usize) -> String {
    format!("{}__run{run_index}.json", sanitize(problem_id))
}

/// Write the report and its pool dump (`<name>.pool.jsonl`) into `dir`.
pub fn write_report(dir: &Path, report: &RunReport) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let name = report_file_name(&report.problem_id, report.run_index);
    let path = dir.join(&name);
    let json = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    fs::write(&path, json + "\n")?;
    let pool_path = dir.join(name.replace(".json", ".pool.jsonl"));
    fs::write(pool_path, dump_records(&report.pool))?;
    Ok(path)
}

/// Read every `*__run<k>.json` report in `dir`, sorted by file name.
pub fn read_reports(dir: &Path) -> Result<Vec<RunReport>, String> {
    let entries = fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.contains("__run") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names() {
        assert_eq!(report_file_name("hmmt-25/3", 7), "hmmt-25_3__run7.json");
        assert_eq!(report_file_name("p1", 0), "p1__run0.json");
    }
}
