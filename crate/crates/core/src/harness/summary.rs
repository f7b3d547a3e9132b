use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cost::{cost_report, CostError, GenerationAccounting, ModelSpec};
use crate::orchestrator::RunReport;

use super::stats::{info_statistics, StepInfoStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub problem_id: String,
    pub runs: usize,
    pub failed_runs: usize,
    /// Mean over completed runs of the per-run Pass@1.
    pub pass_at_1: Option<f64>,
    /// Fraction of completed runs whose majority answer is correct.
    pub majority_accuracy: Option<f64>,
    pub mean_generated_tokens: f64,
    pub mean_wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStatsTable {
    pub problem_id: String,
    pub run_index: usize,
    pub steps: Vec<StepInfoStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub runs: usize,
    pub failed_runs: usize,
    /// Mean over problems of [`ProblemSummary::pass_at_1`].
    pub pass_at_1: Option<f64>,
    pub majority_accuracy: Option<f64>,
    pub total_generated_tokens: u64,
    pub mean_wall_clock_s: f64,
    /// Model used for the compute totals, if any.
    pub model: Option<String>,
    pub total_pflops: Option<f64>,
    pub problems: Vec<ProblemSummary>,
    pub step_statistics: Vec<StepStatsTable>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Aggregate run reports. With a model spec the ledger of every report is
/// priced and the total reported in PFLOPs.
pub fn summarize(
    reports: &[RunReport],
    model: Option<(&str, &ModelSpec, GenerationAccounting)>,
) -> Result<BatchSummary, CostError> {
    let mut by_problem: BTreeMap<&str, Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        by_problem.entry(r.problem_id.as_str()).or_default().push(r);
    }
    let problems: Vec<ProblemSummary> = by_problem
        .into_iter()
        .map(|(id, runs)| {
            let done: Vec<&&RunReport> = runs.iter().filter(|r| r.error.is_none()).collect();
            ProblemSummary {
                problem_id: id.to_string(),
                runs: runs.len(),
                failed_runs: runs.len() - done.len(),
                pass_at_1: mean(done.iter().filter_map(|r| r.pass_at_1)),
                majority_accuracy: mean(
                    done.iter()
                        .filter_map(|r| r.majority_correct)
                        .map(|c| if c { 1.0 } else { 0.0 }),
                ),
                mean_generated_tokens: mean(done.iter().map(|r| r.generated_tokens as f64)).unwrap_or(0.0),
                mean_wall_clock_s: mean(done.iter().map(|r| r.wall_clock_s)).unwrap_or(0.0),
            }
        })
        .collect();

    let total_pflops = match model {
        Some((_, spec, mode)) => {
            let mut total = 0.0;
            for r in reports {
                total += cost_report(&r.ledger, spec, mode)?.total_flops();
            }
            Some(total / 1e15)
        }
        None => None,
    };

    let step_statistics = reports
        .iter()
        .filter_map(|r| {
            info_statistics(&r.steps).ok().map(|steps| StepStatsTable {
                problem_id: r.problem_id.clone(),
                run_index: r.run_index,
                steps,
            })
        })
        .collect();

    Ok(BatchSummary {
        runs: reports.len(),
        failed_runs: reports.iter().filter(|r| r.error.is_some()).count(),
        pass_at_1: mean(problems.iter().filter_map(|p| p.pass_at_1)),
        majority_accuracy: mean(problems.iter().filter_map(|p| p.majority_accuracy)),
        total_generated_tokens: reports.iter().map(|r| r.generated_tokens).sum(),
        mean_wall_clock_s: mean(reports.iter().map(|r| r.wall_clock_s)).unwrap_or(0.0),
        model: model.map(|(name, _, _)| name.to_string()),
        total_pflops,
        problems,
        step_statistics,
    })
}
