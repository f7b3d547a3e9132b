use crate::backend::ChatBackend;
use crate::config::RunConfig;
use crate::embedding::Embedder;
use crate::harness::ProblemRecord;
use crate::par::FanOut;
use crate::rng::derive_seed;

use super::{run_query, RunError, RunOptions, RunResult};

/// One `(problem, run)` cell of a batch.
#[derive(Debug)]
pub struct BatchItem {
    pub problem_id: String,
    pub run_index: usize,
    pub seed: u64,
    pub outcome: Result<RunResult, RunError>,
}

/// Seed of run `k` of `problem_id` under master seed `seed`.
pub fn run_seed(seed: u64, problem_id: &str, k: usize) -> u64 {
    derive_seed(seed, &format!("run/{problem_id}/{k}"))
}

/// `repeats` independent runs of every problem with the same options.
pub fn run_batch(
    problems: &[ProblemRecord],
    config: &RunConfig,
    backend: &dyn ChatBackend,
    embedder: &dyn Embedder,
    repeats: usize,
    parallel_queries: usize,
    options: &RunOptions,
) -> Vec<BatchItem> {
    run_batch_with(problems, config, backend, embedder, repeats, parallel_queries, |_, _, _| {
        options.clone()
    })
}

/// Like [`run_batch`], with options chosen per `(problem, run index, run seed)`.
///
/// Up to `parallel_queries` queries run at once (when the options allow
/// parallel execution). Results come back in problem-major order and a failed
/// query never stops the batch.
pub fn run_batch_with<F>(
    problems: &[ProblemRecord],
    config: &RunConfig,
    backend: &dyn ChatBackend,
    embedder: &dyn Embedder,
    repeats: usize,
    parallel_queries: usize,
    options: F,
) -> Vec<BatchItem>
where
    F: Fn(&ProblemRecord, usize, u64) -> RunOptions + Sync,
{
    assert!(repeats >= 1, "repeats must be at least 1");
    let cells: Vec<(usize, usize)> = (0..problems.len())
        .flat_map(|p| (0..repeats).map(move |k| (p, k)))
        .collect();
    let exec = match problems.first() {
        Some(p) => options(p, 0, run_seed(config.seed, &p.problem_id, 0)).execution,
        None => return Vec::new(),
    };
    let fan = FanOut::new(exec, parallel_queries.max(1));
    fan.map(&cells, |&(p, k)| {
        let problem = &problems[p];
        let seed = run_seed(config.seed, &problem.problem_id, k);
        let mut cfg = config.clone();
        cfg.seed = seed;
        let opts = options(problem, k, seed);
        tracing::info!(problem = %problem.problem_id, run = k, seed, "starting query");
        BatchItem {
            problem_id: problem.problem_id.clone(),
            run_index: k,
            seed,
            outcome: run_query(problem, &cfg, backend, embedder, &opts),
        }
    })
}
