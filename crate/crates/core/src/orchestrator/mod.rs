//! The per-query search loop.
//!
//! Each synchronized step: pick the broadcast for the current mode, generate
//! one chunk per unfinished branch, stop if every branch is done, extract
//! notes from the new segments, admit them in branch order, and feed the new
//! count to the scheduler. On entering free-run every unfinished branch is
//! decoded to completion in one request and the loop ends.
//!
//! Generation and extraction are fork-join phases over a [`FanOut`]; admission
//! and scheduling run on the calling thread between them.

mod batch;
mod report;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    build_worker_prompt, continue_until_done, generate_chunk, BackendError, ChatBackend, GenerationChunk,
    Purpose, RequestTag,
};
use crate::branch::{BranchState, Segment};
use crate::config::{ConfigError, RunConfig};
use crate::cost::{CostLedger, Phase, RequestRecord};
use crate::embedding::{EmbedError, Embedder};
use crate::harness::{extract_answer, ProblemRecord};
use crate::mode::Mode;
use crate::par::{Execution, FanOut};
use crate::pool::{
    build_extraction_prompt, parse_bb_write, sample_broadcast, BroadcastSet, Candidate, PoolRecord, SharedPool,
};
use crate::rng::derive_rng;
use crate::scheduler::{ModeTransition, SchedulerError, SchedulerState};
use crate::templates::{PromptTemplates, TemplateError};

pub use batch::{run_batch, run_batch_with, run_seed, BatchItem};
pub use report::{read_reports, report_file_name, write_report, BranchSummary, RunReport, REPORT_FORMAT};

/// How branches share information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Sharing {
    /// Extraction, pooling and scheduled broadcasts.
    Collaborative,
    /// Plain parallel sampling: each branch decodes to completion in one
    /// request whose broadcast block holds `injected` (empty for the baseline).
    Independent { injected: Vec<PoolRecord> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Collaborative,
    Baseline,
    Inject,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub sharing: Sharing,
    /// Extract notes from the last segment of branches that finished during
    /// the current step.
    pub extract_finished: bool,
    /// Also extract from free-run continuations. The admissions are recorded
    /// in the pool and trace but never reach the scheduler.
    pub extract_free_run: bool,
    pub execution: Execution,
    pub templates: PromptTemplates,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            sharing: Sharing::Collaborative,
            extract_finished: true,
            extract_free_run: false,
            execution: Execution::default(),
            templates: PromptTemplates::default(),
        }
    }
}

impl RunOptions {
    pub fn variant(&self) -> Variant {
        match &self.sharing {
            Sharing::Collaborative => Variant::Collaborative,
            Sharing::Independent { injected } if injected.is_empty() => Variant::Baseline,
            Sharing::Independent { .. } => Variant::Inject,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchChunk {
    pub branch: usize,
    pub tokens: u64,
    pub hit_eos: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionTrace {
    /// Branches whose new segment was sent for extraction, ascending.
    pub branches: Vec<usize>,
    pub candidates: usize,
    pub new_count: usize,
    pub duplicate_count: usize,
    pub output_tokens: u64,
}

/// One generation round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    /// Mode in force while the round was generated.
    pub mode: Mode,
    pub broadcast_ids: Vec<u64>,
    pub chunks: Vec<BranchChunk>,
    /// `None` when the round ended the run before extraction.
    pub extraction: Option<ExtractionTrace>,
    pub transition: Option<ModeTransition>,
}

impl StepTrace {
    pub fn generated_tokens(&self) -> u64 {
        self.chunks.iter().map(|c| c.tokens).sum()
    }

    pub fn active_branches(&self) -> usize {
        self.chunks.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub problem_id: String,
    pub variant: Variant,
    pub config: RunConfig,
    pub branches: Vec<BranchState>,
    pub pool: SharedPool,
    pub scheduler: SchedulerState,
    /// Every generation round in order, the free-run round included.
    pub steps: Vec<StepTrace>,
    pub ledger: CostLedger,
    /// Pool ids installed as a static broadcast (independent runs).
    pub injected: Vec<u64>,
    pub wall_clock_s: f64,
}

impl RunResult {
    fn new(problem_id: &str, config: &RunConfig, variant: Variant) -> Self {
        Self {
            problem_id: problem_id.to_string(),
            variant,
            config: config.clone(),
            branches: (0..config.branch_count as usize).map(BranchState::new).collect(),
            pool: SharedPool::new(),
            scheduler: SchedulerState::from_config(config),
            steps: Vec::new(),
            ledger: CostLedger::default(),
            injected: Vec::new(),
            wall_clock_s: 0.0,
        }
    }

    /// Synchronized search steps (free-run and independent rounds excluded).
    pub fn step_count(&self) -> usize {
        self.steps.iter().filter(|s| s.mode != Mode::FreeRun).count()
    }

    pub fn final_mode(&self) -> Mode {
        self.scheduler.mode()
    }

    pub fn all_finished(&self) -> bool {
        self.branches.iter().all(BranchState::finished)
    }

    /// Final answer of each branch.
    pub fn answers(&self) -> Vec<Option<String>> {
        self.branches.iter().map(|b| extract_answer(&b.transcript())).collect()
    }

    pub fn generated_tokens(&self) -> u64 {
        self.branches.iter().map(BranchState::generated_tokens).sum()
    }

    /// The same result with every timing field zeroed.
    pub fn without_timing(&self) -> RunResult {
        let mut r = self.clone();
        r.wall_clock_s = 0.0;
        r.ledger.timing = Default::default();
        r
    }
}

#[derive(Debug, Error)]
pub enum RunErrorKind {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("template: {0}")]
    Template(#[from] TemplateError),
    #[error("step {step}, branch {branch}, {purpose:?} request: {source}")]
    Backend {
        step: usize,
        branch: usize,
        purpose: Purpose,
        source: BackendError,
    },
    #[error("step {step}, branch {branch}: embedding failed: {source}")]
    Embedding {
        step: usize,
        branch: usize,
        source: EmbedError,
    },
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
}

/// A failed query; `partial` holds everything recorded before the failure.
#[derive(Debug, Error)]
#[error("query `{}` failed: {kind}", partial.problem_id)]
pub struct RunError {
    pub kind: RunErrorKind,
    pub partial: Box<RunResult>,
}

struct Runner<'a> {
    problem: &'a ProblemRecord,
    config: &'a RunConfig,
    backend: &'a dyn ChatBackend,
    embedder: &'a dyn Embedder,
    options: &'a RunOptions,
    fan: FanOut,
    res: RunResult,
    sampling: Duration,
    extraction: Duration,
    dedup: Duration,
}

fn tag(problem: &ProblemRecord, branch: usize, step: usize, purpose: Purpose) -> RequestTag {
    RequestTag {
        problem_id: problem.problem_id.clone(),
        branch,
        step,
        purpose,
    }
}

/// Run one query to completion.
pub fn run_query(
    problem: &ProblemRecord,
    config: &RunConfig,
    backend: &dyn ChatBackend,
    embedder: &dyn Embedder,
    options: &RunOptions,
) -> Result<RunResult, RunError> {
    let started = Instant::now();
    let mut runner = Runner {
        problem,
        config,
        backend,
        embedder,
        options,
        fan: FanOut::new(options.execution, config.branch_count as usize),
        res: RunResult::new(&problem.problem_id, config, options.variant()),
        sampling: Duration::ZERO,
        extraction: Duration::ZERO,
        dedup: Duration::ZERO,
    };
    let outcome = config.check().map_err(RunErrorKind::from).and_then(|()| {
        options.templates.check()?;
        match &options.sharing {
            Sharing::Collaborative => runner.collaborative(),
            Sharing::Independent { injected } => runner.independent(injected),
        }
    });
    let mut res = runner.res;
    let total = started.elapsed().as_secs_f64();
    res.wall_clock_s = total;
    res.ledger.timing.sampling_s = runner.sampling.as_secs_f64();
    res.ledger.timing.extraction_s = runner.extraction.as_secs_f64();
    res.ledger.timing.dedup_s = runner.dedup.as_secs_f64();
    res.ledger.timing.total_s = total;
    match outcome {
        Ok(()) => Ok(res),
        Err(kind) => {
            tracing::warn!(problem = %problem.problem_id, error = %kind, "query aborted");
            Err(RunError {
                kind,
                partial: Box::new(res),
            })
        }
    }
}

impl Runner<'_> {
    fn collaborative(&mut self) -> Result<(), RunErrorKind> {
        let mut rng = derive_rng(self.config.seed, "broadcast");
        let mut step = 0usize;
        loop {
            let mode = self.res.scheduler.mode();
            let broadcast = if self.res.scheduler.broadcasting_active() {
                sample_broadcast(&self.res.pool, self.config.broadcast_size, &mut rng, step)
            } else {
                BroadcastSet {
                    step_issued: step,
                    entries: Vec::new(),
                }
            };
            let active = self.unfinished();
            let mut trace = StepTrace {
                step,
                mode,
                broadcast_ids: broadcast.ids(),
                chunks: Vec::new(),
                extraction: None,
                transition: None,
            };
            let generated = self.generate_step(step, &active, &broadcast.entries, &mut trace);
            if let Err(e) = generated {
                self.res.steps.push(trace);
                return Err(e);
            }
            if self.res.all_finished() {
                tracing::debug!(step, "all branches finished");
                self.res.steps.push(trace);
                return Ok(());
            }

            let extracted = self.extract_and_admit(step, &active);
            match extracted {
                Ok(x) => {
                    let n = x.new_count;
                    trace.extraction = Some(x);
                    let observed = self.res.scheduler.observe(n);
                    match observed {
                        Ok(t) => trace.transition = t,
                        Err(e) => {
                            self.res.steps.push(trace);
                            return Err(e.into());
                        }
                    }
                }
                Err(e) => {
                    self.res.steps.push(trace);
                    return Err(e);
                }
            }
            if let Some(t) = trace.transition {
                tracing::info!(step, from = t.from.as_str(), to = t.to.as_str(), ratio = t.ratio, "mode transition");
            }
            self.res.steps.push(trace);
            step += 1;
            if self.res.scheduler.mode() == Mode::FreeRun {
                return self.free_run(step);
            }
        }
    }

    fn unfinished(&self) -> Vec<usize> {
        self.res
            .branches
            .iter()
            .filter(|b| !b.finished())
            .map(|b| b.branch_id)
            .collect()
    }

    /// One chunk for every branch in `active`, applied in branch order.
    fn generate_step(
        &mut self,
        step: usize,
        active: &[usize],
        broadcast: &[PoolRecord],
        trace: &mut StepTrace,
    ) -> Result<(), RunErrorKind> {
        let started = Instant::now();
        let outputs = {
            let branches = &self.res.branches;
            let (problem, config, options, backend) = (self.problem, self.config, self.options, self.backend);
            self.fan.map(active, |&i| -> Result<GenerationChunk, RunErrorKind> {
                let b = &branches[i];
                let ctx = build_worker_prompt(&problem.statement, b, broadcast, &options.templates)?;
                let budget = config.chunk_tokens.min(b.remaining(config.max_tokens));
                generate_chunk(backend, &ctx, budget, &config.sampling, &tag(problem, i, step, Purpose::Generate))
                    .map_err(|source| RunErrorKind::Backend {
                        step,
                        branch: i,
                        purpose: Purpose::Generate,
                        source,
                    })
            })
        };
        self.sampling += started.elapsed();
        let mut first_error = None;
        for (&i, out) in active.iter().zip(outputs) {
            match out {
                Ok(chunk) => {
                    self.res.ledger.push(
                        step,
                        i,
                        Phase::Sampling,
                        RequestRecord::cpt_generation(chunk.usage.prompt_tokens, chunk.token_count),
                    );
                    trace.chunks.push(BranchChunk {
                        branch: i,
                        tokens: chunk.token_count,
                        hit_eos: chunk.hit_eos,
                    });
                    self.res.branches[i].append(
                        Segment {
                            step,
                            text: chunk.text,
                            tokens: chunk.token_count,
                        },
                        chunk.hit_eos,
                        self.config.max_tokens,
                    );
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        first_error.map_or(Ok(()), Err)
    }

    /// Extract from this step's segments, then admit in branch order.
    fn extract_and_admit(&mut self, step: usize, active: &[usize]) -> Result<ExtractionTrace, RunErrorKind> {
        let targets: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| {
                let b = &self.res.branches[i];
                let fresh = b.last_segment().is_some_and(|s| s.step == step && !s.text.trim().is_empty());
                fresh && (self.options.extract_finished || !b.finished())
            })
            .collect();
        let prior = self.res.pool.recent(self.config.history_notes);

        let started = Instant::now();
        let outputs = {
            let branches = &self.res.branches;
            let (problem, config, options, backend) = (self.problem, self.config, self.options, self.backend);
            let prior = &prior;
            self.fan.map(&targets, |&i| -> Result<GenerationChunk, RunErrorKind> {
                let b = &branches[i];
                let segment = &b.last_segment().expect("target has a segment").text;
                let ctx = build_extraction_prompt(&problem.statement, b, segment, prior, &options.templates)?;
                generate_chunk(
                    backend,
                    &ctx,
                    config.extraction_tokens,
                    &config.sampling,
                    &tag(problem, i, step, Purpose::Extract),
                )
                .map_err(|source| RunErrorKind::Backend {
                    step,
                    branch: i,
                    purpose: Purpose::Extract,
                    source,
                })
            })
        };
        self.extraction += started.elapsed();

        let mut per_branch: Vec<(usize, Vec<Candidate>)> = Vec::with_capacity(targets.len());
        let mut output_tokens = 0;
        for (&i, out) in targets.iter().zip(outputs) {
            let chunk = out?;
            self.res.ledger.push(
                step,
                i,
                Phase::Extraction,
                RequestRecord::cpt_extraction(chunk.usage.prompt_tokens, chunk.token_count),
            );
            output_tokens += chunk.token_count;
            per_branch.push((i, parse_bb_write(&chunk.text)));
        }

        let started = Instant::now();
        self.res.pool.begin_step(step);
        let mut candidates = 0;
        for (branch, cands) in &per_branch {
            for c in cands {
                candidates += 1;
                self.res
                    .pool
                    .admit(c, *branch, self.embedder, self.config.dedup_threshold)
                    .map_err(|source| RunErrorKind::Embedding {
                        step,
                        branch: *branch,
                        source,
                    })?;
            }
        }
        self.dedup += started.elapsed();
        let counts = *self.res.pool.admission_log().last().expect("step opened");
        Ok(ExtractionTrace {
            branches: targets,
            candidates,
            new_count: counts.new,
            duplicate_count: counts.duplicate,
            output_tokens,
        })
    }

    /// Decode every unfinished branch to completion, one request each.
    fn complete_all(
        &mut self,
        step: usize,
        broadcast: &[PoolRecord],
        phase_kind: fn(u64, u64) -> RequestRecord,
        trace: &mut StepTrace,
    ) -> Result<(), RunErrorKind> {
        let active = self.unfinished();
        let started = Instant::now();
        let outputs = {
            let branches = &self.res.branches;
            let (problem, config, options, backend) = (self.problem, self.config, self.options, self.backend);
            self.fan.map(&active, |&i| -> Result<(BranchState, GenerationChunk), RunErrorKind> {
                let mut b = branches[i].clone();
                let ctx = build_worker_prompt(&problem.statement, &b, broadcast, &options.templates)?;
                let chunk = continue_until_done(
                    backend,
                    &ctx,
                    &mut b,
                    &config.sampling,
                    config.max_tokens,
                    &tag(problem, i, step, Purpose::Generate),
                )
                .map_err(|source| RunErrorKind::Backend {
                    step,
                    branch: i,
                    purpose: Purpose::Generate,
                    source,
                })?;
                Ok((b, chunk))
            })
        };
        self.sampling += started.elapsed();
        let mut first_error = None;
        for (&i, out) in active.iter().zip(outputs) {
            match out {
                Ok((branch, chunk)) => {
                    self.res.ledger.push(
                        step,
                        i,
                        Phase::Sampling,
                        phase_kind(chunk.usage.prompt_tokens, chunk.token_count),
                    );
                    trace.chunks.push(BranchChunk {
                        branch: i,
                        tokens: chunk.token_count,
                        hit_eos: chunk.hit_eos,
                    });
                    self.res.branches[i] = branch;
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        first_error.map_or(Ok(()), Err)
    }

    fn free_run(&mut self, step: usize) -> Result<(), RunErrorKind> {
        let mut trace = StepTrace {
            step,
            mode: Mode::FreeRun,
            broadcast_ids: Vec::new(),
            chunks: Vec::new(),
            extraction: None,
            transition: None,
        };
        let active = self.unfinished();
        let mut outcome = self.complete_all(step, &[], RequestRecord::cpt_generation, &mut trace);
        if outcome.is_ok() && self.options.extract_free_run {
            match self.extract_and_admit(step, &active) {
                Ok(x) => trace.extraction = Some(x),
                Err(e) => outcome = Err(e),
            }
        }
        self.res.steps.push(trace);
        outcome
    }

    fn independent(&mut self, injected: &[PoolRecord]) -> Result<(), RunErrorKind> {
        self.res.injected = injected.iter().map(|r| r.unit_id).collect();
        let mut trace = StepTrace {
            step: 0,
            mode: Mode::FreeRun,
            broadcast_ids: self.res.injected.clone(),
            chunks: Vec::new(),
            extraction: None,
            transition: None,
        };
        let outcome = self.complete_all(0, injected, RequestRecord::full_prefill, &mut trace);
        self.res.steps.push(trace);
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Script, ScriptedBackend, ScriptedChunk, ScriptedExtraction};
    use crate::config::RawRunConfig;
    use crate::embedding::MockEmbedder;

    fn config(k: u32, c: u64, l: u64) -> RunConfig {
        RawRunConfig {
            branch_count: Some(k),
            chunk_tokens: Some(c),
            max_tokens: Some(l),
            ..Default::default()
        }
        .validate()
        .unwrap()
    }

    fn problem() -> ProblemRecord {
        ProblemRecord {
            problem_id: "p".into(),
            statement: "What is 2+2?".into(),
            gold_answer: "4".into(),
        }
    }

    fn bb(notes: &[&str]) -> String {
        let mut s = String::from("[BB_WRITE]\n");
        for n in notes {
            s.push_str(&format!("- (type=insight) {n}\n"));
        }
        s + "[/BB_WRITE]"
    }

    #[test]
    fn early_exit_when_all_finish() {
        let backend = ScriptedBackend::new(Script {
            generate: (0..3)
                .map(|b| ScriptedChunk::new(b, 0, "so \\boxed{4}", 5, true))
                .collect(),
            ..Default::default()
        });
        let r = run_query(&problem(), &config(3, 16, 64), &backend, &MockEmbedder::default(), &RunOptions::default())
            .unwrap();
        assert_eq!(r.step_count(), 1);
        assert_eq!(r.final_mode(), Mode::Probe);
        assert!(r.pool.is_empty());
        assert!(r.steps[0].extraction.is_none());
        assert_eq!(r.answers(), vec![Some("4".to_string()); 3]);
        assert!(backend.calls().iter().all(|c| c.tag.purpose == Purpose::Generate));
    }

    #[test]
    fn budget_is_min_of_chunk_and_remaining() {
        // L_max = 10, C = 4: budgets 4, 4, 2.
        let backend = ScriptedBackend::new(Script {
            generate: (0..3).map(|s| ScriptedChunk::new(0, s, "w w w w", 4, false)).collect(),
            default_extraction: Some(bb(&[])),
            ..Default::default()
        });
        let r = run_query(&problem(), &config(1, 4, 10), &backend, &MockEmbedder::default(), &RunOptions::default())
            .unwrap();
        let budgets: Vec<u64> = backend
            .calls()
            .iter()
            .filter(|c| c.tag.purpose == Purpose::Generate)
            .map(|c| c.budget_tokens)
            .collect();
        assert_eq!(budgets, vec![4, 4, 2]);
        assert_eq!(r.branches[0].generated_tokens(), 10);
        assert_eq!(r.branches[0].finish_reason(), crate::branch::FinishReason::LengthCap);
        assert!(r.branches[0].accounting_consistent());
    }

    #[test]
    fn self_sharing_single_branch() {
        // K = 1, W = 1, forcing start threshold: the note admitted at step 0
        // is broadcast back to the same branch from step 2 on.
        let mut cfg = config(1, 4, 40);
        cfg.window_size = 1;
        cfg.start_threshold = 1.0;
        cfg.stop_threshold = 0.0;
        let backend = ScriptedBackend::new(Script {
            generate: (0..10).map(|s| ScriptedChunk::new(0, s, "think more", 4, false)).collect(),
            extract: vec![ScriptedExtraction {
                problem: None,
                branch: 0,
                step: 0,
                raw: bb(&["four is even"]),
                tokens: 6,
            }],
            default_extraction: Some(bb(&[])),
            ..Default::default()
        });
        let r = run_query(&problem(), &cfg, &backend, &MockEmbedder::default(), &RunOptions::default()).unwrap();
        assert_eq!(r.pool.len(), 1);
        // Step 0: n=1 sets g_ref. Step 1: n=0, r=0 < 1 -> Broadcast.
        assert_eq!(r.scheduler.transitions()[0].step, 2);
        assert!(r.steps[1].broadcast_ids.is_empty());
        assert_eq!(r.steps[2].broadcast_ids, vec![0]);
        assert!(r.all_finished());
    }

    #[test]
    fn backend_failure_keeps_partial_trace() {
        let backend = ScriptedBackend::new(Script {
            generate: vec![ScriptedChunk::new(0, 0, "a", 1, false)],
            default_extraction: Some(bb(&[])),
            ..Default::default()
        });
        let err = run_query(&problem(), &config(1, 4, 40), &backend, &MockEmbedder::default(), &RunOptions::default())
            .unwrap_err();
        assert!(matches!(err.kind, RunErrorKind::Backend { step: 1, .. }));
        assert_eq!(err.partial.steps.len(), 2);
        assert_eq!(err.partial.branches[0].generated_tokens(), 1);
    }

    #[test]
    fn invalid_config_aborts_before_generation() {
        let mut cfg = config(1, 4, 40);
        cfg.stop_threshold = 0.9;
        let backend = ScriptedBackend::new(Script::default());
        let err = run_query(&problem(), &cfg, &backend, &MockEmbedder::default(), &RunOptions::default()).unwrap_err();
        assert!(matches!(err.kind, RunErrorKind::Config(_)));
        assert!(backend.calls().is_empty());
    }

    #[test]
    fn independent_run_uses_injected_broadcast() {
        let backend = ScriptedBackend::new(Script {
            generate: (0..2).map(|b| ScriptedChunk::new(b, 0, "\\boxed{4}", 3, true)).collect(),
            ..Default::default()
        });
        let injected = vec![PoolRecord {
            unit_id: 7,
            step: 0,
            branch: 0,
            kind: crate::pool::NoteKind::Insight,
            text: "try small cases".into(),
        }];
        let opts = RunOptions {
            sharing: Sharing::Independent { injected },
            ..Default::default()
        };
        let r = run_query(&problem(), &config(2, 4, 40), &backend, &MockEmbedder::default(), &opts).unwrap();
        assert_eq!(r.variant, Variant::Inject);
        assert_eq!(r.injected, vec![7]);
        assert_eq!(r.step_count(), 0);
        assert!(r.ledger.entries.iter().all(|e| e.record.kind == crate::cost::RequestKind::FullPrefill));
        let calls = backend.calls();
        assert_eq!(calls.len(), 2);
        assert!(calls.iter().all(|c| c.budget_tokens == 40));
    }
}
