use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cpt_core::backend::{ChatBackend, HttpChatBackend, Script, ScriptedBackend};
use cpt_core::embedding::{Embedder, HttpEmbedder, MockEmbedder};
use cpt_core::harness::{load_dataset, offline_inject, summarize, ProblemRecord};
use cpt_core::orchestrator::{
    read_reports, run_batch_with, write_report, RunErrorKind, RunOptions, RunReport, Sharing,
};
use cpt_core::pool::PoolRecord;
use cpt_core::rng::derive_rng;
use cpt_core::templates::PromptTemplates;
use cpt_core::RunConfig;

use crate::exit::Failure;
use crate::manifest::Manifest;
use crate::report::print_summary;
use crate::{execution, RunArgs};

pub enum Mode {
    Collaborative,
    Baseline,
    Inject { pools: PathBuf, ratio: u32 },
}

impl Mode {
    fn name(&self) -> &'static str {
        match self {
            Mode::Collaborative => "run",
            Mode::Baseline => "baseline",
            Mode::Inject { .. } => "inject",
        }
    }
}

pub fn load_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    Ok(RunConfig::load_with_overrides(&args.config, &overrides)?)
}

fn load_problems(args: &RunArgs, script: Option<&Script>) -> Result<Vec<ProblemRecord>, Failure> {
    let problems = match (&args.dataset, script) {
        (Some(path), _) => load_dataset(path).map_err(|e| Failure::Dataset(e.to_string()))?,
        (None, Some(s)) => s.problems.clone(),
        (None, None) => return Err(Failure::Dataset("--dataset is required without --scripted".into())),
    };
    if problems.is_empty() {
        return Err(Failure::Dataset("no problems to run".into()));
    }
    Ok(problems)
}

/// Pools of an earlier collaborative run, keyed by problem and run index.
fn load_pools(dir: &Path) -> Result<BTreeMap<String, BTreeMap<usize, Vec<PoolRecord>>>, Failure> {
    let reports = read_reports(dir).map_err(Failure::Dataset)?;
    let mut out: BTreeMap<String, BTreeMap<usize, Vec<PoolRecord>>> = BTreeMap::new();
    for r in reports {
        out.entry(r.problem_id).or_default().insert(r.run_index, r.pool);
    }
    Ok(out)
}

pub fn cmd_run(args: &RunArgs, mode: Mode, argv: &[String]) -> Result<bool, Failure> {
    let config = load_config(args)?;
    let templates = match &args.templates {
        Some(dir) => PromptTemplates::load_dir(dir)?,
        None => PromptTemplates::default(),
    };
    templates.check()?;

    let script = match &args.scripted {
        Some(p) => Some(Script::load(p).map_err(Failure::Dataset)?),
        None => None,
    };
    let problems = load_problems(args, script.as_ref())?;
    let backend: Box<dyn ChatBackend> = match &script {
        Some(s) => Box::new(ScriptedBackend::new(s.clone())),
        None => Box::new(HttpChatBackend::from_env().ok_or_else(|| {
            Failure::Backend("no backend: set CPT_API_BASE or pass --scripted".into())
        })?),
    };
    let embedder: Box<dyn Embedder> = if args.mock_embedder || script.is_some() {
        Box::new(MockEmbedder::default())
    } else {
        Box::new(HttpEmbedder::from_env().ok_or_else(|| {
            Failure::Backend("no embedder: set CPT_EMBED_URL or pass --mock-embedder".into())
        })?)
    };

    let pools = match &mode {
        Mode::Inject { pools, .. } => {
            let p = load_pools(pools)?;
            if let Some(missing) = problems.iter().find(|q| !p.contains_key(&q.problem_id)) {
                return Err(Failure::Dataset(format!(
                    "no pool for problem `{}` in {}",
                    missing.problem_id,
                    pools.display()
                )));
            }
            p
        }
        _ => BTreeMap::new(),
    };

    let mut manifest = Manifest::new(mode.name(), argv, &templates).with_config(&config);
    manifest.input(&args.config)?;
    for p in [&args.dataset, &args.scripted].into_iter().flatten() {
        manifest.input(p)?;
    }
    if let Mode::Inject { pools, ratio } = &mode {
        manifest.input(pools)?;
        manifest.extra.insert("ratio".into(), (*ratio).into());
    }
    manifest.extra.insert("repeats".into(), args.repeats.into());
    manifest.write(&args.out)?;

    let base = RunOptions {
        execution: execution(args.sequential),
        templates,
        ..Default::default()
    };
    let items = run_batch_with(
        &problems,
        &config,
        backend.as_ref(),
        embedder.as_ref(),
        args.repeats as usize,
        args.parallel_queries as usize,
        |problem, k, seed| {
            let sharing = match &mode {
                Mode::Collaborative => Sharing::Collaborative,
                Mode::Baseline => Sharing::Independent { injected: vec![] },
                Mode::Inject { ratio, .. } => {
                    let runs = &pools[&problem.problem_id];
                    let pool = runs.get(&k).or_else(|| runs.values().next()).expect("checked above");
                    let set = offline_inject(pool, *ratio, &mut derive_rng(seed, "inject")).expect("ratio in range");
                    Sharing::Independent { injected: set.entries }
                }
            };
            RunOptions {
                sharing,
                ..base.clone()
            }
        },
    );

    let gold: BTreeMap<&str, &str> = problems
        .iter()
        .map(|p| (p.problem_id.as_str(), p.gold_answer.as_str()))
        .collect();
    let reports_dir = args.out.join("reports");
    let mut reports = Vec::with_capacity(items.len());
    let (mut failed, mut backend_failed) = (0usize, 0usize);
    for item in items {
        let g = gold.get(item.problem_id.as_str()).copied();
        let report = match &item.outcome {
            Ok(r) => RunReport::from_result(r, item.run_index, g, None),
            Err(e) => {
                failed += 1;
                if matches!(e.kind, RunErrorKind::Backend { .. }) {
                    backend_failed += 1;
                }
                tracing::error!(problem = %item.problem_id, run = item.run_index, "{e}");
                RunReport::from_result(&e.partial, item.run_index, g, Some(e.to_string()))
            }
        };
        write_report(&reports_dir, &report).map_err(|e| Failure::Io(format!("{}: {e}", reports_dir.display())))?;
        reports.push(report);
    }

    let summary = summarize(&reports, None).expect("no model spec, nothing to price");
    let path = args.out.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    print_summary(&summary);

    if failed > 0 && failed == reports.len() && backend_failed == failed {
        return Err(Failure::Backend(format!("all {failed} queries failed with backend errors")));
    }
    if failed > 0 {
        eprintln!("{failed} of {} queries failed", reports.len());
    }
    Ok(failed == 0)
}
