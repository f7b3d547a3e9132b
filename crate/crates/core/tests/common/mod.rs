#![allow(dead_code)]

use std::path::{Path, PathBuf};

use cpt_core::backend::{Script, ScriptedBackend};
use cpt_core::embedding::MockEmbedder;
use cpt_core::harness::ProblemRecord;
use cpt_core::orchestrator::{run_query, run_seed, RunOptions, RunReport, RunResult};
use cpt_core::{Execution, RunConfig};

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub struct Scenario {
    pub script: Script,
    pub config: RunConfig,
    pub problem: ProblemRecord,
}

pub fn scenario(name: &str) -> Scenario {
    let dir = fixture_dir(name);
    let script = Script::load(&dir).expect("fixture script");
    let mut config = RunConfig::load(&dir.join("config.toml")).expect("fixture config");
    let problem = script.problems[0].clone();
    // Same seed as run 0 of a batch, so `cpt run --repeats 1` reproduces the golden report.
    config.seed = run_seed(config.seed, &problem.problem_id, 0);
    Scenario {
        script,
        config,
        problem,
    }
}

impl Scenario {
    pub fn run(&self, execution: Execution) -> RunResult {
        let backend = ScriptedBackend::new(self.script.clone());
        let options = RunOptions {
            execution,
            ..Default::default()
        };
        run_query(&self.problem, &self.config, &backend, &MockEmbedder::default(), &options)
            .expect("scripted run succeeds")
    }

    pub fn report(&self, execution: Execution) -> RunReport {
        let r = self.run(execution);
        RunReport::from_result(&r, 0, Some(&self.problem.gold_answer), None).without_timing()
    }
}

/// Compare `actual` against the golden file, rewriting it when `CPT_BLESS` is set.
pub fn check_golden(path: &Path, actual: &str) -> Result<(), String> {
    if std::env::var_os("CPT_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        let line = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| expected.lines().count().min(actual.lines().count()));
        Err(format!("{} differs from golden at line {}", path.display(), line + 1))
    }
}

pub fn report_json(report: &RunReport) -> String {
    serde_json::to_string_pretty(report).unwrap() + "\n"
}

pub const NINE_STEP_NEW: [usize; 9] = [10, 8, 12, 3, 3, 3, 0, 1, 1];

pub mod props;
pub mod prompts;
