use std::fmt::Write as _;
use std::path::Path;

use cpt_core::backend::{Script, ScriptedBackend};
use cpt_core::embedding::MockEmbedder;
use cpt_core::orchestrator::{run_query, run_seed, write_report, RunOptions, RunReport};
use cpt_core::templates::PromptTemplates;
use cpt_core::theory::{keff_curve, mi_curve, run_checks, CheckConfig, CheckResult, Perturbation};
use cpt_core::{Execution, RunConfig};

use crate::exit::Failure;
use crate::manifest::Manifest;
use crate::{execution, SelftestArgs, TheoryArgs};

const SCENARIO_SCRIPT: &str = include_str!("../../core/tests/fixtures/nine_step/script.json");
const SCENARIO_CONFIG: &str = include_str!("../../core/tests/fixtures/nine_step/config.toml");
const SCENARIO_GOLDEN: &str = include_str!("../../core/tests/fixtures/nine_step/golden_report.json");

fn print_row(name: &str, cases: usize, max_error: f64, tolerance: f64, passed: bool) {
    println!(
        "{:<28} {:>6} {:>12.3e} {:>10.0e}  {}",
        name,
        cases,
        max_error,
        tolerance,
        if passed { "PASS" } else { "FAIL" }
    );
}

fn print_checks(results: &[CheckResult]) {
    println!("{:<28} {:>6} {:>12} {:>10}  result", "check", "cases", "max error", "tolerance");
    for r in results {
        print_row(&r.name, r.cases, r.max_error, r.tolerance, r.passed);
    }
}

fn jsonl<T: serde::Serialize>(rows: &[T]) -> String {
    rows.iter().fold(String::new(), |mut s, r| {
        let _ = writeln!(s, "{}", serde_json::to_string(r).expect("serializable"));
        s
    })
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

pub fn cmd_theory(args: &TheoryArgs, argv: &[String]) -> Result<bool, Failure> {
    let cfg = CheckConfig {
        joints: args.joints,
        mc_samples: args.mc_samples,
        seed: args.seed,
        execution: execution(args.sequential),
        perturbation: args.inject_fault.then_some(Perturbation::UnscaledSharedNoise),
    };
    let curves = match args.k_max {
        Some(k) => {
            let keff = keff_curve(k, &args.rho_grid).map_err(|e| Failure::Usage(e.to_string()))?;
            let mi = mi_curve(k, args.sigma_u2, args.sigma_c2).map_err(|e| Failure::Usage(e.to_string()))?;
            Some((jsonl(&keff), jsonl(&mi)))
        }
        None => None,
    };
    let results = run_checks(&cfg);
    print_checks(&results);
    let passed = results.iter().all(|r| r.passed);

    match (&args.out, &curves) {
        (Some(out), _) => {
            let mut m = Manifest::new("theory", argv, &PromptTemplates::default());
            m.seed = Some(args.seed);
            m.extra.insert("check_config".into(), serde_json::to_value(cfg).expect("serializable"));
            m.write(out)?;
            write(out, "checks.json", &(serde_json::to_string_pretty(&results).expect("serializable") + "\n"))?;
            if let Some((keff, mi)) = &curves {
                write(out, "keff.jsonl", keff)?;
                write(out, "mi.jsonl", mi)?;
            }
        }
        (None, Some((keff, _))) => print!("{keff}"),
        (None, None) => {}
    }
    Ok(passed)
}

fn scenario_report(exec: Execution) -> Result<RunReport, String> {
    let script: Script = serde_json::from_str(SCENARIO_SCRIPT).map_err(|e| e.to_string())?;
    let mut config = RunConfig::from_toml_str(SCENARIO_CONFIG).map_err(|e| e.to_string())?;
    let problem = script.problems.first().ok_or("fixture has no problem")?.clone();
    config.seed = run_seed(config.seed, &problem.problem_id, 0);
    let backend = ScriptedBackend::new(script);
    let options = RunOptions {
        execution: exec,
        ..Default::default()
    };
    let r = run_query(&problem, &config, &backend, &MockEmbedder::default(), &options).map_err(|e| e.to_string())?;
    Ok(RunReport::from_result(&r, 0, Some(&problem.gold_answer), None))
}

pub fn cmd_selftest(args: &SelftestArgs, argv: &[String]) -> Result<bool, Failure> {
    let exec = execution(args.sequential);
    let golden: RunReport = serde_json::from_str(SCENARIO_GOLDEN).expect("embedded golden report parses");
    let (scenario_ok, detail, report) = match (scenario_report(exec), scenario_report(Execution::Sequential)) {
        (Ok(a), Ok(b)) => {
            let a0 = a.without_timing();
            let same = a0 == b.without_timing();
            let golden_ok = a0 == golden;
            let detail = match (same, golden_ok) {
                (true, true) => "matches golden report".to_string(),
                (false, _) => "execution modes disagree".to_string(),
                (true, false) => "differs from golden report".to_string(),
            };
            (same && golden_ok, detail, Some(a))
        }
        (Err(e), _) | (_, Err(e)) => (false, e, None),
    };

    let results = run_checks(&CheckConfig {
        execution: exec,
        ..Default::default()
    });
    println!("{:<28} {:>6} {:>12} {:>10}  result", "check", "cases", "max error", "tolerance");
    println!(
        "{:<28} {:>6} {:>12} {:>10}  {}  ({detail})",
        "scripted_scenario",
        1,
        "-",
        "exact",
        if scenario_ok { "PASS" } else { "FAIL" }
    );
    for r in &results {
        print_row(&r.name, r.cases, r.max_error, r.tolerance, r.passed);
    }

    if let Some(out) = &args.out {
        Manifest::new("selftest", argv, &PromptTemplates::default()).write(out)?;
        if let Some(r) = &report {
            write_report(out, r).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
        }
        write(out, "checks.json", &(serde_json::to_string_pretty(&results).expect("serializable") + "\n"))?;
    }
    Ok(scenario_ok && results.iter().all(|r| r.passed))
}
