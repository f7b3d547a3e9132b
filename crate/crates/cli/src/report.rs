use std::path::{Path, PathBuf};

use cpt_core::cost::{cost_report, CostReport, GenerationAccounting, ModelRegistry, ModelSpec};
use cpt_core::harness::{summarize, BatchSummary};
use cpt_core::orchestrator::{read_reports, RunReport};
use cpt_core::templates::PromptTemplates;
use serde::Serialize;

use crate::exit::Failure;
use crate::manifest::Manifest;
use crate::{AnalyzeArgs, CostArgs};

fn resolve_model(name: &str, registry: Option<&PathBuf>) -> Result<ModelSpec, Failure> {
    let mut reg = ModelRegistry::builtin();
    if let Some(path) = registry {
        reg = reg.merged(ModelRegistry::load(path)?);
    }
    Ok(reg.get(name)?)
}

/// Reports in `dir`; a missing directory is an I/O error, an empty one is fine.
fn load_reports(dir: &Path) -> Result<Vec<RunReport>, Failure> {
    if !dir.is_dir() {
        return Err(Failure::Io(format!("{}: not a directory", dir.display())));
    }
    read_reports(dir).map_err(Failure::Io)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

pub fn print_summary(s: &BatchSummary) {
    println!("{:<28} {:>5} {:>7} {:>8} {:>8} {:>12}", "problem", "runs", "failed", "pass@1", "mv@k", "mean tokens");
    for p in &s.problems {
        println!(
            "{:<28} {:>5} {:>7} {:>8} {:>8} {:>12.1}",
            p.problem_id,
            p.runs,
            p.failed_runs,
            opt(p.pass_at_1),
            opt(p.majority_accuracy),
            p.mean_generated_tokens
        );
    }
    println!(
        "{:<28} {:>5} {:>7} {:>8} {:>8} {:>12}",
        "all",
        s.runs,
        s.failed_runs,
        opt(s.pass_at_1),
        opt(s.majority_accuracy),
        s.total_generated_tokens
    );
    if let (Some(model), Some(pf)) = (&s.model, s.total_pflops) {
        println!("compute on {model}: {pf:.6} PFLOPs");
    }
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).expect("serializable") + "\n")
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

pub fn cmd_analyze(args: &AnalyzeArgs, argv: &[String]) -> Result<bool, Failure> {
    let reports = load_reports(&args.reports)?;
    let spec = match &args.model.model {
        Some(name) => Some((name.as_str(), resolve_model(name, args.model.registry.as_ref())?)),
        None => None,
    };
    let accounting = GenerationAccounting::from(args.model.accounting);
    let summary = summarize(&reports, spec.as_ref().map(|(n, s)| (*n, s, accounting)))?;
    print_summary(&summary);
    if let Some(out) = &args.out {
        let mut m = Manifest::new("analyze", argv, &PromptTemplates::default());
        m.input(&args.reports)?;
        m.write(out)?;
        write_json(out, "summary.json", &summary)?;
    }
    Ok(true)
}

#[derive(Debug, Serialize)]
struct CostTable {
    model: String,
    accounting: GenerationAccounting,
    reports: usize,
    total: CostReport,
}

pub fn cmd_cost(args: &CostArgs, argv: &[String]) -> Result<bool, Failure> {
    let spec = resolve_model(&args.model, args.registry.as_ref())?;
    let reports = load_reports(&args.traces)?;
    let accounting = GenerationAccounting::from(args.accounting);
    let mut total = CostReport::default();
    for r in &reports {
        total = total.merge(cost_report(&r.ledger, &spec, accounting)?);
    }

    println!(
        "{:<11} {:>9} {:>14} {:>20} {:>14} {:>11}",
        "component", "requests", "S", "Q", "PFLOPs", "latency s"
    );
    for (name, c) in [("sampling", &total.sampling), ("extraction", &total.extraction)] {
        println!(
            "{:<11} {:>9} {:>14} {:>20} {:>14.6e} {:>11.3}",
            name,
            c.requests,
            c.sq.s,
            c.sq.q,
            c.flops.petaflops(),
            c.latency_s
        );
    }
    println!("{:<11} {:>9} {:>14} {:>20} {:>14} {:>11.3}", "dedup", "-", "-", "-", "-", total.dedup_latency_s);
    println!(
        "{:<11} {:>9} {:>14} {:>20} {:>14.6e} {:>11.3}",
        "total",
        total.sampling.requests + total.extraction.requests,
        "",
        "",
        total.total_flops() / 1e15,
        total.total_latency_s
    );

    if let Some(out) = &args.out {
        let mut m = Manifest::new("cost", argv, &PromptTemplates::default());
        m.input(&args.traces)?;
        m.extra.insert("model".into(), args.model.clone().into());
        m.write(out)?;
        let table = CostTable {
            model: args.model.clone(),
            accounting,
            reports: reports.len(),
            total,
        };
        write_json(out, "cost.json", &table)?;
    }
    Ok(true)
}
