mod exit;
mod manifest;
mod report;
mod run;
mod theory;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpt_core::cost::GenerationAccounting;
use cpt_core::Execution;

use exit::Failure;

/// Collaborative parallel branch search: run experiments, analyze reports,
/// estimate compute and check the information-theoretic identities.
///
/// Exit codes: 0 success, 1 query or check failure, 2 usage, 3 invalid
/// config, 4 dataset, 5 backend unreachable, 6 I/O, 7 unknown model spec.
#[derive(Debug, Parser)]
#[command(name = "cpt", version)]
struct Cli {
    /// Log verbosity on stderr.
    #[arg(long, global = true, default_value = "warn")]
    log_level: tracing::Level,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Collaborative search over a dataset.
    Run(RunArgs),
    /// Independent sampling: each branch decodes to completion alone.
    Baseline(RunArgs),
    /// Independent sampling with a static broadcast drawn from earlier pools.
    Inject(InjectArgs),
    /// Pass@1, majority vote and information statistics over run reports.
    Analyze(AnalyzeArgs),
    /// Per-component FLOPs and latency from run reports.
    Cost(CostArgs),
    /// Numeric checks of the redundancy identities and Gaussian model.
    Theory(TheoryArgs),
    /// Scripted end-to-end scenario plus theory checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run config.
    #[arg(long)]
    config: PathBuf,
    /// Line-delimited problems; defaults to the problems of `--scripted`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Replay a fixture script instead of calling `CPT_API_BASE`.
    #[arg(long)]
    scripted: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// `key=value` config override, repeatable (`K=8`, `tau_dup=0.8`, ...).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Base seed; run seeds are derived per problem and repeat.
    #[arg(long)]
    seed: Option<u64>,
    /// Independent runs per problem.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    repeats: u64,
    /// Queries in flight at once.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    parallel_queries: u64,
    /// Hashed bag-of-words embedder instead of `CPT_EMBED_URL`. Implied by `--scripted`.
    #[arg(long)]
    mock_embedder: bool,
    /// Directory with prompt templates overriding the built-in ones.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Run every fan-out sequentially.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct InjectArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Reports of a collaborative run whose pools are sampled.
    #[arg(long)]
    pools: PathBuf,
    /// Percentage of each pool to inject.
    #[arg(long, value_parser = clap::value_parser!(u32).range(0..=100))]
    ratio: u32,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Accounting {
    Reprefill,
    Cached,
}

impl From<Accounting> for GenerationAccounting {
    fn from(a: Accounting) -> Self {
        match a {
            Accounting::Reprefill => GenerationAccounting::Reprefill,
            Accounting::Cached => GenerationAccounting::Cached,
        }
    }
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model spec name from the registry.
    #[arg(long)]
    model: Option<String>,
    /// Extra registry TOML merged over the built-in one.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// How synchronized generation requests are priced.
    #[arg(long, value_enum, default_value = "reprefill")]
    accounting: Accounting,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Directory of run reports.
    #[arg(long)]
    reports: PathBuf,
    /// Write `summary.json` and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct CostArgs {
    /// Directory of run reports.
    #[arg(long)]
    traces: PathBuf,
    /// Model spec name from the registry.
    #[arg(long)]
    model: String,
    /// Extra registry TOML merged over the built-in one.
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "reprefill")]
    accounting: Accounting,
    /// Write `cost.json` and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TheoryArgs {
    /// Random joints (and joint pairs) per discrete check.
    #[arg(long, default_value_t = 100)]
    joints: usize,
    #[arg(long, default_value_t = 100_000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit K_eff and MI curves for K = 1..=k_max.
    #[arg(long)]
    k_max: Option<usize>,
    /// Correlations for the K_eff curve.
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    rho_grid: Vec<f64>,
    /// Noise variances for the MI curve.
    #[arg(long, default_value_t = 1.0)]
    sigma_u2: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma_c2: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
    /// Negative control: use a deliberately wrong Gaussian closed form.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    /// Also write the scenario report and manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn dispatch(cli: Cli) -> Result<bool, Failure> {
    let argv: Vec<String> = std::env::args().collect();
    match cli.command {
        Command::Run(a) => run::cmd_run(&a, run::Mode::Collaborative, &argv),
        Command::Baseline(a) => run::cmd_run(&a, run::Mode::Baseline, &argv),
        Command::Inject(a) => run::cmd_run(
            &a.run,
            run::Mode::Inject {
                pools: a.pools.clone(),
                ratio: a.ratio,
            },
            &argv,
        ),
        Command::Analyze(a) => report::cmd_analyze(&a, &argv),
        Command::Cost(a) => report::cmd_cost(&a, &argv),
        Command::Theory(a) => theory::cmd_theory(&a, &argv),
        Command::Selftest(a) => theory::cmd_selftest(&a, &argv),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_max_level(cli.log_level)
        .with_writer(std::io::stderr)
        .init();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(exit::FAILURES),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
