use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levyflow::cli::{parse_config_with, run_experiment, CliError, Experiment, SEED_ENV};

#[derive(Parser)]
#[command(name = "levyflow", version, about = "Run a levyflow experiment and write its CSV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Ddi(RunArgs),
    Flow(RunArgs),
    #[command(name = "spde_routes")]
    SpdeRoutes(RunArgs),
    #[command(name = "weak_residual")]
    WeakResidual(RunArgs),
    Interlace(RunArgs),
    Monotonicity(RunArgs),
    #[command(name = "translation_growth")]
    TranslationGrowth(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Sectioned `key = value` config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; defaults to `[run] output`, then `<experiment>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed and `LEVYFLOW_SEED`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel sections.
    #[arg(long)]
    threads: Option<usize>,
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::Ddi(a) => (Experiment::Ddi, a),
            Command::Flow(a) => (Experiment::Flow, a),
            Command::SpdeRoutes(a) => (Experiment::SpdeRoutes, a),
            Command::WeakResidual(a) => (Experiment::WeakResidual, a),
            Command::Interlace(a) => (Experiment::Interlace, a),
            Command::Monotonicity(a) => (Experiment::Monotonicity, a),
            Command::TranslationGrowth(a) => (Experiment::TranslationGrowth, a),
        }
    }
}

fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn run(experiment: Experiment, args: RunArgs) -> Result<PathBuf, CliError> {
    if let Some(n) = args.threads {
        levyflow::par::set_threads(n).map_err(|e| CliError::Io {
            path: "--threads".into(),
            source: std::io::Error::other(e),
        })?;
    }
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(io_err(p))?,
        None => String::new(),
    };
    let mut cfg = parse_config_with(&text, Some(experiment))?;
    let env = std::env::var(SEED_ENV).ok();
    cfg.run.seed = Some(cfg.resolve_seed(args.seed, env.as_deref())?);
    let out = args
        .out
        .or_else(|| cfg.run.output.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("{experiment}.csv")));
    let artifact = run_experiment(&cfg)?;
    std::fs::write(&out, artifact.to_bytes()).map_err(io_err(&out))?;
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = cli.command.split();
    match run(experiment, args) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("levyflow: {e}");
            ExitCode::FAILURE
        }
    }
}
