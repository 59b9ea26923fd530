//! `resflow` command-line harness.
//!
//! ```text
//! resflow run --config exp.toml --seed 3 --out results/
//! resflow run --experiment order_study --system nodal_sink
//! resflow systems
//! ```
//!
//! Settings resolve as config file, then the `RESFLOW_SEED` environment
//! variable, then flags. On failure a JSON object
//! `{"error":{"kind":..,"message":..}}` is printed to stderr and the exit
//! code is nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use resflow::experiment::{self, ExperimentConfig, ExperimentKind};
use resflow::system;
use resflow::Error;
use serde_json::json;

const SEED_ENV: &str = "RESFLOW_SEED";

#[derive(Parser)]
#[command(name = "resflow", version, about = "Residual network flow-map experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV outputs.
    Run(Box<RunArgs>),
    /// List the cataloged systems.
    Systems,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment manifest (.toml, otherwise JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// arch_sweep, target_study, density_study, trajectory or order_study.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    system: Option<String>,
    /// Time lag; defaults to the system's.
    #[arg(long)]
    dt: Option<f64>,
    /// Learning pairs J.
    #[arg(long)]
    pairs: Option<usize>,
    /// Training iterations K (full passes).
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initializations per sweep cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

fn resolve(args: &RunArgs, env_seed: Option<String>) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let kind = args
                .experiment
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("--experiment is required without --config".into()))?;
            let sys = args
                .system
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("--system is required without --config".into()))?;
            ExperimentConfig::new(kind.parse()?, sys)
        }
    };
    if let Some(s) = env_seed {
        cfg.seed = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{SEED_ENV} is not an unsigned integer: `{s}`")))?;
    }
    if let Some(k) = &args.experiment {
        cfg.experiment = k.parse::<ExperimentKind>()?;
    }
    if let Some(s) = &args.system {
        cfg.system = s.clone();
    }
    if args.dt.is_some() {
        cfg.dt = args.dt;
    }
    if let Some(j) = args.pairs {
        cfg.pairs = j;
    }
    if let Some(k) = args.iterations {
        cfg.iterations = k;
    }
    if let Some(lr) = args.lr {
        cfg.learning_rate = lr;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.runs {
        cfg.runs = r;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    if args.jobs.is_some() {
        cfg.jobs = args.jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Systems => {
            for s in system::catalog() {
                println!("{}\t{}\t{}", s.id(), s.dim(), s.default_dt());
            }
        }
        Command::Run(args) => {
            let cfg = resolve(&args, std::env::var(SEED_ENV).ok())?;
            let files = experiment::run(&cfg)?;
            let report = json!({
                "experiment": cfg.experiment.as_str(),
                "system": cfg.system,
                "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            });
            println!("{report}");
        }
    }
    Ok(())
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_string(), 2),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string(), 1),
    }
}
