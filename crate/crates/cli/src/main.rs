//! `paralab` command-line entry point.
//!
//! Exit codes: 0 on success, 2 on a configuration or invariant violation, 3 on a
//! numerical-tolerance failure. `PARALAB_THREADS` caps the worker pool size.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paralab::runner::{self, Experiment, ExperimentConfig};
use paralab::Error;

#[derive(Parser)]
#[command(name = "paralab", version, about = "Multilinear paraproduct experiments on periodic grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a key-value config file.
    Run { config: PathBuf },
    /// Run the invariant suite and its small sub-experiments.
    Selftest {
        #[arg(long, default_value = "selftest-out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Decompose a symbol file into translated paraproduct pieces.
    Decompose {
        symbol_file: PathBuf,
        #[arg(long, default_value = "decompose-out")]
        out: PathBuf,
    },
    /// Print the full default config of an experiment.
    Defaults { experiment: String },
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("PARALAB_THREADS") else { return Ok(()) };
    let threads: usize = v.trim().parse().map_err(|_| Error::Config {
        key: "PARALAB_THREADS".into(),
        message: format!("expected a positive integer, got `{v}`"),
    })?;
    if threads == 0 {
        return Err(Error::Config { key: "PARALAB_THREADS".into(), message: "must be positive".into() });
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config { key: "PARALAB_THREADS".into(), message: e.to_string() })
}

fn execute(command: Command) -> Result<runner::RunSummary, Error> {
    configure_threads()?;
    match command {
        Command::Run { config } => runner::run_config(&config),
        Command::Selftest { out, seed } => {
            let mut c = ExperimentConfig::defaults(Experiment::Selftest);
            c.seed = seed;
            c.output.dir = out;
            runner::run(&c, std::path::Path::new(""))
        }
        Command::Decompose { symbol_file, out } => {
            let sigma = runner::read_symbol_file(&symbol_file)?;
            let c = runner::decompose_config(&sigma, symbol_file, out);
            runner::run(&c, std::path::Path::new(""))
        }
        Command::Defaults { experiment } => {
            let e = Experiment::ALL.into_iter().find(|e| e.name() == experiment).ok_or_else(|| Error::Config {
                key: "experiment".into(),
                message: format!("unknown experiment `{experiment}`"),
            })?;
            print!("{}", ExperimentConfig::defaults(e).to_text());
            Ok(runner::RunSummary::default())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(summary) => {
            for path in summary.artifacts {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("paralab: {e}");
            ExitCode::from(runner::exit_code(&e) as u8)
        }
    }
}
