use std::path::PathBuf;
use std::process::ExitCode;

use bakerlab::acceptance::run_all;
use bakerlab::cli::{run_with_threads, write_outputs, CliError, ExperimentConfig};
use bakerlab::maps::catalog;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bakerlab", version, about = "Baker domain and inner function experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads; overrides BAKERLAB_THREADS.
        #[arg(long)]
        threads: Option<usize>,
        /// Directory for report.json and data.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the registered maps.
    Maps,
    /// Run the acceptance suite.
    Selftest {
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("BAKERLAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("BAKERLAB_THREADS=`{v}` is not a count"))),
        Err(_) => Ok(None),
    }
}

fn run(config: PathBuf, flag: Option<usize>, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&config).map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let result = run_with_threads(&cfg, threads(flag)?)?;
    let written = write_outputs(&cfg, &result, out.as_deref())?;
    if written.is_empty() {
        let body = serde_json::to_string_pretty(&result.report).map_err(|e| CliError::Compute(e.to_string()))?;
        println!("{body}");
    } else {
        for p in written {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn selftest(flag: Option<usize>) -> Result<bool, CliError> {
    let go = || {
        let results = run_all();
        for r in &results {
            println!("{r}");
        }
        results.iter().all(|r| r.passed)
    };
    match threads(flag)? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map(|p| p.install(go))
            .map_err(|e| CliError::Compute(e.to_string())),
        None => Ok(go()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = match args.command {
        Command::Run { config, threads, out } => run(config, threads, out).map(|_| true),
        Command::Maps => {
            for entry in catalog() {
                println!("{entry}");
            }
            Ok(true)
        }
        Command::Selftest { threads } => selftest(threads),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("bakerlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
