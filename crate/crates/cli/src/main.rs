use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use invpde::experiment::{run_sweep, write_csv, RunConfig};
use invpde::problem::Benchmark;

#[derive(Parser)]
#[command(name = "invpde", version, about = "Inverse parametric PDE benchmarks on local random-feature networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config and write CSV.
    Run {
        config: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed_basis: Option<u64>,
        #[arg(long)]
        seed_noise: Option<u64>,
        /// Run sweep points concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// List the built-in benchmarks.
    ListBenchmarks,
}

fn run(config: PathBuf, out: Option<PathBuf>, seed_basis: Option<u64>, seed_noise: Option<u64>, parallel: bool) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match RunConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed_basis {
        cfg.seeds.basis = s;
    }
    if let Some(s) = seed_noise {
        cfg.seeds.noise = s;
    }
    let rows = match run_sweep(&cfg, parallel) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match &out {
        Some(path) => File::create(path)
            .map_err(|e| e.to_string())
            .and_then(|f| write_csv(&cfg, &rows, f).map_err(|e| e.to_string())),
        None => write_csv(&cfg, &rows, io::stdout().lock()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    for row in rows.iter().filter(|r| r.failed()) {
        eprintln!("sweep value {}: {}", row.value, row.status);
    }
    if rows.iter().any(|r| r.failed()) {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed_basis,
            seed_noise,
            parallel,
        } => run(config, out, seed_basis, seed_noise, parallel),
        Command::ListBenchmarks => {
            let mut stdout = io::stdout().lock();
            for b in Benchmark::ALL {
                let _ = writeln!(stdout, "{:<22} {}", b.name(), b.description());
            }
            ExitCode::SUCCESS
        }
    }
}
