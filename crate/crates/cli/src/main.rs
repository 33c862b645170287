use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

mod commands;

use commands::{Context, Failure};

/// Exact propagator for two coupled, driven oscillators with time-dependent
/// masses and frequencies.
#[derive(Debug, Parser)]
#[command(name = "tdco", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Worker threads for kernel grids and oracles.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Overrides the configured ħ.
    #[arg(long, global = true)]
    hbar: Option<f64>,

    /// Reserved; the pipeline is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Find the rotation angle that decouples the pair.
    Decouple,
    /// Tabulate the propagator on a grid of endpoints.
    Kernel,
    /// Evolve a Gaussian with the kernel (and the split-step oracle).
    Propagate,
    /// Run the acceptance suite.
    Verify,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return report(&Failure::input("usage", e.to_string().trim_end()));
        }
    };
    let _ = cli.seed;

    if let Some(n) = cli.threads {
        if n == 0 {
            return report(&Failure::input("usage", "--threads must be at least 1"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return report(&Failure::input("usage", &e.to_string()));
        }
    }
    if let Some(h) = cli.hbar {
        if !(h > 0.0 && h.is_finite()) {
            return report(&Failure::input("usage", "--hbar must be a positive number"));
        }
    }

    let ctx = match Context::load(cli.config.as_deref(), cli.output, cli.hbar) {
        Ok(ctx) => ctx,
        Err(f) => return report(&f),
    };
    let result = match cli.command {
        Command::Decouple => commands::decouple(&ctx),
        Command::Kernel => commands::kernel(&ctx),
        Command::Propagate => commands::propagate(&ctx),
        Command::Verify => commands::verify(&ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}

fn report(f: &Failure) -> ExitCode {
    let mut body = json!({ "error": f.kind, "message": f.message, "exit_code": f.code });
    if let Some(extra) = &f.details {
        body["details"] = extra.clone();
    }
    eprintln!("{body}");
    ExitCode::from(f.code)
}
