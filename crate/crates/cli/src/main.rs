use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use simdiv_cli::commands::{self, error_code};
use simdiv_cli::io::emit;
use simdiv_cli::Options;

#[derive(Parser)]
#[command(
    name = "simdiv",
    version,
    about = "Similarity-sensitive diversity: LCR entropy and the Vendi score"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML file with defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    options: Options,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check a similarity matrix and evaluate the bounds between VS and LCR.
    Validate,
    /// LCR effective numbers per order (Hill numbers with --identity).
    Entropy,
    /// Vendi scores per order.
    Vendi,
    /// Eigenvalue spectrum of Z/n as CSV.
    Spectrum,
    /// LCR and VS across kernel rates, with correlation statistics.
    Sweep,
    /// Numerical counterexample search for VS_q >= D_q.
    Search,
    /// Time LCR against VS on random Gram matrices.
    Bench,
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let opts = match &cli.config {
        Some(path) => cli.options.merged_over(Options::from_file(path)?),
        None => cli.options,
    };
    let report = match cli.command {
        Command::Validate => commands::cmd_validate(&opts),
        Command::Entropy => commands::cmd_entropy(&opts),
        Command::Vendi => commands::cmd_vendi(&opts),
        Command::Spectrum => commands::cmd_spectrum(&opts),
        Command::Sweep => commands::cmd_sweep(&opts),
        Command::Search => commands::cmd_search(&opts),
        Command::Bench => commands::cmd_bench(&opts),
    }?;
    for note in &report.notes {
        eprintln!("{note}");
    }
    emit(opts.out.as_deref(), &report.output)?;
    Ok(report.status.code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(error_code(&err))
        }
    }
}
