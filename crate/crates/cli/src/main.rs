use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use didimpact_cli::{analyze, impact, synth, Overrides};

#[derive(Parser)]
#[command(name = "didimpact", version, about = "Difference-in-differences impact analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the configured models and write the report artifacts.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides the seed of a `[synth]` panel.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the synthetic panel described by the `[synth]` section.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the impact cascade for a given number of additional units.
    Impact {
        #[arg(long, allow_negative_numbers = true)]
        gap: f64,
        /// Coefficient preset (TOML); the built-in preset when omitted.
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[arg(long)]
        csv: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze { config, output_dir, seed } => analyze(&config, &Overrides { output_dir, seed }).map(|a| {
            for f in a.files {
                println!("{}", f.display());
            }
        }),
        Command::Synth { config, output_dir, seed } => {
            synth(&config, &Overrides { output_dir, seed }).map(|p| println!("{}", p.display()))
        }
        Command::Impact { gap, coeffs, csv } => impact(gap, coeffs.as_deref(), csv).map(|t| print!("{t}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
