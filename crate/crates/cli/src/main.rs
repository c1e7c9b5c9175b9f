use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use zerolab_cli::plot::{emit_plot_data, PlotKind, PlotOptions};
use zerolab_cli::report::emit_report;
use zerolab_cli::run::{run_config, RunOptions};
use zerolab_cli::{CliError, THREADS_ENV};

#[derive(Parser)]
#[command(name = "zerolab", version, about = "Zero statistics of Gaussian random sections over CP^m")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a JSON or TOML configuration.
    Run {
        config: PathBuf,
        /// Override the master seed of the run and all experiments.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: from the config, or `<config>.out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
    },
    /// Print the summary tables of a finished run.
    Report { manifest: PathBuf },
    /// Write plot-ready CSV files.
    Plot {
        manifest: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Trial shown by scatter-zeros.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Explicit coefficients a_0,...,a_N of a polynomial for scatter-zeros.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        coeffs: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, seed, out, threads } => {
            if threads == Some(0) {
                return Err(CliError::Validation(format!("{THREADS_ENV}: must be positive")));
            }
            let (_, path) = run_config(&config, &RunOptions { seed, threads, output_dir: out })?;
            println!("{}", path.display());
        }
        Command::Report { manifest } => {
            let report = emit_report(&manifest)?;
            print!("{}", report.text);
            if !report.missing.is_empty() {
                return Err(CliError::MissingOutputs(report.missing.len()));
            }
        }
        Command::Plot { manifest, kind, trial, coeffs, out } => {
            for path in emit_plot_data(&manifest, kind, &PlotOptions { trial, coeffs, out })? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
