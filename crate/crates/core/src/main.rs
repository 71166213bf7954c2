use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use patternlab::cli::{self, RunOptions, PLOT_IDS};
use patternlab::{Error, Result};

#[derive(Parser)]
#[command(name = "patternlab", version, about = "d-pattern analysis and size-generalization experiments for GNNs")]
struct Cli {
    /// Worker threads for seed-level parallelism (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment recipe from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed_offset: Option<u64>,
    },
    /// Compare depth-d pattern histograms of the small and large size splits.
    PatternReport {
        /// Dataset directory (default: $PATTERNLAB_DATA_DIR/<name>).
        #[arg(long)]
        dataset_dir: Option<PathBuf>,
        #[arg(long)]
        name: String,
        #[arg(long, short, default_value_t = 2)]
        depth: usize,
        /// Report file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a metrics CSV into tidy plot data.
    ExportPlotdata {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PLOT_IDS.map(|p| p.0)))]
        plot: String,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the construction and invariant self-checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn with_output(out: Option<&PathBuf>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let mut buf = Vec::new();
            f(&mut buf)?;
            std::fs::write(path, buf).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
        }
        None => f(&mut std::io::stdout().lock()),
    }
}

fn dispatch(args: Cli) -> Result<bool> {
    if let Some(t) = args.threads {
        // Ignored if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    match args.command {
        Command::Run { config, out, seed_offset } => {
            let opts = RunOptions { out, threads: args.threads, seed_offset };
            let dir = cli::cmd_run(&config, &opts)?;
            eprintln!("wrote {}", dir.display());
        }
        Command::PatternReport { dataset_dir, name, depth, out } => {
            let dir = cli::resolve_dataset_dir(dataset_dir.as_deref(), &name)?;
            let mut tv = 0.0;
            with_output(out.as_ref(), |mut w| {
                tv = cli::cmd_pattern_report(&dir, &name, depth, &mut w)?;
                Ok(())
            })?;
            eprintln!("{name} d={depth} tv_distance={tv}");
        }
        Command::ExportPlotdata { metrics, plot, out } => {
            with_output(out.as_ref(), |mut w| cli::cmd_export_plotdata(&metrics, &plot, &mut w))?;
        }
        Command::Verify { seed } => {
            let checks = cli::run_verify(seed)?;
            return cli::print_checks(&checks, &mut std::io::stdout().lock());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match dispatch(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
