use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use budgetbench::cli;
use budgetbench::Error;

#[derive(Parser)]
#[command(name = "budgetbench", version, about = "Compute-budget evaluation toolkit for reasoning-model endpoints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a benchmark against an endpoint at several target lengths
    Run {
        /// TOML or JSON run configuration
        #[arg(long)]
        config: PathBuf,
        /// Run file to write (append-only line-delimited JSON; resumable)
        #[arg(long)]
        out: PathBuf,
    },
    /// Quantize the 2-D tensors of a safetensors file
    Quantize {
        /// Input safetensors file
        #[arg(long)]
        input: PathBuf,
        /// Output safetensors file (codes/scales/zero_points + JSON sidecar)
        #[arg(long)]
        out: PathBuf,
        /// Grid width: 4 or 8
        #[arg(long)]
        bits: u8,
        /// Optional calibration safetensors (per-layer cols x n_samples activations)
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long, default_value_t = 128)]
        block_size: usize,
        /// Override the grid symmetry (default: symmetric for 8-bit, asymmetric for 4-bit)
        #[arg(long)]
        symmetric: Option<bool>,
        /// Diagonal damping as a fraction of the mean Hessian diagonal
        #[arg(long, default_value_t = 0.01)]
        damping: f64,
        /// gptq (second-order) or rtn (round-to-nearest)
        #[arg(long, default_value = "gptq")]
        method: String,
        /// Comma-separated tensor names (default: every 2-D tensor)
        #[arg(long, value_delimiter = ',')]
        tensors: Option<Vec<String>>,
    },
    /// Aggregate a run file into per-length pass@1 or safe@1
    Score {
        run_file: PathBuf,
        /// Re-score safety responses with this refusal lexicon (JSON array of strings)
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Write the summary as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build trade-off points, the Pareto frontier, and the iso-budget pick
    Budget {
        run_files: Vec<PathBuf>,
        /// Throughput fixture (JSON array); default is the bundled fixture
        #[arg(long)]
        throughput: Option<PathBuf>,
        /// Compute budget in seconds for the best-under-budget selection
        #[arg(long)]
        budget: Option<f64>,
        /// Prefix for {prefix}_points.csv and {prefix}_frontier.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit per-metric CSV tables (rows = target length, columns = config)
    Report {
        run_files: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn run(cmd: Command) -> budgetbench::Result<()> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = cli::load_config(&config)?;
            let path = cli::cmd_run(&cfg, &out)?;
            println!("run file: {}", path.display());
        }
        Command::Quantize {
            input,
            out,
            bits,
            calib,
            block_size,
            symmetric,
            damping,
            method,
            tensors,
        } => {
            let report = cli::cmd_quantize(&cli::QuantizeArgs {
                input: &input,
                output: &out,
                bits,
                calib: calib.as_deref(),
                block_size,
                symmetric,
                damping_frac: damping,
                method,
                tensors,
            })?;
            cli::print_quantize_report(&report);
        }
        Command::Score {
            run_file,
            lexicon,
            out,
        } => {
            let summary = cli::cmd_score(&run_file, lexicon.as_deref(), out.as_deref())?;
            cli::print_summary(&summary);
        }
        Command::Budget {
            run_files,
            throughput,
            budget,
            out,
        } => {
            if run_files.is_empty() {
                return Err(Error::InvalidArgument("no run files given".into()));
            }
            let report = cli::cmd_budget(&run_files, throughput.as_deref(), budget, &out)?;
            cli::print_budget_report(&report, budget);
        }
        Command::Report { run_files, out_dir } => {
            if run_files.is_empty() {
                return Err(Error::InvalidArgument("no run files given".into()));
            }
            for path in cli::cmd_report(&run_files, &out_dir)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Transport(_) | Error::EndpointUnreachable(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
