use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use decmac::Termination;
use decmac_cli::{exit, load_config, run_compare_oracle, run_solve, run_sweep, CliError, ExperimentConfig, PointStatus, RateUnit};

/// Decentralized power control for the fading Gaussian multiple-access
/// channel.
#[derive(Parser, Debug)]
#[command(name = "decmac", version, about)]
struct Args {
    /// Unit for reported rates; overrides the configuration.
    #[arg(long, global = true, value_enum)]
    rate_unit: Option<RateUnit>,

    /// Log solver progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one instance and write policies, trajectory and summary.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output_dir` from the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the common budget and write capacity_vs_pavg.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the solver with an exact oracle on a small instance.
    CompareOracle {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path, unit: Option<RateUnit>) -> Result<ExperimentConfig, CliError> {
    let mut config = load_config(path)?;
    if let Some(unit) = unit {
        config.rate_unit = unit;
    }
    Ok(config)
}

fn out_dir(flag: Option<PathBuf>, config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    flag.or_else(|| config.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set output_dir".into()))
}

fn run(args: Args) -> Result<i32, CliError> {
    match args.command {
        Command::Solve { config, out } => {
            let config = load(&config, args.rate_unit)?;
            let out = out_dir(out, &config)?;
            let r = run_solve(&config, &out)?;
            println!(
                "capacity {} {} after {} sweeps, kkt residual {:.3e}, {}",
                decmac_cli::output::real(config.rate_unit.from_nats(r.capacity)),
                config.rate_unit.as_str(),
                r.outer_iters,
                r.kkt_residual,
                if r.termination == Termination::Converged { "converged" } else { "not converged" }
            );
            Ok(if r.termination == Termination::Converged { exit::SUCCESS } else { exit::NOT_CONVERGED })
        }
        Command::Sweep { config, out } => {
            let config = load(&config, args.rate_unit)?;
            let out = out_dir(out, &config)?;
            let rows = run_sweep(&config, &out)?;
            let failed = rows.iter().filter(|r| r.status != PointStatus::Converged).count();
            println!("{} points written to {}, {failed} not converged", rows.len(), out.display());
            Ok(if failed == 0 { exit::SUCCESS } else { exit::NOT_CONVERGED })
        }
        Command::CompareOracle { config } => {
            let config = load(&config, args.rate_unit)?;
            let report = run_compare_oracle(&config)?;
            println!("{report}");
            Ok(if report.pass { exit::SUCCESS } else { exit::NOT_CONVERGED })
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::ERROR } else { exit::SUCCESS } as u8);
        }
    };
    let level = if args.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    match run(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::ERROR as u8)
        }
    }
}
