use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use orlicz_lab::bounds::ConstantSet;
use orlicz_lab::harness::{self, ExperimentConfig, Record};
use orlicz_lab::{Error, Result};

/// Empirical-process and chaining experiments.
#[derive(Parser)]
#[command(name = "orlicz-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write records.csv, summary.json and plots/.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the config seed and the ORLICZ_LAB_SEED variable.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit envelope multipliers on the first half of the trials and report held-out pass rates.
    Calibrate {
        #[arg(long)]
        records: PathBuf,
        /// Config whose constants produced the records (defaults to unit constants).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the calibrated constants here as TOML.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Log-log least-squares fit of a statistic (or column) against a column.
    Fit {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Restrict to records with this dimension.
        #[arg(long)]
        n: Option<usize>,
    },
}

fn load_records(path: &PathBuf) -> Result<Vec<Record>> {
    harness::read_records(std::fs::File::open(path)?)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, threads, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.seed = cfg.effective_seed(seed)?;
            let result = harness::run(&cfg, threads)?;
            harness::write_outputs(&out, &cfg, &result)?;
            let passed = result.records.iter().filter(|r| r.pass).count();
            println!("{}: {} records, {passed} within bound, written to {}", cfg.scenario.name(), result.records.len(), out.display());
            println!("calibration: {}", result.summary.calibration.status);
            for h in &result.summary.calibration.held_out {
                println!("  {}: multiplier {:.4}, held-out pass {}/{}", h.family, h.multiplier, h.passed, h.groups);
            }
        }
        Command::Calibrate { records, config, out } => {
            let recs = load_records(&records)?;
            let base = match config {
                Some(p) => ExperimentConfig::load(&p)?.constants,
                None => ConstantSet::default(),
            };
            let trials = recs.iter().map(|r| r.trial).collect::<std::collections::BTreeSet<_>>().len();
            if trials < harness::MIN_CALIBRATION_TRIALS {
                return Err(Error::Precondition(format!(
                    "calibration needs {} trials, records have {trials}",
                    harness::MIN_CALIBRATION_TRIALS
                )));
            }
            let (cal, held) = harness::split_by_trial(&recs);
            let calibrated = harness::calibrate_constants(&cal, &base)?;
            for h in harness::evaluate_held_out(&held, &base, &calibrated) {
                println!(
                    "{}: multiplier {:.6}, held-out pass {}/{} ({:.1}%)",
                    h.family,
                    h.multiplier,
                    h.passed,
                    h.groups,
                    100.0 * h.pass_rate
                );
            }
            if let Some(p) = out {
                std::fs::write(p, toml::to_string(&calibrated)?)?;
            }
        }
        Command::Fit { records, x, y, n } => {
            let mut recs = load_records(&records)?;
            if let Some(n) = n {
                recs.retain(|r| r.n == n);
            }
            let f = harness::scaling_fit(&recs, &x, &y)?;
            println!("slope {:.6} intercept {:.6} stderr {:.6} points {}", f.slope, f.intercept, f.stderr, f.points);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
