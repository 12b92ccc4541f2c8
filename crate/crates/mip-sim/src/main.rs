use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use mip_sim::compare;
use mip_sim::csvlog;
use mip_sim::metrics;
use mip_sim::run;
use mip_sim::scenario;

use anyhow::Result;
use std::path::PathBuf;
use std::process;

/// Scenario-driven simulator for a thruster-assisted wheeled inverted
/// pendulum.
#[derive(Parser)]
#[command(name = "mip-sim", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario file and write the run artifacts.
    Run {
        /// Scenario file (INI).
        scenario: PathBuf,
        /// Output directory; defaults to the scenario's setting or runs/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the plant named in the scenario.
        #[arg(long, value_parser = ["reduced", "compliant"])]
        plant: Option<String>,
        /// Scenario override as section.key=value; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score model-versus-simulator contact agreement for a finished run.
    CompareContact {
        /// Run directory produced by `run`.
        run_dir: PathBuf,
        /// Relative RMS above which the check fails.
        #[arg(long, default_value_t = compare::DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Recompute the summary metrics from a run's trajectory log.
    Metrics {
        /// Run directory produced by `run`.
        run_dir: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // usage error, which the exit-code contract files under
            // configuration problems.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            process::exit(code);
        }
    };
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    process::exit(code);
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run {
            scenario: path,
            out,
            plant,
            overrides,
        } => {
            let mut overrides = overrides;
            if let Some(p) = plant {
                overrides.push(format!("scenario.plant = {p}"));
            }
            let sc = scenario::load_scenario(&path, &overrides)?;
            let out_dir = run::resolve_out_dir(&sc, out.as_deref());
            let report = run::run_scenario(&sc, &out_dir)?;
            println!(
                "wrote {} steps to {}",
                report.rows.len(),
                report.out_dir.display()
            );
            match report.abort {
                None => Ok(0),
                Some(abort) => {
                    eprintln!("run aborted: {}", abort.describe());
                    Ok(abort.exit_code())
                }
            }
        }
        Command::CompareContact { run_dir, threshold } => {
            if !(threshold.is_finite() && threshold > 0.0) {
                anyhow::bail!("threshold must be a positive number, got {threshold}");
            }
            let report = compare::compare_contact(&run_dir, threshold)?;
            print!("{}", compare::format_report(&report));
            Ok(if report.pass { 0 } else { 4 })
        }
        Command::Metrics { run_dir } => {
            let rows = csvlog::read_rows(&run_dir.join("trajectory.csv"))?;
            print!("{}", metrics::format_metrics(&metrics::compute(&rows)));
            Ok(0)
        }
    }
}
