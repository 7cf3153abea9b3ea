use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nonmarkov_cli::acceptance::{self, Tolerances, DEFAULT_SEED};
use nonmarkov_cli::config::{RunConfig, Solver, SweepConfig};
use nonmarkov_cli::error::EXIT_OK;
use nonmarkov_cli::{extract, run, sweep, CliError, CliResult};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "nonmarkov", version, about = "Run, extract and verify non-Markovian open-system dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a scenario with the selected solvers.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the solvers listed in the config.
        #[arg(long = "solver", value_enum)]
        solvers: Vec<Solver>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Recover the time-local generator from a map trajectory file.
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the acceptance suite and print a pass/fail table.
    Verify {
        /// JSON with optional `criteria`, `tolerances` and `seed`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Criterion id or name; repeatable.
        #[arg(long = "criterion")]
        criteria: Vec<String>,
        /// Override a bound, `name=value`; repeatable.
        #[arg(long = "tolerance")]
        tolerances: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a Cartesian parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long = "solver", value_enum)]
        solvers: Vec<Solver>,
        #[arg(long)]
        step: Option<f64>,
    },
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    #[serde(default)]
    criteria: Vec<String>,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    seed: Option<u64>,
}

fn apply_overrides(config: &mut RunConfig, solvers: Vec<Solver>, step: Option<f64>) -> CliResult<()> {
    if !solvers.is_empty() {
        config.solvers = solvers;
    }
    if step.is_some() {
        config.step = step;
    }
    config.validate()
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Run { config, out, solvers, step } => {
            let mut config = RunConfig::load(&config)?;
            apply_overrides(&mut config, solvers, step)?;
            let result = run::run(&config, out.as_deref())?;
            for w in &result.report.warnings {
                eprintln!("warning: {w}");
            }
            for (solver, d) in &result.report.solvers {
                println!(
                    "{:<9} points {:>7}  max TP drift {:.3e}  min Choi {:+.3e}  singular points {}",
                    solver.name(),
                    d.points,
                    d.max_tp_drift,
                    d.min_choi_eigenvalue,
                    d.singular_points.len()
                );
                for c in &d.composition {
                    let tag = if c.markovian_consistent { "Markovian-consistent" } else { "non-divisible" };
                    println!("          composition ({}, {}, {}) = {:.3e}  {tag}", c.t, c.s, c.t0, c.defect);
                }
                if let Some(h) = &d.homogeneity {
                    println!("          homogeneity (shift {}) = {:.3e}", h.shift, h.defect);
                }
            }
            for c in &result.report.cross_solver {
                println!("{} vs {}: sup distance {:.3e}", c.first.name(), c.second.name(), c.sup_distance);
            }
            for f in &result.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Extract { input, out } => {
            let result = extract::extract(&input, &out)?;
            for w in &result.report.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{} points, {} singular, max trace defect {:.3e}",
                result.report.points,
                result.report.singular_times.len(),
                result.report.max_trace_defect
            );
            match &result.report.round_trip {
                extract::RoundTrip::Checked { sup_distance } => println!("re-propagation sup distance {sup_distance:.3e}"),
                extract::RoundTrip::Skipped { reason } => println!("re-propagation skipped: {reason}"),
            }
            for f in &result.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Verify { config, criteria, tolerances, seed } => {
            let mut vc = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
                    serde_json::from_str::<VerifyConfig>(&text).map_err(CliError::validation)?
                }
                None => VerifyConfig::default(),
            };
            vc.criteria.extend(criteria);
            for t in &tolerances {
                let (name, value) = t
                    .split_once('=')
                    .ok_or_else(|| CliError::Validation(format!("expected name=value, got {t}")))?;
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Validation(format!("tolerance {name}: not a number")))?;
                vc.tolerances.set(name.trim(), value)?;
            }
            let selected = acceptance::select(&vc.criteria)?;
            let seed = seed.or(vc.seed).unwrap_or(DEFAULT_SEED);
            let results = acceptance::run_all(&selected, &vc.tolerances, seed);
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed()).count();
            println!("{} of {} criteria passed", results.len() - failed, results.len());
            if failed > 0 {
                return Err(CliError::VerifyFailed { failed });
            }
            Ok(())
        }
        Command::Sweep { config, out, solvers, step } => {
            let mut config = SweepConfig::load(&config)?;
            apply_overrides(&mut config.base, solvers, step)?;
            let result = sweep::sweep(&config, &out)?;
            for (k, e) in &result.failures {
                eprintln!("point {k}: {e}");
            }
            println!(
                "{} points, {} failed; summary in {}",
                result.points,
                result.failures.len(),
                result.summary.display()
            );
            match result.failures.into_iter().next() {
                Some((_, e)) => Err(e),
                None => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
