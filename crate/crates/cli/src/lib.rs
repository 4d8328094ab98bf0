//! Command-line experiment runner for the geometric MH library.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod build;
pub mod config;
pub mod diagnose;
pub mod error;
pub mod output;
pub mod run;
pub mod varsel;
pub mod verify;

pub use error::{CliError, CliResult};

use config::{ExperimentConfig, RunOverrides, VarselConfig, VarselOverrides};

#[derive(Debug, Parser)]
#[command(name = "geomc", version, about = "Geometric informed Metropolis-Hastings experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a chain from a TOML config, writing trace, diagnostics and summary.
    Run(RunArgs),
    /// Check the ordering theorems on finite-state fixtures.
    Verify(VerifyArgs),
    /// Sample the variable-selection model posterior.
    Varsel(VarselArgs),
    /// Diagnostics report for a trace CSV.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Directory of fixture JSON files; the shipped set when omitted.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Random test functions per fixture.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the fixtures being checked to this directory.
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// Write the full reports as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VarselArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    pub trace: PathBuf,
    #[arg(long, default_value_t = geomc::diagnostics::DEFAULT_MAX_LAG)]
    pub max_lag: usize,
    /// Write diagnostics.csv and diagnostics.txt here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_run(a: RunArgs) -> CliResult<()> {
    let mut cfg: ExperimentConfig = config::load(&a.config)?;
    cfg.apply(&RunOverrides {
        seed: a.seed,
        iterations: a.iterations,
        replicates: a.replicates,
        epsilon: a.epsilon,
        out: a.out,
    })?;
    let reps = run::run(&cfg)?;
    for r in &reps {
        print!(
            "replicate {:>3}  seed {:>20}  acceptance {:.4}  msjd {:.4}",
            r.replicate, r.seed, r.acceptance_rate, r.msjd
        );
        if let Some(occ) = &r.occupancy {
            let parts: Vec<String> = occ.iter().map(|v| format!("{v:.3}")).collect();
            print!("  occupancy [{}]", parts.join(", "));
        }
        println!();
    }
    println!("wrote {}", cfg.output.dir.display());
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CliResult<()> {
    let fixtures = verify::fixtures_from(a.fixtures.as_deref())?;
    if let Some(dir) = &a.export {
        verify::export_fixtures(&fixtures, dir)?;
    }
    let result = verify::verify(&fixtures, a.trials, a.seed);
    if let (Some(path), Ok(reports)) = (&a.report, &result) {
        output::write_json(path, reports)?;
    }
    let reports = result?;
    println!("{} fixtures passed", reports.len());
    Ok(())
}

fn cmd_varsel(a: VarselArgs) -> CliResult<()> {
    let mut cfg: VarselConfig = config::load(&a.config)?;
    cfg.apply(&VarselOverrides {
        seed: a.seed,
        iterations: a.iterations,
        replicates: a.replicates,
        epsilon: a.epsilon,
        out: a.out,
    });
    let (reps, hitting) = varsel::run(&cfg)?;
    for r in &reps {
        println!(
            "replicate {:>3}  best {} (first at {})  median {}  R2 {:.4}",
            r.replicate, r.best_model, r.best_first_hit, r.median_model, r.r2_median
        );
    }
    if let Some(h) = hitting {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x}"));
        println!(
            "true model best in {}/{} replicates; hitting iteration min {} q25 {} median {} q75 {} max {}",
            h.successes,
            h.replicates,
            show(h.min),
            show(h.q25),
            show(h.median),
            show(h.q75),
            show(h.max)
        );
    }
    println!("wrote {}", cfg.output.dir.display());
    Ok(())
}

fn cmd_diagnose(a: DiagnoseArgs) -> CliResult<()> {
    let report = diagnose::diagnose(&a.trace, a.max_lag, a.out.as_deref())?;
    print!("{report}");
    Ok(())
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Varsel(a) => cmd_varsel(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    }
}
