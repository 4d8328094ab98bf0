//! The `run` subcommand.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use geomc::diagnostics::DiagnosticsReport;
use geomc::kernels::{derive_seed, run_chain};
use geomc::ChainTrace;

use crate::build::{build_experiment, occupancy, Experiment};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{create_dir, write_json, write_text, write_with};

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateSummary {
    pub replicate: usize,
    pub seed: u64,
    pub iterations: usize,
    pub acceptance_rate: f64,
    pub msjd: f64,
    pub mess: Option<f64>,
    pub ess: Vec<Option<f64>>,
    pub mean: Vec<f64>,
    pub final_state: Vec<f64>,
    /// Fraction of states in each mode basin, for targets that define them.
    pub occupancy: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct RunSummary<'a> {
    pub config: &'a ExperimentConfig,
    pub replicates: Vec<ReplicateSummary>,
}

/// Replicate `r` runs with `derive_seed(seed, r)` and writes into
/// `rep-NNN/` when there is more than one replicate.
pub fn replicate_dir(root: &Path, replicates: usize, r: usize) -> PathBuf {
    if replicates == 1 {
        root.to_path_buf()
    } else {
        root.join(format!("rep-{r:03}"))
    }
}

pub fn write_report(dir: &Path, report: &DiagnosticsReport) -> CliResult<()> {
    write_with(&dir.join("diagnostics.csv"), |w| report.write_csv(w))?;
    write_text(&dir.join("diagnostics.txt"), &report.to_string())
}

fn run_replicate(cfg: &ExperimentConfig, exp: &Experiment, r: usize) -> CliResult<ReplicateSummary> {
    let seed = derive_seed(cfg.seed, r as u64);
    let dir = replicate_dir(&cfg.output.dir, cfg.replicates, r);
    create_dir(&dir)?;
    let chain_path = dir.join("chain.csv");
    let trace = match run_chain(exp.sampler.as_ref(), exp.target.target.as_ref(), &cfg.start, cfg.iterations, seed) {
        Ok(t) => t,
        Err(abort) => {
            write_with(&chain_path, |w| abort.partial.write_csv(w))?;
            log::error!("replicate {r}: partial chain kept in {}", chain_path.display());
            return Err(CliError::runtime(format!("replicate {r}"), abort.source));
        }
    };
    log::info!("replicate {r}: {} iterations in {:.2?}", trace.len(), trace.wall_time);
    write_with(&chain_path, |w| trace.write_csv(w))?;
    let report = DiagnosticsReport::from_trace(&trace, cfg.diagnostics.max_lag)
        .map_err(|e| CliError::runtime(format!("replicate {r} diagnostics"), e))?;
    write_report(&dir, &report)?;
    Ok(summarize(r, seed, &trace, &report, exp))
}

fn summarize(
    r: usize,
    seed: u64,
    trace: &ChainTrace,
    report: &DiagnosticsReport,
    exp: &Experiment,
) -> ReplicateSummary {
    let n = trace.len() as f64;
    let mean = (0..trace.dim).map(|j| trace.states.iter().map(|s| s[j]).sum::<f64>() / n).collect();
    ReplicateSummary {
        replicate: r,
        seed,
        iterations: trace.len(),
        acceptance_rate: trace.acceptance_rate(),
        msjd: report.msjd,
        mess: report.mess,
        ess: report.ess.clone(),
        mean,
        final_state: trace.states.last().cloned().unwrap_or_default(),
        occupancy: exp.target.basins.as_ref().map(|b| occupancy(b, &trace.states)),
    }
}

/// Builds and validates everything first, then runs the replicates in
/// parallel. Output is identical for identical configurations.
pub fn run(cfg: &ExperimentConfig) -> CliResult<Vec<ReplicateSummary>> {
    let exp = build_experiment(cfg)?;
    create_dir(&cfg.output.dir)?;
    let results: Vec<CliResult<ReplicateSummary>> =
        (0..cfg.replicates).into_par_iter().map(|r| run_replicate(cfg, &exp, r)).collect();
    let mut summaries = Vec::with_capacity(results.len());
    let mut first_err = None;
    for res in results {
        match res {
            Ok(s) => summaries.push(s),
            Err(e) => {
                log::error!("{e}");
                first_err.get_or_insert(e);
            }
        }
    }
    write_json(&cfg.output.dir.join("summary.json"), &RunSummary { config: cfg, replicates: summaries.clone() })?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(summaries),
    }
}
