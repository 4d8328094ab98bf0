//! The `varsel` subcommand: model-space sampling for variable selection.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use geomc::kernels::derive_seed;
use geomc::varsel::{
    posterior_summaries, run_vs_chain, simulate_design_with, PosteriorSummary, SparseColumns, VsSampler, VsTrace,
};
use geomc::{ModelGamma, VsData};

use crate::config::{DesignSource, VarselConfig};
use crate::error::{CliError, CliResult};
use crate::output::{create_dir, write_json, write_with};
use crate::run::replicate_dir;

struct Problem {
    data: Arc<VsData>,
    truth: Option<ModelGamma>,
    /// Seed the chain stream derives from.
    seed: u64,
}

fn read_response(path: &Path) -> CliResult<Vec<f64>> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::invalid("data.response", format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| CliError::invalid("data.response", format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn load_problems(cfg: &VarselConfig) -> CliResult<Vec<Problem>> {
    let bad = |e: geomc::Error| CliError::invalid("data", e);
    let shared = |data: VsData| {
        let data = Arc::new(data);
        (0..cfg.replicates)
            .map(|r| Problem { data: data.clone(), truth: None, seed: derive_seed(cfg.seed, r as u64) })
            .collect()
    };
    Ok(match &cfg.data {
        DesignSource::Simulated { design, p, m, r2 } => (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(cfg.seed, r as u64);
                let sim = simulate_design_with(*design, *p, *m, *r2, seed, cfg.lambda, cfg.omega).map_err(bad)?;
                Ok(Problem { data: Arc::new(sim.data), truth: Some(sim.truth), seed: derive_seed(seed, 1) })
            })
            .collect::<CliResult<Vec<_>>>()?,
        DesignSource::Csv { path, response } => {
            let file =
                File::open(path).map_err(|e| CliError::invalid("data.path", format!("{}: {e}", path.display())))?;
            shared(VsData::from_csv(file, response, cfg.lambda, cfg.omega).map_err(bad)?)
        }
        DesignSource::Sparse { path, response } => {
            let file =
                File::open(path).map_err(|e| CliError::invalid("data.path", format!("{}: {e}", path.display())))?;
            let raw = SparseColumns::read_from(std::io::BufReader::new(file)).map_err(bad)?;
            let z = read_response(response)?;
            shared(VsData::from_sparse(raw, &z, cfg.lambda, cfg.omega).map_err(bad)?)
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VarselReplicate {
    pub replicate: usize,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub median_model: String,
    pub wam_model: String,
    pub best_model: String,
    pub best_ln_post: f64,
    /// First iteration at which the best visited model appeared.
    pub best_first_hit: usize,
    pub unique_models: usize,
    pub r2_median: f64,
    pub r2_wam: f64,
    pub true_model: Option<String>,
    /// Whether the best visited model is the simulated truth.
    pub success: Option<bool>,
    pub truth_first_hit: Option<usize>,
}

/// Hitting statistics over the replicates whose best model is the truth.
#[derive(Debug, Clone, Serialize)]
pub struct HittingStats {
    pub successes: usize,
    pub replicates: usize,
    pub min: Option<f64>,
    pub q25: Option<f64>,
    pub median: Option<f64>,
    pub q75: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct VarselSummary<'a> {
    pub config: &'a VarselConfig,
    pub replicates: Vec<VarselReplicate>,
    pub hitting: Option<HittingStats>,
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn hitting_stats(reps: &[VarselReplicate]) -> Option<HittingStats> {
    if reps.iter().any(|r| r.success.is_none()) {
        return None;
    }
    let mut hits: Vec<f64> = reps.iter().filter(|r| r.success == Some(true)).map(|r| r.best_first_hit as f64).collect();
    hits.sort_by(f64::total_cmp);
    Some(HittingStats {
        successes: hits.len(),
        replicates: reps.len(),
        min: quantile(&hits, 0.0),
        q25: quantile(&hits, 0.25),
        median: quantile(&hits, 0.5),
        q75: quantile(&hits, 0.75),
        max: quantile(&hits, 1.0),
    })
}

fn write_models(path: &Path, trace: &VsTrace) -> CliResult<()> {
    write_with(path, |w| {
        writeln!(w, "# iteration\tln_post\tmodel (1-based indices)")?;
        for (i, (g, lp)) in trace.models.iter().zip(&trace.ln_post).enumerate() {
            writeln!(w, "{i}\t{lp:.16e}\t{g}")?;
        }
        Ok(())
    })
}

fn write_mip(path: &Path, s: &PosteriorSummary) -> CliResult<()> {
    write_with(path, |w| {
        writeln!(w, "variable,mip,weighted_mip")?;
        for (j, (a, b)) in s.mip.iter().zip(&s.weighted_mip).enumerate() {
            writeln!(w, "{},{a:.16e},{b:.16e}", j + 1)?;
        }
        Ok(())
    })
}

fn run_replicate(cfg: &VarselConfig, r: usize, prob: &Problem) -> CliResult<VarselReplicate> {
    let ctx = |what: &str| format!("replicate {r}: {what}");
    let p = prob.data.ncols();
    let start = ModelGamma::new(cfg.start.clone(), p).map_err(|e| CliError::invalid("start", e))?;
    let sampler =
        VsSampler::new(prob.data.clone(), cfg.proposal, cfg.epsilon).map_err(|e| CliError::invalid("proposal", e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(prob.seed);
    let trace =
        run_vs_chain(&sampler, &start, cfg.iterations, &mut rng).map_err(|e| CliError::runtime(ctx("chain"), e))?;
    let s = posterior_summaries(&trace, &prob.data).map_err(|e| CliError::runtime(ctx("summaries"), e))?;
    let dir = replicate_dir(&cfg.output.dir, cfg.replicates, r);
    create_dir(&dir)?;
    write_models(&dir.join("models.txt"), &trace)?;
    write_mip(&dir.join("mip.csv"), &s)?;
    let accepted = trace.accepted.iter().skip(1).filter(|a| **a).count();
    Ok(VarselReplicate {
        replicate: r,
        seed: prob.seed,
        acceptance_rate: accepted as f64 / cfg.iterations as f64,
        median_model: s.median_model.to_string(),
        wam_model: s.wam_model.to_string(),
        best_model: s.best_model.to_string(),
        best_ln_post: s.best_ln_post,
        best_first_hit: s.best_first_hit,
        unique_models: s.unique_models,
        r2_median: s.r2_median,
        r2_wam: s.r2_wam,
        true_model: prob.truth.as_ref().map(ToString::to_string),
        success: prob.truth.as_ref().map(|t| *t == s.best_model),
        truth_first_hit: prob.truth.as_ref().and_then(|t| trace.models.iter().position(|g| g == t)),
    })
}

pub fn run(cfg: &VarselConfig) -> CliResult<(Vec<VarselReplicate>, Option<HittingStats>)> {
    cfg.validate()?;
    let problems = load_problems(cfg)?;
    if let Some(p) = problems.first() {
        ModelGamma::new(cfg.start.clone(), p.data.ncols()).map_err(|e| CliError::invalid("start", e))?;
    }
    create_dir(&cfg.output.dir)?;
    let reps =
        problems.par_iter().enumerate().map(|(r, prob)| run_replicate(cfg, r, prob)).collect::<CliResult<Vec<_>>>()?;
    let hitting = hitting_stats(&reps);
    write_json(
        &cfg.output.dir.join("summary.json"),
        &VarselSummary { config: cfg, replicates: reps.clone(), hitting: hitting.clone() },
    )?;
    Ok((reps, hitting))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(4.0));
        assert_eq!(quantile(&[], 0.5), None);
    }
}
