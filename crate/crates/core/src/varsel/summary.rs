use std::collections::HashMap;

use nalgebra::DVector;
use serde::Serialize;

use super::data::VsData;
use super::model::ModelGamma;
use super::sampler::VsTrace;
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

#[derive(Debug, Clone, Serialize)]
pub struct PosteriorSummary {
    /// Inclusion frequency over the visited states.
    pub mip: Vec<f64>,
    /// Inclusion probability with unique models weighted by posterior.
    pub weighted_mip: Vec<f64>,
    /// `{j : mip_j > 0.5}`.
    pub median_model: ModelGamma,
    /// `{j : weighted_mip_j > 0.5}`.
    pub wam_model: ModelGamma,
    /// Highest-posterior visited model and the first trace index holding it.
    pub best_model: ModelGamma,
    pub best_ln_post: f64,
    pub best_first_hit: usize,
    pub unique_models: usize,
    pub r2_median: f64,
    pub r2_wam: f64,
}

/// Least-squares `R²` of `z̃` on the columns of `gamma`.
pub fn least_squares_r2(data: &VsData, gamma: &ModelGamma) -> Result<f64> {
    if gamma.is_empty() {
        return Ok(0.0);
    }
    let cols: Vec<DVector<f64>> = gamma.indices().iter().map(|j| data.column(*j)).collect();
    let w = nalgebra::DMatrix::from_columns(&cols);
    let coef = w.clone().svd(true, true).solve(data.z_tilde(), 1e-12).map_err(|e| Error::Numerical(e.to_string()))?;
    let rss = (data.z_tilde() - w * coef).norm_squared();
    Ok(1.0 - rss / data.ztz())
}

fn strict_majority(probs: &[f64]) -> ModelGamma {
    ModelGamma::new(probs.iter().enumerate().filter(|(_, v)| **v > 0.5).map(|(j, _)| j).collect(), probs.len())
        .expect("indices in range")
}

pub fn posterior_summaries(trace: &VsTrace, data: &VsData) -> Result<PosteriorSummary> {
    if trace.is_empty() || trace.models.len() != trace.ln_post.len() {
        return Err(Error::InsufficientData("empty or inconsistent model trace".into()));
    }
    let p = data.ncols();
    let n = trace.len() as f64;
    let mut mip = vec![0.0; p];
    let mut unique: HashMap<&ModelGamma, f64> = HashMap::new();
    let mut best = 0;
    for (t, (g, lp)) in trace.models.iter().zip(&trace.ln_post).enumerate() {
        for j in g.indices() {
            mip[*j] += 1.0 / n;
        }
        unique.entry(g).or_insert(*lp);
        if *lp > trace.ln_post[best] {
            best = t;
        }
    }
    let mut entries: Vec<(&ModelGamma, f64)> = unique.into_iter().collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    let lse = log_sum_exp(&entries.iter().map(|e| e.1).collect::<Vec<_>>());
    let mut weighted_mip = vec![0.0; p];
    for (g, lp) in &entries {
        let w = (lp - lse).exp();
        for j in g.indices() {
            weighted_mip[*j] += w;
        }
    }
    let median_model = strict_majority(&mip);
    let wam_model = strict_majority(&weighted_mip);
    Ok(PosteriorSummary {
        r2_median: least_squares_r2(data, &median_model)?,
        r2_wam: least_squares_r2(data, &wam_model)?,
        mip,
        weighted_mip,
        median_model,
        wam_model,
        best_model: trace.models[best].clone(),
        best_ln_post: trace.ln_post[best],
        best_first_hit: best,
        unique_models: entries.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn data() -> VsData {
        let x = DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 2.0, 1.0, 3.0, 0.0, 4.0, 1.0, 5.0, 0.0, 6.0, 2.0]);
        let z = [1.1, 2.0, 2.9, 4.2, 5.0, 6.1];
        VsData::new(x, &z, Some(1.0), Some(0.5)).unwrap()
    }

    #[test]
    fn single_model_trace() {
        let d = data();
        let g = ModelGamma::new(vec![0], 2).unwrap();
        let tr = VsTrace { models: vec![g.clone(); 5], ln_post: vec![-1.0; 5], accepted: vec![false; 5] };
        let s = posterior_summaries(&tr, &d).unwrap();
        assert_eq!(s.median_model, g);
        assert_eq!(s.wam_model, g);
        assert_eq!(s.mip, vec![1.0, 0.0]);
        assert!(s.r2_median > 0.99);
    }

    #[test]
    fn tie_gives_empty_wam() {
        let d = data();
        let a = ModelGamma::new(vec![0], 2).unwrap();
        let b = ModelGamma::new(vec![1], 2).unwrap();
        let tr = VsTrace {
            models: vec![a.clone(), b.clone(), a, b],
            ln_post: vec![-3.0; 4],
            accepted: vec![false, true, true, true],
        };
        let s = posterior_summaries(&tr, &d).unwrap();
        assert!(s.weighted_mip.iter().all(|v| (v - 0.5).abs() < 1e-15));
        assert!(s.wam_model.is_empty());
        assert!(s.median_model.is_empty());
        assert_eq!(s.unique_models, 2);
    }

    #[test]
    fn first_hit_of_best() {
        let d = data();
        let a = ModelGamma::empty();
        let b = ModelGamma::new(vec![0], 2).unwrap();
        let tr = VsTrace {
            models: vec![a, b.clone(), b.clone()],
            ln_post: vec![-5.0, -1.0, -1.0],
            accepted: vec![false, true, false],
        };
        let s = posterior_summaries(&tr, &d).unwrap();
        assert_eq!((s.best_model, s.best_first_hit), (b, 1));
    }

    #[test]
    fn empty_trace_rejected() {
        assert!(posterior_summaries(&VsTrace::default(), &data()).is_err());
    }
}
