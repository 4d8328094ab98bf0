//! Simulated regression designs for variable selection studies.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::data::VsData;
use super::model::ModelGamma;
use crate::error::{Error, Result};

pub const DEFAULT_RHO: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    /// iid `N(0, 1)` entries.
    Independent,
    /// Rows `N(0, (1-ρ)I + ρ11ᵀ)`.
    CompoundSymmetry,
    /// Columns `W_j = ρW_{j-1} + sqrt(1-ρ²) b_j`.
    AutoRegressive,
    /// Rows `N(0, FFᵀ + I)` for a `p × 2` standard normal `F`.
    Factor,
    /// Five signal columns sharing latent terms with every noise column.
    ExtremeCorrelation,
}

impl DesignKind {
    pub const ALL: [DesignKind; 5] = [
        DesignKind::Independent,
        DesignKind::CompoundSymmetry,
        DesignKind::AutoRegressive,
        DesignKind::Factor,
        DesignKind::ExtremeCorrelation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DesignKind::Independent => "independent",
            DesignKind::CompoundSymmetry => "compound-symmetry",
            DesignKind::AutoRegressive => "auto-regressive",
            DesignKind::Factor => "factor",
            DesignKind::ExtremeCorrelation => "extreme-correlation",
        }
    }

    /// Nonzero coefficients as `(index, value)`, zero-based.
    pub fn coefficients(&self) -> Vec<(usize, f64)> {
        match self {
            DesignKind::Independent => vec![(0, 0.5), (1, 0.75), (2, 1.0), (3, 1.25), (4, 1.5)],
            DesignKind::AutoRegressive => vec![(0, 3.0), (3, 1.5), (6, 2.0)],
            _ => (0..5).map(|j| (j, 5.0)).collect(),
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown design {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDesign {
    pub data: VsData,
    /// Raw covariates before standardization.
    pub x: DMatrix<f64>,
    pub z: Vec<f64>,
    pub beta: DVector<f64>,
    pub truth: ModelGamma,
    pub sigma2: f64,
}

/// Draws a design with default hyperparameters.
pub fn simulate_design(kind: DesignKind, p: usize, m: usize, r2: f64, seed: u64) -> Result<SimulatedDesign> {
    simulate_design_with(kind, p, m, r2, seed, None, None)
}

/// The noise variance solves `R² = βᵀΣβ / (βᵀΣβ + σ²)` for the design's
/// population covariance `Σ`.
pub fn simulate_design_with(
    kind: DesignKind,
    p: usize,
    m: usize,
    r2: f64,
    seed: u64,
    lambda: Option<f64>,
    omega: Option<f64>,
) -> Result<SimulatedDesign> {
    if !(r2 > 0.0 && r2 < 1.0) {
        return Err(Error::InvalidParameter(format!("R^2 must lie in (0, 1), got {r2}")));
    }
    let coefs = kind.coefficients();
    let needed = coefs.iter().map(|(j, _)| j + 1).max().unwrap_or(0);
    if p < needed.max(if kind == DesignKind::ExtremeCorrelation { 6 } else { 1 }) {
        return Err(Error::InvalidParameter(format!("{kind} design needs p >= {needed}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || rng.sample::<f64, _>(StandardNormal);
    let rho = DEFAULT_RHO;
    let mut factor = None;
    let x = match kind {
        DesignKind::Independent => DMatrix::from_fn(m, p, |_, _| normal()),
        DesignKind::CompoundSymmetry => {
            let shared: Vec<f64> = (0..m).map(|_| normal()).collect();
            let mut x = DMatrix::from_fn(m, p, |_, _| normal() * (1.0 - rho).sqrt());
            for (i, mut row) in x.row_iter_mut().enumerate() {
                row.add_scalar_mut(rho.sqrt() * shared[i]);
            }
            x
        }
        DesignKind::AutoRegressive => {
            let mut prev: Vec<f64> = (0..m).map(|_| normal()).collect();
            let mut x = DMatrix::zeros(m, p);
            for j in 0..p {
                for i in 0..m {
                    prev[i] = rho * prev[i] + (1.0 - rho * rho).sqrt() * normal();
                    x[(i, j)] = prev[i];
                }
            }
            x
        }
        DesignKind::Factor => {
            let f = DMatrix::from_fn(p, 2, |_, _| normal());
            let u = DMatrix::from_fn(m, 2, |_, _| normal());
            let x = &u * f.transpose() + DMatrix::from_fn(m, p, |_, _| normal());
            factor = Some(f);
            x
        }
        DesignKind::ExtremeCorrelation => {
            let b = DMatrix::from_fn(m, p, |_, _| normal());
            let t = DMatrix::from_fn(m, 5, |_, _| normal());
            let tsum: Vec<f64> = (0..m).map(|i| t.row(i).sum()).collect();
            DMatrix::from_fn(m, p, |i, j| {
                if j < 5 {
                    (b[(i, j)] + t[(i, j)]) / 2f64.sqrt()
                } else {
                    (b[(i, j)] + tsum[i]) / 2.0
                }
            })
        }
    };
    let cov = |j: usize, k: usize| -> f64 {
        match kind {
            DesignKind::Independent => f64::from(u8::from(j == k)),
            DesignKind::CompoundSymmetry => {
                if j == k {
                    1.0
                } else {
                    rho
                }
            }
            DesignKind::AutoRegressive => rho.powi((j as i32 - k as i32).abs()),
            DesignKind::Factor => {
                let f = factor.as_ref().expect("factor drawn");
                f.row(j).dot(&f.row(k)) + f64::from(u8::from(j == k))
            }
            DesignKind::ExtremeCorrelation => match (j < 5, k < 5) {
                (true, true) => f64::from(u8::from(j == k)),
                (false, false) => {
                    if j == k {
                        1.5
                    } else {
                        1.25
                    }
                }
                _ => 1.0 / (2.0 * 2f64.sqrt()),
            },
        }
    };
    let signal: f64 = coefs
        .iter()
        .flat_map(|(j, bj)| coefs.iter().map(move |(k, bk)| (*j, *k, bj * bk)))
        .map(|(j, k, w)| w * cov(j, k))
        .sum();
    let sigma2 = signal * (1.0 - r2) / r2;
    let mut beta = DVector::zeros(p);
    for (j, v) in &coefs {
        beta[*j] = *v;
    }
    let mean = &x * &beta;
    let z: Vec<f64> = mean.iter().map(|mu| mu + sigma2.sqrt() * normal()).collect();
    let truth = ModelGamma::new(coefs.iter().map(|(j, _)| *j).collect(), p)?;
    let data = VsData::new(x.clone(), &z, lambda, omega)?;
    Ok(SimulatedDesign { data, x, z, beta, truth, sigma2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listed_coefficients() {
        let s = simulate_design_with(DesignKind::Independent, 20, 50, 0.9, 1, None, Some(0.1)).unwrap();
        assert_eq!(&s.beta.as_slice()[..6], &[0.5, 0.75, 1.0, 1.25, 1.5, 0.0]);
        assert!((s.sigma2 - 5.625 / 9.0).abs() < 1e-12);
        let ar = simulate_design_with(DesignKind::AutoRegressive, 10, 50, 0.9, 1, None, Some(0.1)).unwrap();
        assert_eq!(ar.truth.indices(), &[0, 3, 6]);
        assert_eq!((ar.beta[0], ar.beta[3], ar.beta[6]), (3.0, 1.5, 2.0));
        let cs = simulate_design_with(DesignKind::CompoundSymmetry, 10, 50, 0.9, 1, None, Some(0.1)).unwrap();
        assert!(cs.beta.iter().take(5).all(|b| *b == 5.0));
    }

    #[test]
    fn compound_symmetry_correlation() {
        let s = simulate_design_with(DesignKind::CompoundSymmetry, 6, 20000, 0.9, 2, None, Some(0.1)).unwrap();
        let w = s.data.dense_design();
        let r = w.column(0).dot(&w.column(1)) / 19999.0;
        assert!((r - 0.6).abs() < 0.02);
    }

    #[test]
    fn names_round_trip() {
        for k in DesignKind::ALL {
            assert_eq!(k.name().parse::<DesignKind>().unwrap(), k);
        }
        assert!("bogus".parse::<DesignKind>().is_err());
    }

    #[test]
    fn bad_r2_rejected() {
        assert!(simulate_design(DesignKind::Independent, 10, 20, 1.0, 1).is_err());
    }
}
