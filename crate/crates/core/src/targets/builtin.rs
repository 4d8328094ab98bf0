use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{Density, Gaussian, GaussianMixture, StudentT};

/// Named densities used by the worked examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BuiltinKind {
    StandardNormal,
    Normal {
        mean: f64,
        variance: f64,
    },
    StudentT {
        nu: f64,
        loc: f64,
        scale: f64,
    },
    Cauchy {
        loc: f64,
        scale: f64,
    },
    /// Equal mixture of `N((0,0), I)` and `N((10,10), 2I)`.
    BimodalMixture,
}

pub fn builtin_density(kind: &BuiltinKind) -> Result<Arc<dyn Density>> {
    Ok(match kind {
        BuiltinKind::StandardNormal => Arc::new(Gaussian::univariate(0.0, 1.0)?),
        BuiltinKind::Normal { mean, variance } => Arc::new(Gaussian::univariate(*mean, *variance)?),
        BuiltinKind::StudentT { nu, loc, scale } => Arc::new(StudentT::new(*nu, *loc, *scale)?),
        BuiltinKind::Cauchy { loc, scale } => Arc::new(StudentT::cauchy(*loc, *scale)?),
        BuiltinKind::BimodalMixture => Arc::new(bimodal_mixture()?),
    })
}

/// The two-component bivariate mixture.
pub fn bimodal_mixture() -> Result<GaussianMixture> {
    GaussianMixture::new(vec![0.5, 0.5], bimodal_components()?)
}

/// The components of [`bimodal_mixture`], usable as directions.
pub fn bimodal_components() -> Result<Vec<Gaussian>> {
    Ok(vec![
        Gaussian::new(DVector::from_vec(vec![0.0, 0.0]), DMatrix::identity(2, 2))?,
        Gaussian::new(DVector::from_vec(vec![10.0, 10.0]), DMatrix::from_diagonal_element(2, 2, 2.0))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn mixture_at_origin() {
        let m = bimodal_mixture().unwrap();
        let want = 0.5 / (2.0 * PI) + 0.5 / (4.0 * PI) * (-100.0f64 / 2.0).exp();
        assert!((m.ln_pdf(&[0.0, 0.0]).exp() - want).abs() < 1e-15);
    }

    #[test]
    fn cauchy_builtin() {
        let c = builtin_density(&BuiltinKind::Cauchy { loc: 0.0, scale: 1.0 }).unwrap();
        assert!((c.ln_pdf(&[0.0]).exp() - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_fail() {
        assert!(builtin_density(&BuiltinKind::Normal { mean: 0.0, variance: 0.0 }).is_err());
    }
}
