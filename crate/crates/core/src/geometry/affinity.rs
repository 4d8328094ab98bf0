//! Affinities `<sqrt f, sqrt g>` and the angles they induce.

use nalgebra::DVector;
use rand::RngCore;
use serde::Serialize;

use super::density::{Density, Gaussian};
use super::grid::Grid;
use crate::error::{Error, Result};
use crate::numeric::{chol_ln_det, ensure_dim, spd_cholesky};

/// Lower clamp applied to Monte-Carlo estimates.
pub const MC_FLOOR: f64 = 1e-12;
/// Affinities at or above `1 - DEGENERATE_GAP` are treated as identical
/// densities.
pub const DEGENERATE_GAP: f64 = 1e-9;

/// How an affinity value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AffinitySource {
    ClosedForm,
    Quadrature,
    MonteCarlo {
        samples: usize,
        std_error: f64,
        /// Estimate before clamping.
        raw: f64,
    },
    /// Exact finite sum over a discrete support.
    Exact,
    Supplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Affinity {
    value: f64,
    angle: f64,
    source: AffinitySource,
}

impl Affinity {
    /// Values within rounding of 1 are pulled back to 1; anything outside
    /// `[0, 1]` otherwise is rejected.
    pub fn new(value: f64, source: AffinitySource) -> Result<Self> {
        if !value.is_finite() || !(0.0..=1.0 + 1e-9).contains(&value) {
            return Err(Error::Numerical(format!("affinity {value} outside [0, 1]")));
        }
        let value = value.min(1.0);
        Ok(Self { value, angle: value.acos(), source })
    }

    pub fn supplied(value: f64) -> Result<Self> {
        Self::new(value, AffinitySource::Supplied)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Fisher-Rao angle `arccos(value)`.
    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn source(&self) -> AffinitySource {
        self.source
    }

    /// True when the residual direction is numerically undefined.
    pub fn is_degenerate(&self) -> bool {
        self.value >= 1.0 - DEGENERATE_GAP
    }

    /// `sin^2(eps * theta)`, the mass a geometric proposal puts on the
    /// residual component. Zero for degenerate affinities.
    pub fn residual_weight(&self, epsilon: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (epsilon * self.angle).sin().powi(2)
        }
    }

    /// Envelope constant `(1 + c^2) / (1 - c^2)` of the residual rejection
    /// sampler.
    pub fn envelope_bound(&self) -> f64 {
        let c2 = self.value * self.value;
        (1.0 + c2) / (1.0 - c2)
    }
}

/// Closed-form affinity between two Gaussians. Symmetric in argument order.
pub fn gaussian_affinity(a: &Gaussian, b: &Gaussian) -> Result<Affinity> {
    ensure_dim(a.dim(), b.dim())?;
    let avg = (a.cov() + b.cov()) * 0.5;
    let chol = spd_cholesky(&avg, "averaged covariance")?;
    let delta: DVector<f64> = a.mean() - b.mean();
    let z = chol
        .l_dirty()
        .solve_lower_triangular(&delta)
        .ok_or_else(|| Error::IllConditioned("averaged covariance".into()))?;
    let quad = z.norm_squared() / 8.0;
    let ln_det_term = 0.5 * (chol_ln_det(&chol) - 0.5 * (a.ln_det_cov() + b.ln_det_cov()));
    Affinity::new((-(quad + ln_det_term)).exp(), AffinitySource::ClosedForm)
}

/// Closed-form affinity from raw parameters.
pub fn gaussian_affinity_params(
    mu1: &[f64],
    cov1: &nalgebra::DMatrix<f64>,
    mu2: &[f64],
    cov2: &nalgebra::DMatrix<f64>,
) -> Result<Affinity> {
    let a = Gaussian::new(DVector::from_column_slice(mu1), cov1.clone())?;
    let b = Gaussian::new(DVector::from_column_slice(mu2), cov2.clone())?;
    gaussian_affinity(&a, &b)
}

/// Importance-sampling estimate `mean(sqrt(g(X)/f(X)))` with `X ~ f`.
pub fn importance_affinity(f: &dyn Density, g: &dyn Density, n: usize, rng: &mut dyn RngCore) -> Result<Affinity> {
    ensure_dim(f.dim(), g.dim())?;
    importance_affinity_with(n, rng, |r| f.sample(r), |x| f.ln_pdf(x), |x| g.ln_pdf(x))
}

/// [`importance_affinity`] over closures, for conditional densities.
pub fn importance_affinity_with(
    n: usize,
    rng: &mut dyn RngCore,
    mut draw_f: impl FnMut(&mut dyn RngCore) -> Option<Vec<f64>>,
    ln_f: impl Fn(&[f64]) -> f64,
    ln_g: impl Fn(&[f64]) -> f64,
) -> Result<Affinity> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {n}")));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let x = draw_f(rng).ok_or(Error::Capability("sampler for f"))?;
        let r = (0.5 * (ln_g(&x) - ln_f(&x))).exp();
        let r = if r.is_nan() { 0.0 } else { r };
        sum += r;
        sum_sq += r * r;
    }
    if sum == 0.0 {
        return Err(Error::DegenerateSupport("every sampled point has g = 0".into()));
    }
    let nf = n as f64;
    let raw = sum / nf;
    let var = ((sum_sq - nf * raw * raw) / (nf - 1.0)).max(0.0);
    let std_error = (var / nf).sqrt();
    Affinity::new(raw.clamp(MC_FLOOR, 1.0 - DEGENERATE_GAP), AffinitySource::MonteCarlo { samples: n, std_error, raw })
}

/// Required grid mass for each density.
const COVERAGE: f64 = 1.0 - 1e-6;

/// Deterministic quadrature of `sqrt(f g)` on a grid. Both densities must be
/// normalized and mostly covered by the grid.
pub fn quadrature_affinity(f: &dyn Density, g: &dyn Density, grid: &Grid) -> Result<Affinity> {
    ensure_dim(grid.dim(), f.dim())?;
    ensure_dim(grid.dim(), g.dim())?;
    quadrature_affinity_with(grid, |x| f.ln_pdf(x), |x| g.ln_pdf(x))
}

/// [`quadrature_affinity`] over log-density closures.
pub fn quadrature_affinity_with(
    grid: &Grid,
    ln_f: impl Fn(&[f64]) -> f64,
    ln_g: impl Fn(&[f64]) -> f64,
) -> Result<Affinity> {
    let lf = grid.eval(ln_f);
    let lg = grid.eval(ln_g);
    let fv: Vec<f64> = lf.iter().map(|v| v.exp()).collect();
    let gv: Vec<f64> = lg.iter().map(|v| v.exp()).collect();
    let mf = grid.integrate(&fv);
    if mf < COVERAGE {
        return Err(Error::Coverage { which: "first", mass: mf });
    }
    let mg = grid.integrate(&gv);
    if mg < COVERAGE {
        return Err(Error::Coverage { which: "second", mass: mg });
    }
    let root: Vec<f64> = lf.iter().zip(&lg).map(|(a, b)| (0.5 * (a + b)).exp()).collect();
    Affinity::new(grid.integrate(&root), AffinitySource::Quadrature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn example_one_closed_form() {
        let f = Gaussian::univariate(1.0, 1.0).unwrap();
        let g = Gaussian::univariate(0.0, 1.0).unwrap();
        let a = gaussian_affinity(&f, &g).unwrap();
        assert!((a.value() - (-0.125f64).exp()).abs() < 1e-14);
        assert_eq!(a.source(), AffinitySource::ClosedForm);
    }

    #[test]
    fn identical_gaussians_have_unit_affinity() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let a = gaussian_affinity_params(&[1.0, -1.0], &cov, &[1.0, -1.0], &cov).unwrap();
        assert!((a.value() - 1.0).abs() < 1e-15);
        assert!(a.angle() < 1e-7);
        assert!(a.is_degenerate());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let c1 = DMatrix::identity(1, 1);
        let c2 = DMatrix::identity(2, 2);
        assert!(matches!(
            gaussian_affinity_params(&[0.0], &c1, &[0.0, 0.0], &c2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_spd_covariance_is_ill_conditioned() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let id = DMatrix::identity(2, 2);
        assert!(matches!(gaussian_affinity_params(&[0.0, 0.0], &bad, &[0.0, 0.0], &id), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn envelope_and_weight_for_example_one() {
        let a = Affinity::supplied((-0.125f64).exp()).unwrap();
        assert!((a.envelope_bound() - 8.0416).abs() < 1e-3);
        assert!((a.residual_weight(0.5) - 0.05875).abs() < 1e-4);
        assert_eq!(a.residual_weight(0.0), 0.0);
    }

    #[test]
    fn too_few_samples_rejected() {
        let f = Gaussian::univariate(0.0, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        assert!(importance_affinity(&f, &f, 1, &mut rng).is_err());
    }

    use rand::SeedableRng;
}
