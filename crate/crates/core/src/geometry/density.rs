//! Densities used as base kernels, directions and targets.

use std::borrow::Cow;
use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numeric::{chol_ln_det, ensure_dim, log_sum_exp, spd_cholesky};

/// Where a density puts its mass.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// All of R^d.
    Real,
    /// A closed box `[lower_i, upper_i]`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl Support {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Support::Real => true,
            Support::Box { lower, upper } => {
                x.iter().zip(lower.iter().zip(upper)).all(|(v, (lo, hi))| v >= lo && v <= hi)
            }
        }
    }
}

/// An evaluable density on R^d, possibly unnormalized, with an optional
/// exact sampler.
pub trait Density: Send + Sync {
    fn dim(&self) -> usize;

    fn ln_pdf(&self, x: &[f64]) -> f64;

    fn is_normalized(&self) -> bool {
        true
    }

    /// Exact draw, if the density knows how to produce one.
    fn sample(&self, _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        None
    }

    fn support(&self) -> Support {
        Support::Real
    }

    /// Gaussian parameters, when the density is Gaussian; enables
    /// closed-form affinities.
    fn as_gaussian(&self) -> Option<&Gaussian> {
        None
    }
}

/// A density `f(y | x)` indexed by a conditioning state.
///
/// Every [`Density`] is a state-free conditional density.
pub trait ConditionalDensity: Send + Sync {
    fn dimension(&self) -> usize;

    fn ln_pdf_given(&self, given: &[f64], y: &[f64]) -> f64;

    fn sample_given(&self, given: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>>;

    /// True when `f(y | x)` does not depend on `x`.
    fn is_state_free(&self) -> bool;

    fn gaussian_at(&self, given: &[f64]) -> Option<Cow<'_, Gaussian>>;
}

impl<D: Density + ?Sized> ConditionalDensity for D {
    fn dimension(&self) -> usize {
        Density::dim(self)
    }

    fn ln_pdf_given(&self, _given: &[f64], y: &[f64]) -> f64 {
        Density::ln_pdf(self, y)
    }

    fn sample_given(&self, _given: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Density::sample(self, rng)
    }

    fn is_state_free(&self) -> bool {
        true
    }

    fn gaussian_at(&self, _given: &[f64]) -> Option<Cow<'_, Gaussian>> {
        self.as_gaussian().map(Cow::Borrowed)
    }
}

/// Multivariate normal `N(mean, cov)`.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    ln_norm: f64,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        ensure_dim(mean.len(), cov.nrows())?;
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Gaussian mean".into()));
        }
        let chol = spd_cholesky(&cov, "covariance")?;
        let d = mean.len() as f64;
        let ln_norm = -0.5 * (d * (2.0 * PI).ln() + chol_ln_det(&chol));
        Ok(Self { mean, cov, chol, ln_norm })
    }

    pub fn univariate(mean: f64, variance: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    pub fn isotropic(mean: &[f64], variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(DVector::from_column_slice(mean), DMatrix::from_diagonal_element(d, d, variance))
    }

    /// Same covariance, new mean. Reuses the factorization.
    pub fn with_mean(&self, mean: DVector<f64>) -> Self {
        Self { mean, cov: self.cov.clone(), chol: self.chol.clone(), ln_norm: self.ln_norm }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    pub fn ln_det_cov(&self) -> f64 {
        chol_ln_det(&self.chol)
    }

    /// Log density at `x` for a Gaussian centred at `center` with this
    /// covariance.
    pub(crate) fn ln_pdf_centered(&self, center: &[f64], x: &[f64]) -> f64 {
        let diff = DVector::from_iterator(x.len(), x.iter().zip(center).map(|(a, b)| a - b));
        let z = self.chol.l_dirty().solve_lower_triangular(&diff).expect("Cholesky factor has a positive diagonal");
        self.ln_norm - 0.5 * z.norm_squared()
    }

    pub(crate) fn draw_centered(&self, center: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let d = center.len();
        let xi = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let l = self.chol.l();
        let step = l * xi;
        center.iter().zip(step.iter()).map(|(c, s)| c + s).collect()
    }
}

impl Density for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        if x.len() != self.mean.len() {
            return f64::NAN;
        }
        self.ln_pdf_centered(self.mean.as_slice(), x)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(self.draw_centered(self.mean.as_slice(), rng))
    }

    fn as_gaussian(&self) -> Option<&Gaussian> {
        Some(self)
    }
}

/// Univariate Student-t with `nu` degrees of freedom, location and scale.
/// `nu = 1` is the Cauchy distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentT {
    nu: f64,
    loc: f64,
    scale: f64,
    ln_norm: f64,
}

impl StudentT {
    pub fn new(nu: f64, loc: f64, scale: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("degrees of freedom {nu} must be positive")));
        }
        if !(scale > 0.0 && scale.is_finite()) || !loc.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid location/scale ({loc}, {scale})")));
        }
        let ln_norm = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * PI).ln() - scale.ln();
        Ok(Self { nu, loc, scale, ln_norm })
    }

    pub fn cauchy(loc: f64, scale: f64) -> Result<Self> {
        Self::new(1.0, loc, scale)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn ln_pdf_at(&self, x: f64) -> f64 {
        let z = (x - self.loc) / self.scale;
        self.ln_norm - 0.5 * (self.nu + 1.0) * (z * z / self.nu).ln_1p()
    }

    pub fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        let t = rand_distr::StudentT::new(self.nu).expect("validated degrees of freedom");
        self.loc + self.scale * t.sample(rng)
    }
}

impl Density for StudentT {
    fn dim(&self) -> usize {
        1
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        self.ln_pdf_at(x[0])
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(vec![self.draw(rng)])
    }
}

/// Finite mixture of Gaussians.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
    components: Vec<Gaussian>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidParameter("mixture needs one weight per component".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("mixture weights must be a probability vector".into()));
        }
        let d = components[0].dim();
        for c in &components {
            ensure_dim(d, c.dim())?;
        }
        let ln_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self { weights, ln_weights, components })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    /// Index of the component with the largest weighted density at `x`.
    pub fn component_of(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, c) in self.components.iter().enumerate() {
            let v = self.ln_weights[i] + c.ln_pdf(x);
            if v > best.1 {
                best = (i, v);
            }
        }
        best.0
    }
}

impl Density for GaussianMixture {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self.components.iter().zip(&self.ln_weights).map(|(c, lw)| lw + c.ln_pdf(x)).collect();
        log_sum_exp(&terms)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, c) in self.weights.iter().zip(&self.components) {
            acc += w;
            if u < acc {
                return c.sample(rng);
            }
        }
        self.components.last().and_then(|c| c.sample(rng))
    }
}
