//! Base proposal kernels `f(y|x)`.

use std::borrow::Cow;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::target::Target;
use crate::error::{Error, Result};
use crate::geometry::{ConditionalDensity, Density, Gaussian, StudentT};
use crate::numeric::ensure_dim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    RandomWalk,
    Independent,
    Mala,
    Mmala,
    Geometric,
    Custom,
}

/// A conditional density used to propose moves.
pub trait ProposalKernel: ConditionalDensity {
    fn kind(&self) -> KernelKind;
}

/// `N(x, cov)`.
#[derive(Debug, Clone)]
pub struct RandomWalk {
    step: Gaussian,
}

impl RandomWalk {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        let d = cov.nrows();
        Ok(Self { step: Gaussian::new(DVector::zeros(d), cov)? })
    }

    pub fn isotropic(dim: usize, variance: f64) -> Result<Self> {
        Self::new(DMatrix::from_diagonal_element(dim, dim, variance))
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        self.step.cov()
    }
}

impl ConditionalDensity for RandomWalk {
    fn dimension(&self) -> usize {
        Density::dim(&self.step)
    }

    fn ln_pdf_given(&self, given: &[f64], y: &[f64]) -> f64 {
        self.step.ln_pdf_centered(given, y)
    }

    fn sample_given(&self, given: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(self.step.draw_centered(given, rng))
    }

    fn is_state_free(&self) -> bool {
        false
    }

    fn gaussian_at(&self, given: &[f64]) -> Option<Cow<'_, Gaussian>> {
        Some(Cow::Owned(self.step.with_mean(DVector::from_column_slice(given))))
    }
}

impl ProposalKernel for RandomWalk {
    fn kind(&self) -> KernelKind {
        KernelKind::RandomWalk
    }
}

/// A state-free proposal `f(y)`.
#[derive(Clone)]
pub struct Independent {
    density: Arc<dyn Density>,
}

impl Independent {
    pub fn new(density: Arc<dyn Density>) -> Self {
        Self { density }
    }

    pub fn density(&self) -> &Arc<dyn Density> {
        &self.density
    }
}

impl ConditionalDensity for Independent {
    fn dimension(&self) -> usize {
        self.density.dim()
    }

    fn ln_pdf_given(&self, _given: &[f64], y: &[f64]) -> f64 {
        self.density.ln_pdf(y)
    }

    fn sample_given(&self, _given: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        self.density.sample(rng)
    }

    fn is_state_free(&self) -> bool {
        true
    }

    fn gaussian_at(&self, _given: &[f64]) -> Option<Cow<'_, Gaussian>> {
        self.density.as_gaussian().map(Cow::Borrowed)
    }
}

impl ProposalKernel for Independent {
    fn kind(&self) -> KernelKind {
        KernelKind::Independent
    }
}

/// Langevin proposal `N(x + h/2 grad ln psi(x), h I)`.
#[derive(Clone)]
pub struct Mala {
    h: f64,
    target: Arc<dyn Target>,
}

impl Mala {
    pub fn new(h: f64, target: Arc<dyn Target>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size h = {h} must be positive")));
        }
        if target.derivative_order() < 1 {
            return Err(Error::Capability("MALA needs the target gradient"));
        }
        Ok(Self { h, target })
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    fn proposal_at(&self, x: &[f64]) -> Option<Gaussian> {
        let grad = self.target.gradient(x)?;
        let mean = DVector::from_column_slice(x) + grad * (0.5 * self.h);
        if mean.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Gaussian::isotropic(mean.as_slice(), self.h).ok()
    }
}

impl ConditionalDensity for Mala {
    fn dimension(&self) -> usize {
        self.target.dim()
    }

    fn ln_pdf_given(&self, given: &[f64], y: &[f64]) -> f64 {
        self.proposal_at(given).map_or(f64::NEG_INFINITY, |g| g.ln_pdf(y))
    }

    fn sample_given(&self, given: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        self.proposal_at(given)?.sample(rng)
    }

    fn is_state_free(&self) -> bool {
        false
    }

    fn gaussian_at(&self, given: &[f64]) -> Option<Cow<'_, Gaussian>> {
        self.proposal_at(given).map(Cow::Owned)
    }
}

impl ProposalKernel for Mala {
    fn kind(&self) -> KernelKind {
        KernelKind::Mala
    }
}

/// Relative eigenvalue floor used to repair an indefinite metric.
pub const METRIC_FLOOR: f64 = 1e-6;

/// Simplified manifold Langevin proposal with metric `G = -Hessian`:
/// `N(x + h/2 G^-1 grad, h G^-1)`. Curvature terms are dropped.
#[derive(Clone)]
pub struct Mmala {
    h: f64,
    target: Arc<dyn Target>,
}

/// `G` with eigenvalues floored at `METRIC_FLOOR` times the largest. When no
/// eigenvalue is positive their magnitudes are used instead.
pub fn repair_metric(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (g + g.transpose()) * 0.5;
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned("metric has non-finite entries".into()));
    }
    let eig = sym.symmetric_eigen();
    let mut vals = eig.eigenvalues.clone();
    let top = vals.max();
    if top <= 0.0 {
        vals.iter_mut().for_each(|v| *v = v.abs());
    }
    let top = vals.max();
    if !(top > 0.0) {
        return Ok(DMatrix::identity(g.nrows(), g.ncols()));
    }
    let floor = METRIC_FLOOR * top;
    vals.iter_mut().for_each(|v| *v = v.max(floor));
    let v = &eig.eigenvectors;
    let m = v * DMatrix::from_diagonal(&vals) * v.transpose();
    Ok((&m + m.transpose()) * 0.5)
}

impl Mmala {
    pub fn new(h: f64, target: Arc<dyn Target>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size h = {h} must be positive")));
        }
        if target.derivative_order() < 2 {
            return Err(Error::Capability("MMALA needs the target gradient and Hessian"));
        }
        Ok(Self { h, target })
    }

    fn proposal_at(&self, x: &[f64]) -> Option<Gaussian> {
        let grad = self.target.gradient(x)?;
        let metric = repair_metric(&(-self.target.hessian(x)?)).ok()?;
        let chol = metric.clone().cholesky()?;
        let drift = chol.solve(&grad);
        let mean = DVector::from_column_slice(x) + drift * (0.5 * self.h);
        let inv = chol.inverse();
        let cov = (&inv + inv.transpose()) * (0.5 * self.h);
        Gaussian::new(mean, cov).ok()
    }
}

impl ConditionalDensity for Mmala {
    fn dimension(&self) -> usize {
        self.target.dim()
    }

    fn ln_pdf_given(&self, given: &[f64], y: &[f64]) -> f64 {
        self.proposal_at(given).map_or(f64::NEG_INFINITY, |g| g.ln_pdf(y))
    }

    fn sample_given(&self, given: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        self.proposal_at(given)?.sample(rng)
    }

    fn is_state_free(&self) -> bool {
        false
    }

    fn gaussian_at(&self, given: &[f64]) -> Option<Cow<'_, Gaussian>> {
        self.proposal_at(given).map(Cow::Owned)
    }
}

impl ProposalKernel for Mmala {
    fn kind(&self) -> KernelKind {
        KernelKind::Mmala
    }
}

/// Declarative description of a base kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseKernelSpec {
    RandomWalk { cov: DMatrix<f64> },
    IndependentGaussian { mean: Vec<f64>, cov: DMatrix<f64> },
    IndependentStudentT { nu: f64, loc: f64, scale: f64 },
    Mala { h: f64 },
    Mmala { h: f64 },
}

pub fn make_base_kernel(spec: &BaseKernelSpec, target: Arc<dyn Target>) -> Result<Arc<dyn ProposalKernel>> {
    let d = target.dim();
    Ok(match spec {
        BaseKernelSpec::RandomWalk { cov } => {
            ensure_dim(d, cov.nrows())?;
            Arc::new(RandomWalk::new(cov.clone())?)
        }
        BaseKernelSpec::IndependentGaussian { mean, cov } => {
            ensure_dim(d, mean.len())?;
            let g = Gaussian::new(DVector::from_column_slice(mean), cov.clone())?;
            Arc::new(Independent::new(Arc::new(g)))
        }
        BaseKernelSpec::IndependentStudentT { nu, loc, scale } => {
            ensure_dim(d, 1)?;
            Arc::new(Independent::new(Arc::new(StudentT::new(*nu, *loc, *scale)?)))
        }
        BaseKernelSpec::Mala { h } => Arc::new(Mala::new(*h, target)?),
        BaseKernelSpec::Mmala { h } => Arc::new(Mmala::new(*h, target)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DensityTarget;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_walk_is_exactly_symmetric() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]);
        let rw = RandomWalk::new(cov).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = rw.sample_given(&[0.0, 0.0], &mut rng).unwrap();
            let y = rw.sample_given(&[1.0, -1.0], &mut rng).unwrap();
            assert_eq!(rw.ln_pdf_given(&x, &y), rw.ln_pdf_given(&y, &x));
        }
    }

    #[test]
    fn mala_mean_on_standard_normal() {
        let t: Arc<dyn Target> = Arc::new(Gaussian::univariate(0.0, 1.0).unwrap());
        let k = Mala::new(0.01, t).unwrap();
        let g = k.gaussian_at(&[2.0]).unwrap();
        assert!((g.mean()[0] - 1.99).abs() < 1e-14);
        assert!((g.cov()[(0, 0)] - 0.01).abs() < 1e-16);
    }

    #[test]
    fn mala_requires_gradient() {
        let t: Arc<dyn Target> = Arc::new(DensityTarget(Arc::new(StudentT::new(2.0, 0.0, 1.0).unwrap())));
        assert!(matches!(Mala::new(0.1, t), Err(Error::Capability(_))));
    }

    #[test]
    fn mmala_on_gaussian_is_scaled_newton_step() {
        let t: Arc<dyn Target> = Arc::new(Gaussian::univariate(1.0, 4.0).unwrap());
        let k = Mmala::new(0.5, t).unwrap();
        let g = k.gaussian_at(&[3.0]).unwrap();
        // G = 1/4, G^-1 grad = -(3 - 1)
        assert!((g.mean()[0] - (3.0 - 0.25 * 2.0)).abs() < 1e-12);
        assert!((g.cov()[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn metric_repair_floors_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, -1.0]);
        let r = repair_metric(&m).unwrap();
        assert!((r[(1, 1)] - 4e-6).abs() < 1e-18);
        assert!((r[(0, 0)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn independent_kernel_ignores_state() {
        let k = Independent::new(Arc::new(StudentT::new(2.0, 0.0, 1.0).unwrap()));
        assert_eq!(k.ln_pdf_given(&[0.0], &[1.3]), k.ln_pdf_given(&[100.0], &[1.3]));
    }
}
