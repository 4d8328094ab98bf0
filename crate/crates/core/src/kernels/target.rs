use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::geometry::{Density, Gaussian, GaussianMixture, StudentT, Support};

/// An unnormalized log target with optional analytic derivatives.
pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    fn ln_density(&self, x: &[f64]) -> f64;

    /// Highest derivative order available: 0 none, 1 gradient, 2 Hessian,
    /// 3 third-order slices.
    fn derivative_order(&self) -> usize {
        0
    }

    fn gradient(&self, _x: &[f64]) -> Option<DVector<f64>> {
        None
    }

    fn hessian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// `d/dx_j` of the Hessian.
    fn third_order(&self, _x: &[f64], _j: usize) -> Option<DMatrix<f64>> {
        None
    }

    fn support(&self) -> Support {
        Support::Real
    }
}

/// Uses any [`Density`] as a target without derivatives.
#[derive(Clone)]
pub struct DensityTarget(pub Arc<dyn Density>);

impl Target for DensityTarget {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        self.0.ln_pdf(x)
    }

    fn support(&self) -> Support {
        self.0.support()
    }
}

impl Target for Gaussian {
    fn dim(&self) -> usize {
        Density::dim(self)
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        Density::ln_pdf(self, x)
    }

    fn derivative_order(&self) -> usize {
        3
    }

    fn gradient(&self, x: &[f64]) -> Option<DVector<f64>> {
        let diff = DVector::from_column_slice(x) - self.mean();
        Some(-self.cholesky().solve(&diff))
    }

    fn hessian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(-self.cholesky().inverse())
    }

    fn third_order(&self, x: &[f64], _j: usize) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(x.len(), x.len()))
    }
}

impl Target for StudentT {
    fn dim(&self) -> usize {
        1
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        self.ln_pdf_at(x[0])
    }
}

impl Target for GaussianMixture {
    fn dim(&self) -> usize {
        Density::dim(self)
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        Density::ln_pdf(self, x)
    }
}

/// The conditional of `full` on the coordinates `coords`, with every other
/// coordinate held at its value in `state`.
pub struct BlockConditional<'a> {
    full: &'a dyn Target,
    state: &'a [f64],
    coords: &'a [usize],
}

impl<'a> BlockConditional<'a> {
    pub fn new(full: &'a dyn Target, state: &'a [f64], coords: &'a [usize]) -> Self {
        Self { full, state, coords }
    }

    fn embed(&self, block: &[f64]) -> Vec<f64> {
        let mut x = self.state.to_vec();
        for (c, v) in self.coords.iter().zip(block) {
            x[*c] = *v;
        }
        x
    }
}

impl Target for BlockConditional<'_> {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        self.full.ln_density(&self.embed(x))
    }

    fn derivative_order(&self) -> usize {
        self.full.derivative_order().min(2)
    }

    fn gradient(&self, x: &[f64]) -> Option<DVector<f64>> {
        let g = self.full.gradient(&self.embed(x))?;
        Some(DVector::from_iterator(self.coords.len(), self.coords.iter().map(|c| g[*c])))
    }

    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let h = self.full.hessian(&self.embed(x))?;
        let k = self.coords.len();
        Some(DMatrix::from_fn(k, k, |i, j| h[(self.coords[i], self.coords[j])]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_gradient_is_analytic() {
        let g = Gaussian::univariate(0.0, 1.0).unwrap();
        let grad = g.gradient(&[2.0]).unwrap();
        assert!((grad[0] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn block_conditional_fixes_complement() {
        let g = Gaussian::isotropic(&[0.0, 0.0], 1.0).unwrap();
        let state = [0.5, 3.0];
        let coords = [0usize];
        let cond = BlockConditional::new(&g, &state, &coords);
        let want = g.ln_density(&[1.5, 3.0]);
        assert_eq!(cond.ln_density(&[1.5]), want);
        assert!((cond.gradient(&[1.5]).unwrap()[0] + 1.5).abs() < 1e-14);
    }
}
