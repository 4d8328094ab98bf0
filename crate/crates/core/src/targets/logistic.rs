//! Bayesian logistic regression posterior with a Gaussian prior.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{Density, Gaussian};
use crate::kernels::Target;
use crate::numeric::{ensure_dim, logistic, softplus};

/// Default prior variance.
pub const PRIOR_VARIANCE: f64 = 1e3;

#[derive(Debug, Clone)]
pub struct LogisticPosterior {
    design: DMatrix<f64>,
    response: DVector<f64>,
    prior: Gaussian,
    prior_precision: DMatrix<f64>,
}

impl LogisticPosterior {
    pub fn new(
        design: DMatrix<f64>,
        response: Vec<f64>,
        prior_mean: DVector<f64>,
        prior_cov: DMatrix<f64>,
    ) -> Result<Self> {
        ensure_dim(design.nrows(), response.len())?;
        ensure_dim(design.ncols(), prior_mean.len())?;
        if response.iter().any(|z| *z != 0.0 && *z != 1.0) {
            return Err(Error::InvalidParameter("responses must be 0 or 1".into()));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("design has non-finite entries".into()));
        }
        let prior = Gaussian::new(prior_mean, prior_cov)?;
        let prior_precision = prior.cholesky().inverse();
        Ok(Self { design, response: DVector::from_vec(response), prior, prior_precision })
    }

    /// Prior `N(0, 1000 I)`.
    pub fn with_default_prior(design: DMatrix<f64>, response: Vec<f64>) -> Result<Self> {
        let p = design.ncols();
        Self::new(design, response, DVector::zeros(p), DMatrix::from_diagonal_element(p, p, PRIOR_VARIANCE))
    }

    /// Reads delimited text with a header. Every column other than
    /// `response_column` is a covariate; `intercept` prepends a column of ones.
    pub fn from_csv<R: Read>(input: R, response_column: &str, intercept: bool) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let resp_idx = header
            .iter()
            .position(|h| h.trim() == response_column)
            .ok_or_else(|| Error::Parse(format!("no column named {response_column:?}")))?;
        let mut rows: Vec<f64> = Vec::new();
        let mut z = Vec::new();
        let p = header.len() - 1 + usize::from(intercept);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if intercept {
                rows.push(1.0);
            }
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("row {}, column {:?}: {e}", line + 2, &header[k])))?;
                if k == resp_idx {
                    z.push(v);
                } else {
                    rows.push(v);
                }
            }
        }
        if z.is_empty() {
            return Err(Error::InsufficientData("no data rows".into()));
        }
        let design = DMatrix::from_row_slice(z.len(), p, &rows);
        Self::with_default_prior(design, z)
    }

    /// Intercept plus `p - 1` standard normal covariates, coefficients
    /// cycling through a fixed pattern, responses drawn from the model.
    /// Returns the posterior and the true coefficients.
    pub fn simulate(m: usize, p: usize, seed: u64) -> Result<(Self, DVector<f64>)> {
        if m == 0 || p == 0 {
            return Err(Error::InvalidParameter("need m, p >= 1".into()));
        }
        let pattern = [-0.5, 1.0, -0.75, 0.5, 0.25, -1.0];
        let beta = DVector::from_fn(p, |j, _| pattern[j % pattern.len()]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let design = DMatrix::from_fn(m, p, |_, j| if j == 0 { 1.0 } else { rng.sample::<f64, _>(StandardNormal) });
        let eta = &design * &beta;
        let z = eta.iter().map(|e| if rng.random::<f64>() < logistic(*e) { 1.0 } else { 0.0 }).collect();
        Ok((Self::with_default_prior(design, z)?, beta))
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn prior(&self) -> &Gaussian {
        &self.prior
    }

    pub fn ln_posterior(&self, beta: &[f64]) -> f64 {
        if beta.len() != self.design.ncols() {
            return f64::NAN;
        }
        let b = DVector::from_column_slice(beta);
        let eta = &self.design * &b;
        let data: f64 = eta.iter().zip(self.response.iter()).map(|(e, z)| z * e - softplus(*e)).sum();
        data + self.prior.ln_pdf(beta)
    }

    fn fitted(&self, beta: &[f64]) -> DVector<f64> {
        let eta = &self.design * DVector::from_column_slice(beta);
        eta.map(logistic)
    }

    pub fn grad(&self, beta: &[f64]) -> DVector<f64> {
        let xi = self.fitted(beta);
        let b = DVector::from_column_slice(beta);
        self.design.tr_mul(&(&self.response - xi)) - &self.prior_precision * (b - self.prior.mean())
    }

    pub fn hess(&self, beta: &[f64]) -> DMatrix<f64> {
        let xi = self.fitted(beta);
        let lam = xi.map(|x| x * (1.0 - x));
        let weighted = DMatrix::from_fn(self.design.nrows(), self.design.ncols(), |i, j| lam[i] * self.design[(i, j)]);
        -(self.design.tr_mul(&weighted)) - &self.prior_precision
    }

    /// `d/d beta_j` of the Hessian: `-W^T Gamma^j W`.
    pub fn hess_derivative(&self, beta: &[f64], j: usize) -> DMatrix<f64> {
        let xi = self.fitted(beta);
        let gam: Vec<f64> = (0..self.design.nrows())
            .map(|i| xi[i] * (1.0 - xi[i]) * (1.0 - 2.0 * xi[i]) * self.design[(i, j)])
            .collect();
        let weighted = DMatrix::from_fn(self.design.nrows(), self.design.ncols(), |i, k| gam[i] * self.design[(i, k)]);
        -(self.design.tr_mul(&weighted))
    }

    /// Posterior mode by damped Newton iterations, with the inverse
    /// negative Hessian there.
    pub fn posterior_mode(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let mut beta = self.prior.mean().clone();
        let mut value = self.ln_posterior(beta.as_slice());
        for _ in 0..200 {
            let g = self.grad(beta.as_slice());
            if g.amax() < 1e-10 {
                break;
            }
            let neg_h = -self.hess(beta.as_slice());
            let step = neg_h
                .cholesky()
                .ok_or_else(|| Error::Numerical("negative Hessian not positive definite".into()))?
                .solve(&g);
            let mut t = 1.0;
            loop {
                let cand = &beta + &step * t;
                let v = self.ln_posterior(cand.as_slice());
                if v >= value || t < 1e-12 {
                    beta = cand;
                    value = v;
                    break;
                }
                t *= 0.5;
            }
        }
        let cov = (-self.hess(beta.as_slice()))
            .cholesky()
            .ok_or_else(|| Error::Numerical("negative Hessian not positive definite at the mode".into()))?
            .inverse();
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok((beta, cov))
    }
}

impl Target for LogisticPosterior {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        self.ln_posterior(x)
    }

    fn derivative_order(&self) -> usize {
        3
    }

    fn gradient(&self, x: &[f64]) -> Option<DVector<f64>> {
        Some(self.grad(x))
    }

    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.hess(x))
    }

    fn third_order(&self, x: &[f64], j: usize) -> Option<DMatrix<f64>> {
        Some(self.hess_derivative(x, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_observation_data_term() {
        let lp = LogisticPosterior::with_default_prior(DMatrix::from_element(1, 1, 1.0), vec![1.0]).unwrap();
        let prior_term = lp.prior().ln_pdf(&[0.0]);
        assert!((lp.ln_posterior(&[0.0]) - prior_term + 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn large_linear_predictor_is_finite() {
        let lp = LogisticPosterior::with_default_prior(DMatrix::from_element(1, 1, 1.0), vec![0.0]).unwrap();
        assert!(lp.ln_posterior(&[500.0]).is_finite());
        assert!(lp.ln_posterior(&[-500.0]).is_finite());
    }

    #[test]
    fn gradient_at_zero() {
        let (lp, _) = LogisticPosterior::simulate(30, 3, 1).unwrap();
        let g = lp.grad(&[0.0, 0.0, 0.0]);
        let want = lp.design().tr_mul(&lp.response().map(|z| z - 0.5));
        assert!((g - want).amax() < 1e-12);
    }

    #[test]
    fn bad_response_rejected() {
        assert!(LogisticPosterior::with_default_prior(DMatrix::from_element(1, 1, 1.0), vec![2.0]).is_err());
    }

    #[test]
    fn csv_loader_reads_named_response() {
        let text = "y,a,b\n1,0.5,2\n0,-1,3\n1,2,2\n";
        let lp = LogisticPosterior::from_csv(text.as_bytes(), "y", true).unwrap();
        assert_eq!(lp.design().ncols(), 3);
        assert_eq!(lp.design()[(1, 1)], -1.0);
        assert_eq!(lp.response().as_slice(), &[1.0, 0.0, 1.0]);
        assert!(LogisticPosterior::from_csv(text.as_bytes(), "nope", true).is_err());
    }

    #[test]
    fn mode_has_zero_gradient() {
        let (lp, _) = LogisticPosterior::simulate(100, 4, 2).unwrap();
        let (mode, cov) = lp.posterior_mode().unwrap();
        assert!(lp.grad(mode.as_slice()).amax() < 1e-8);
        assert!(cov.cholesky().is_some());
    }
}
