use nalgebra::DMatrix;
use serde::Serialize;

use super::chain::mh_transition_matrix;
use crate::error::{Error, Result};

pub const MAX_TV_STEPS: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct UniformErgodicity {
    /// `min_y phi(y)/psi(y)`.
    pub beta: f64,
    /// `max_x TV(P^n(x,·), psi)` for `n = 1..=steps`.
    pub tv: Vec<f64>,
    /// `(1-beta)^n`; `None` when `beta = 0` (no uniform bound).
    pub bound: Option<Vec<f64>>,
}

impl UniformErgodicity {
    pub fn holds(&self) -> bool {
        match &self.bound {
            Some(b) => self.tv.iter().zip(b).all(|(t, b)| *t <= b + 1e-12),
            None => false,
        }
    }

    /// Smallest `bound - tv` over the curve.
    pub fn worst_slack(&self) -> Option<f64> {
        self.bound.as_ref().map(|b| self.tv.iter().zip(b).map(|(t, b)| b - t).fold(f64::INFINITY, f64::min))
    }
}

/// Exact total-variation curve of the independence sampler with proposal
/// `phi` and target `psi`, against the minorization bound.
pub fn uniform_ergodicity_bound(phi: &[f64], psi: &[f64], steps: usize) -> Result<UniformErgodicity> {
    let n = psi.len();
    if phi.len() != n || n == 0 {
        return Err(Error::DimensionMismatch { expected: n, got: phi.len() });
    }
    if steps == 0 || steps > MAX_TV_STEPS {
        return Err(Error::InvalidParameter(format!("steps must lie in 1..={MAX_TV_STEPS}")));
    }
    let (sp, sq): (f64, f64) = (phi.iter().sum(), psi.iter().sum());
    if phi.iter().any(|v| !(*v >= 0.0)) || !(sp > 0.0) {
        return Err(Error::InvalidParameter("proposal must be a nonnegative mass function".into()));
    }
    let phi: Vec<f64> = phi.iter().map(|v| v / sp).collect();
    let beta = phi.iter().zip(psi).map(|(f, s)| f / (s / sq)).fold(f64::INFINITY, f64::min);
    let q = DMatrix::from_fn(n, n, |_, y| phi[y]);
    let chain = mh_transition_matrix(&q, psi)?;
    let target = chain.stationary().transpose();
    let mut power = chain.transition().clone();
    let mut tv = Vec::with_capacity(steps);
    for step in 1..=steps {
        if step > 1 {
            power = &power * chain.transition();
        }
        let worst = (0..n).map(|x| 0.5 * (power.row(x) - &target).abs().sum()).fold(0.0f64, f64::max);
        tv.push(worst);
    }
    let bound = (beta > 0.0).then(|| (1..=steps).map(|k| (1.0 - beta.min(1.0)).powi(k as i32)).collect());
    Ok(UniformErgodicity { beta, tv, bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_proposal_mixes_in_one_step() {
        let psi = [0.1, 0.2, 0.3, 0.4];
        let r = uniform_ergodicity_bound(&psi, &psi, 10).unwrap();
        assert!((r.beta - 1.0).abs() < 1e-12);
        assert!(r.tv.iter().all(|t| *t < 1e-12));
        assert!(r.holds());
    }

    #[test]
    fn bound_dominates_curve() {
        let psi = [5.0, 1.0, 1.0, 2.0, 0.5, 3.0];
        let phi = [1.0; 6];
        let r = uniform_ergodicity_bound(&phi, &psi, 50).unwrap();
        assert!(r.beta > 0.0 && r.holds());
    }

    #[test]
    fn zero_proposal_mass_has_no_bound() {
        let r = uniform_ergodicity_bound(&[0.0, 1.0, 1.0], &[1.0, 1.0, 1.0], 5).unwrap();
        assert_eq!(r.beta, 0.0);
        assert!(r.bound.is_none() && !r.holds());
    }
}
