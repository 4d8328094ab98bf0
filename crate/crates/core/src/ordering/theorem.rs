use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::chain::{asymptotic_variance, right_spectral_gap, spectral_gap, FiniteChain};
use super::peskun::peskun_constant;
use crate::error::{Error, Result};

/// Slack below which an inequality counts as violated.
pub const SLACK_TOL: f64 = 1e-9;

/// One random test function and both chains' statistics on it.
#[derive(Debug, Clone, Serialize)]
pub struct TrialStats {
    pub sigma2: f64,
    pub lag_one_p: f64,
    pub lag_one_q: f64,
    pub var_p: f64,
    pub var_q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderingReport {
    /// Minimum off-diagonal `P/Q`.
    pub peskun: f64,
    /// `min(peskun, 1)`, the constant used in the inequalities.
    pub c: f64,
    pub gap_p: f64,
    pub gap_q: f64,
    pub right_gap_p: f64,
    pub right_gap_q: f64,
    pub trials: Vec<TrialStats>,
    pub c_epsilon: Option<f64>,
    pub covariance_slack: f64,
    pub gap_slack: f64,
    /// `+inf` when `c = 0` makes the bound vacuous.
    pub variance_slack: f64,
}

impl OrderingReport {
    pub fn covariance_holds(&self) -> bool {
        self.covariance_slack >= -SLACK_TOL
    }

    pub fn gap_holds(&self) -> bool {
        self.gap_slack >= -SLACK_TOL
    }

    pub fn variance_holds(&self) -> bool {
        self.variance_slack >= -SLACK_TOL
    }

    pub fn all_hold(&self) -> bool {
        self.covariance_holds() && self.gap_holds() && self.variance_holds()
    }

    /// Whether the |λ| gap also satisfies `Gap(P) >= c Gap(Q)`; not implied
    /// by the ordering when `P` has eigenvalues near -1.
    pub fn absolute_gap_ordered(&self) -> bool {
        self.gap_p - self.c * self.gap_q >= -SLACK_TOL
    }
}

/// Standard normal entries, centered and scaled to unit `ψ`-variance.
pub fn random_test_function(chain: &FiniteChain, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let t = DVector::from_fn(chain.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let c = chain.center(&t);
        let var = chain.variance(&c);
        if var > 1e-300 {
            return c / var.sqrt();
        }
    }
}

/// Checks the covariance, gap and asymptotic-variance orderings of `p`
/// against `q` on `trials` random test functions.
pub fn verify_theorem1(p: &FiniteChain, q: &FiniteChain, trials: usize, seed: u64) -> Result<OrderingReport> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: q.len(), got: p.len() });
    }
    let psi_err = (p.stationary() - q.stationary()).amax();
    if psi_err > 1e-10 {
        return Err(Error::InvalidParameter(format!("chains have different stationary pmfs ({psi_err:.3e})")));
    }
    let peskun = peskun_constant(p.transition(), q.transition())?;
    let c = peskun.min(1.0);
    let (gap_p, gap_q) = (spectral_gap(p)?, spectral_gap(q)?);
    let (right_gap_p, right_gap_q) = (right_spectral_gap(p)?, right_spectral_gap(q)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut covariance_slack = f64::INFINITY;
    let mut variance_slack = f64::INFINITY;
    let mut stats = Vec::with_capacity(trials);
    for _ in 0..trials {
        let t = random_test_function(q, &mut rng);
        let sigma2 = q.variance(&t);
        let s = TrialStats {
            sigma2,
            lag_one_p: p.lag_one(&t),
            lag_one_q: q.lag_one(&t),
            var_p: asymptotic_variance(p, &t)?,
            var_q: asymptotic_variance(q, &t)?,
        };
        covariance_slack = covariance_slack.min(c * s.lag_one_q + (1.0 - c) * sigma2 - s.lag_one_p);
        if c > 0.0 {
            variance_slack = variance_slack.min(s.var_q / c + (1.0 - c) / c * sigma2 - s.var_p);
        }
        stats.push(s);
    }
    Ok(OrderingReport {
        peskun,
        c,
        gap_p,
        gap_q,
        right_gap_p,
        right_gap_q,
        trials: stats,
        c_epsilon: None,
        covariance_slack,
        gap_slack: right_gap_p - c * right_gap_q,
        variance_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordering::chain::mh_transition_matrix;
    use nalgebra::DMatrix;

    fn rw(n: usize, lazy: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |x, y| {
            if x == y {
                lazy
            } else if (x + 1) % n == y || (y + 1) % n == x {
                (1.0 - lazy) / 2.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn identical_chains_are_tight() {
        let psi: Vec<f64> = (1..=7).map(f64::from).collect();
        let q = mh_transition_matrix(&rw(7, 0.0), &psi).unwrap();
        let r = verify_theorem1(&q, &q, 20, 3).unwrap();
        assert_eq!(r.c, 1.0);
        assert!(r.covariance_slack.abs() < 1e-10 && r.gap_slack.abs() < 1e-10 && r.variance_slack.abs() < 1e-10);
    }

    #[test]
    fn lazier_chain_is_dominated() {
        let psi: Vec<f64> = (1..=9).map(|x| f64::from(x).sqrt()).collect();
        let p = mh_transition_matrix(&rw(9, 0.0), &psi).unwrap();
        let q = mh_transition_matrix(&rw(9, 0.4), &psi).unwrap();
        let r = verify_theorem1(&q, &p, 50, 1).unwrap();
        assert!((r.peskun - 0.6).abs() < 1e-12);
        assert!(r.all_hold());
    }

    #[test]
    fn mismatched_targets_rejected() {
        let p = mh_transition_matrix(&rw(4, 0.0), &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let q = mh_transition_matrix(&rw(4, 0.0), &[1.0, 2.0, 1.0, 1.0]).unwrap();
        assert!(verify_theorem1(&p, &q, 5, 1).is_err());
    }

    #[test]
    fn test_functions_are_standardized() {
        let q = mh_transition_matrix(&rw(5, 0.1), &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = random_test_function(&q, &mut rng);
        assert!(q.mean(&t).abs() < 1e-14);
        assert!((q.variance(&t) - 1.0).abs() < 1e-12);
    }
}
