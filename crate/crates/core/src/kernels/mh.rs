//! Metropolis-Hastings steps.

use std::sync::Arc;

use rand::{Rng, RngCore};

use super::base::ProposalKernel;
use super::target::Target;
use crate::error::{Error, Result};
use crate::geometry::GeometricProposal;
use crate::numeric::ensure_dim;

/// Outcome of one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Move {
    pub next: Vec<f64>,
    pub accepted: bool,
    /// Log acceptance ratio before truncation at 0, `-inf` for auto-rejected
    /// candidates.
    pub ln_ratio: f64,
    /// Direction used by mixture-of-kernels steps.
    pub direction: Option<usize>,
}

impl Move {
    fn stay(current: &[f64], ln_ratio: f64, direction: Option<usize>) -> Self {
        Self { next: current.to_vec(), accepted: false, ln_ratio, direction }
    }
}

/// A Markov transition that leaves its target invariant.
pub trait Sampler: Send + Sync {
    fn dim(&self) -> usize;

    fn step(&self, target: &dyn Target, current: &[f64], rng: &mut dyn RngCore) -> Result<Move>;
}

/// Log target at a candidate, or `None` when it must be auto-rejected.
fn candidate_ln_target(target: &dyn Target, y: &[f64]) -> Option<f64> {
    let v = target.ln_density(y);
    if v.is_finite() {
        Some(v)
    } else {
        if v == f64::NEG_INFINITY {
            log::debug!("candidate outside target support, rejected");
        } else {
            log::warn!("non-finite log target {v} at candidate {y:?}, rejected");
        }
        None
    }
}

fn accept(ln_ratio: f64, rng: &mut dyn RngCore) -> bool {
    if ln_ratio.is_nan() {
        log::warn!("NaN acceptance ratio, rejected");
        return false;
    }
    ln_ratio >= 0.0 || rng.random::<f64>().ln() < ln_ratio
}

fn current_ln_target(target: &dyn Target, x: &[f64]) -> Result<f64> {
    let v = target.ln_density(x);
    if v.is_nan() || v == f64::INFINITY {
        return Err(Error::Numerical(format!("log target {v} at the current state")));
    }
    Ok(v)
}

/// Plain MH with an arbitrary proposal kernel.
#[derive(Clone)]
pub struct Metropolis {
    kernel: Arc<dyn ProposalKernel>,
}

impl Metropolis {
    pub fn new(kernel: Arc<dyn ProposalKernel>) -> Self {
        Self { kernel }
    }

    pub fn kernel(&self) -> &Arc<dyn ProposalKernel> {
        &self.kernel
    }
}

impl Sampler for Metropolis {
    fn dim(&self) -> usize {
        self.kernel.dimension()
    }

    fn step(&self, target: &dyn Target, current: &[f64], rng: &mut dyn RngCore) -> Result<Move> {
        ensure_dim(self.dim(), current.len())?;
        let y = self.kernel.sample_given(current, rng).ok_or(Error::Capability("sampler for proposal kernel"))?;
        let Some(ly) = candidate_ln_target(target, &y) else {
            return Ok(Move::stay(current, f64::NEG_INFINITY, None));
        };
        let lx = current_ln_target(target, current)?;
        let ln_ratio = ly - lx + self.kernel.ln_pdf_given(&y, current) - self.kernel.ln_pdf_given(current, &y);
        Ok(if accept(ln_ratio, rng) {
            Move { next: y, accepted: true, ln_ratio, direction: None }
        } else {
            Move::stay(current, ln_ratio, None)
        })
    }
}

/// MH with the full mixture proposal `phi_eps = sum_i a_i phi_{i,eps}`.
/// The reverse density uses affinities recomputed at the candidate.
pub struct GeometricMetropolis {
    proposal: GeometricProposal,
}

impl GeometricMetropolis {
    pub fn new(proposal: GeometricProposal) -> Self {
        Self { proposal }
    }

    pub fn proposal(&self) -> &GeometricProposal {
        &self.proposal
    }
}

impl Sampler for GeometricMetropolis {
    fn dim(&self) -> usize {
        self.proposal.dim()
    }

    fn step(&self, target: &dyn Target, current: &[f64], rng: &mut dyn RngCore) -> Result<Move> {
        ensure_dim(self.dim(), current.len())?;
        let p = &self.proposal;
        let affs_x = p.affinities(current, rng)?;
        let draw = p.sample(current, &affs_x, rng)?;
        let y = draw.point;
        let Some(ly) = candidate_ln_target(target, &y) else {
            return Ok(Move::stay(current, f64::NEG_INFINITY, None));
        };
        let lx = current_ln_target(target, current)?;
        let affs_y = p.affinities(&y, rng)?;
        let ln_ratio = ly - lx + p.ln_pdf(&y, current, &affs_y) - p.ln_pdf(current, &y, &affs_x);
        Ok(if accept(ln_ratio, rng) {
            Move { next: y, accepted: true, ln_ratio, direction: None }
        } else {
            Move::stay(current, ln_ratio, None)
        })
    }
}

/// MH that first picks a direction `i ~ a` and then uses only
/// `phi_{i,eps}` in both the proposal and the acceptance ratio.
pub struct MixtureKernelMetropolis {
    proposal: GeometricProposal,
}

impl MixtureKernelMetropolis {
    pub fn new(proposal: GeometricProposal) -> Self {
        Self { proposal }
    }

    pub fn proposal(&self) -> &GeometricProposal {
        &self.proposal
    }
}

impl Sampler for MixtureKernelMetropolis {
    fn dim(&self) -> usize {
        self.proposal.dim()
    }

    fn step(&self, target: &dyn Target, current: &[f64], rng: &mut dyn RngCore) -> Result<Move> {
        ensure_dim(self.dim(), current.len())?;
        let p = &self.proposal;
        let i = p.directions().pick(rng);
        let affs_x = p.affinities(current, rng)?;
        let draw = p.sample_component(i, current, &affs_x, rng)?;
        let y = draw.point;
        let Some(ly) = candidate_ln_target(target, &y) else {
            return Ok(Move::stay(current, f64::NEG_INFINITY, Some(i)));
        };
        let lx = current_ln_target(target, current)?;
        let affs_y = p.affinities(&y, rng)?;
        let ln_ratio =
            ly - lx + p.ln_component_pdf(i, &y, current, &affs_y) - p.ln_component_pdf(i, current, &y, &affs_x);
        Ok(if accept(ln_ratio, rng) {
            Move { next: y, accepted: true, ln_ratio, direction: Some(i) }
        } else {
            Move::stay(current, ln_ratio, Some(i))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Gaussian, StudentT};
    use crate::kernels::base::{Independent, RandomWalk};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn example_one_left_moves_always_accepted() {
        let target = Gaussian::univariate(0.0, 1.0).unwrap();
        let f = Independent::new(Arc::new(Gaussian::univariate(1.0, 1.0).unwrap()));
        let mh = Metropolis::new(Arc::new(f));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x = [0.3];
            let m = mh.step(&target, &x, &mut rng).unwrap();
            if m.next[0] != x[0] {
                assert!(m.accepted);
            }
            // ln ratio = x - y for this pair
            if m.ln_ratio.is_finite() && m.accepted {
                assert!((m.ln_ratio - (x[0] - m.next[0])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_candidate_is_rejected() {
        struct Half;
        impl Target for Half {
            fn dim(&self) -> usize {
                1
            }
            fn ln_density(&self, x: &[f64]) -> f64 {
                if x[0] < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -x[0]
                }
            }
        }
        let mh = Metropolis::new(Arc::new(RandomWalk::isotropic(1, 100.0).unwrap()));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let m = mh.step(&Half, &[0.1], &mut rng).unwrap();
            assert!(m.next[0] >= 0.0);
        }
    }

    #[test]
    fn dimension_checked() {
        let mh = Metropolis::new(Arc::new(Independent::new(Arc::new(StudentT::new(2.0, 0.0, 1.0).unwrap()))));
        let t = Gaussian::univariate(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(mh.step(&t, &[0.0, 1.0], &mut rng).is_err());
    }
}
