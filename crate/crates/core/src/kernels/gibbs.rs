use rand::RngCore;

use super::mh::{Move, Sampler};
use super::target::{BlockConditional, Target};
use crate::error::{Error, Result};
use crate::numeric::ensure_dim;

/// One block of a Gibbs scan: the coordinates it updates and the step that
/// targets their conditional.
pub struct GibbsBlock {
    pub coords: Vec<usize>,
    pub sampler: Box<dyn Sampler>,
}

/// Deterministic-scan composition of block updates, in declared order.
pub struct Gibbs {
    dim: usize,
    blocks: Vec<GibbsBlock>,
}

impl Gibbs {
    /// Fails unless the blocks partition `0..dim`.
    pub fn new(dim: usize, blocks: Vec<GibbsBlock>) -> Result<Self> {
        let mut seen = vec![false; dim];
        for b in &blocks {
            if b.coords.is_empty() {
                return Err(Error::InvalidParameter("empty Gibbs block".into()));
            }
            ensure_dim(b.coords.len(), b.sampler.dim())?;
            for &c in &b.coords {
                if c >= dim || seen[c] {
                    return Err(Error::InvalidParameter(format!(
                        "Gibbs blocks do not partition the coordinates (index {c})"
                    )));
                }
                seen[c] = true;
            }
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParameter(format!("coordinate {c} belongs to no Gibbs block")));
        }
        Ok(Self { dim, blocks })
    }

    pub fn blocks(&self) -> &[GibbsBlock] {
        &self.blocks
    }
}

impl Sampler for Gibbs {
    fn dim(&self) -> usize {
        self.dim
    }

    /// `accepted` is true when any block moved; `ln_ratio` is the sum of the
    /// block log ratios.
    fn step(&self, target: &dyn Target, current: &[f64], rng: &mut dyn RngCore) -> Result<Move> {
        ensure_dim(self.dim, current.len())?;
        let mut state = current.to_vec();
        let mut any = false;
        let mut ln_ratio = 0.0;
        for b in &self.blocks {
            let x: Vec<f64> = b.coords.iter().map(|c| state[*c]).collect();
            let m = {
                let cond = BlockConditional::new(target, &state, &b.coords);
                b.sampler.step(&cond, &x, rng)?
            };
            for (c, v) in b.coords.iter().zip(&m.next) {
                state[*c] = *v;
            }
            any |= m.accepted;
            ln_ratio += m.ln_ratio;
        }
        Ok(Move { next: state, accepted: any, ln_ratio, direction: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::base::RandomWalk;
    use crate::kernels::mh::Metropolis;
    use std::sync::Arc;

    fn rw_block(coords: Vec<usize>) -> GibbsBlock {
        let d = coords.len();
        GibbsBlock { coords, sampler: Box::new(Metropolis::new(Arc::new(RandomWalk::isotropic(d, 1.0).unwrap()))) }
    }

    #[test]
    fn overlapping_blocks_rejected() {
        assert!(Gibbs::new(2, vec![rw_block(vec![0]), rw_block(vec![0])]).is_err());
        assert!(Gibbs::new(2, vec![rw_block(vec![0])]).is_err());
        assert!(Gibbs::new(2, vec![rw_block(vec![1]), rw_block(vec![0])]).is_ok());
    }
}
