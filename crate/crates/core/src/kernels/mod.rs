//! Metropolis-Hastings machinery: base kernels, geometric steps, Gibbs
//! composition and chain execution.

mod base;
mod chain;
mod gibbs;
mod mh;
mod target;

pub use base::{
    make_base_kernel, repair_metric, BaseKernelSpec, Independent, KernelKind, Mala, Mmala, ProposalKernel, RandomWalk,
    METRIC_FLOOR,
};
pub use chain::{derive_seed, run_chain, ChainAbort, ChainTrace};
pub use gibbs::{Gibbs, GibbsBlock};
pub use mh::{GeometricMetropolis, Metropolis, MixtureKernelMetropolis, Move, Sampler};
pub use target::{BlockConditional, DensityTarget, Target};
