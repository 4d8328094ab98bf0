//! Geometric informed Metropolis-Hastings.
//!
//! Proposals are built by moving a base kernel `f` along the Fisher-Rao
//! geodesic toward approximations `g_i` of the target, using the
//! square-root representation of densities. The crate covers continuous
//! and finite state spaces, exact finite-chain ordering checks, a
//! variable-selection sampler with incremental Cholesky updates, and the
//! usual chain diagnostics.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod numeric;
pub mod ordering;
pub mod targets;
pub mod varsel;

pub use error::{Error, Result};
pub use geometry::{
    Affinity, AffinityMode, ConditionalDensity, Density, DirectionSet, Gaussian, GeometricProposal, Grid, GridFunction,
    StudentT,
};
pub use kernels::{ChainTrace, ProposalKernel, Sampler, Target};
pub use ordering::FiniteChain;
pub use varsel::{CholState, ModelGamma, VsData};
