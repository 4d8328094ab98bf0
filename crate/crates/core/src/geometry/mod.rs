//! Square-root geometry of densities: affinities, residual directions and
//! the perturbed proposals built from them.

mod affinity;
mod density;
pub mod finite;
mod grid;
mod proposal;
mod residual;

pub use affinity::{
    gaussian_affinity, gaussian_affinity_params, importance_affinity, importance_affinity_with, quadrature_affinity,
    quadrature_affinity_with, Affinity, AffinitySource, DEGENERATE_GAP, MC_FLOOR,
};
pub use density::{ConditionalDensity, Density, Gaussian, GaussianMixture, StudentT, Support};
pub use grid::{Grid, GridFunction};
pub use proposal::{AffinityMode, DirectionSet, GeometricProposal, ProposalDraw, DEFAULT_MC_SAMPLES};
pub use residual::{
    exact_perturbed_pdf, ln_mixture_term, ln_residual, ln_residual_acceptance, perturbation_cross_term,
    residual_density_h, sample_residual_h, sample_residual_with, ResidualDensity, ResidualDraw, DEFAULT_REJECTION_CAP,
};
