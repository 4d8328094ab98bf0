//! Bayesian variable selection: the marginal model posterior, local moves,
//! and a locally informed geometric MH sampler on model space.

mod chol;
mod data;
mod design;
mod model;
mod sampler;
mod scores;
mod summary;

pub use chol::{dense_log_marginal, ln_marginal_terms, log_marginal, CholState};
pub use data::{SparseColumns, VsData, SPARSE_MAGIC};
pub use design::{simulate_design, simulate_design_with, DesignKind, SimulatedDesign, DEFAULT_RHO};
pub use model::{class_sizes, neighborhood, ModelGamma, Move, MoveClass};
pub use sampler::{
    enumerate_posterior, exact_inclusion, exact_transition_matrix, run_vs_chain, VsSampler, VsState, VsStep, VsTrace,
    MAX_ENUMERATION_P,
};
pub use scores::{
    informed_g_pmf, neighborhood_affinity, rw_proposal_pmf, score_neighborhood, NeighborhoodScores, RwKind,
};
pub use summary::{least_squares_r2, posterior_summaries, PosteriorSummary};
