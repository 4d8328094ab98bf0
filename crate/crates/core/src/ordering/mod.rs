//! Exact finite-state checks of the chain ordering results.

pub mod chain;
pub mod ergodicity;
pub mod fixtures;
pub mod peskun;
pub mod theorem;

pub use chain::{asymptotic_variance, mh_transition_matrix, right_spectral_gap, spectral_gap, FiniteChain};
pub use ergodicity::{uniform_ergodicity_bound, UniformErgodicity};
pub use fixtures::{default_fixtures, verify_fixture, verify_fixtures, Check, Fixture, FixtureReport};
pub use peskun::{
    algorithm1_matrix, algorithm2_matrix, c_epsilon_bound, component_proposals, mixture_proposal, peskun_constant,
};
pub use theorem::{random_test_function, verify_theorem1, OrderingReport, TrialStats};
