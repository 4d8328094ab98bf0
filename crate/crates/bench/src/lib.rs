//! Shared setups for the benchmarks.

use std::sync::Arc;

use geomc::kernels::{Independent, RandomWalk};
use geomc::varsel::{simulate_design, CholState, DesignKind};
use geomc::{AffinityMode, ConditionalDensity, DirectionSet, Gaussian, GeometricProposal, StudentT, VsData};

/// Independent `N(1,1)` base toward `N(0,1)`.
pub fn gaussian_independent(epsilon: f64) -> GeometricProposal {
    let base = Arc::new(Independent::new(Arc::new(Gaussian::univariate(1.0, 1.0).unwrap())));
    let dir: Arc<dyn ConditionalDensity> = Arc::new(Gaussian::univariate(0.0, 1.0).unwrap());
    GeometricProposal::new(base, DirectionSet::single(dir), epsilon, AffinityMode::ClosedForm).unwrap()
}

/// Random-walk base toward a Cauchy, affinity by local quadrature.
pub fn cauchy_random_walk(epsilon: f64, points: usize) -> GeometricProposal {
    let base = Arc::new(RandomWalk::isotropic(1, 1.0).unwrap());
    let dir: Arc<dyn ConditionalDensity> = Arc::new(StudentT::cauchy(0.0, 1.0).unwrap());
    let mode = AffinityMode::LocalQuadrature { half_width: 1e6, scale: 1.0, points, anchors: vec![0.0] };
    GeometricProposal::new(base, DirectionSet::single(dir), epsilon, mode).unwrap()
}

/// Random-walk base in `dim` dimensions toward an offset Gaussian.
pub fn gaussian_random_walk(dim: usize, epsilon: f64) -> GeometricProposal {
    let base = Arc::new(RandomWalk::isotropic(dim, 0.5).unwrap());
    let dir: Arc<dyn ConditionalDensity> = Arc::new(Gaussian::isotropic(&vec![2.0; dim], 4.0).unwrap());
    GeometricProposal::new(base, DirectionSet::single(dir), epsilon, AffinityMode::ClosedForm).unwrap()
}

/// Simulated independent design and the factor of its true model.
pub fn varsel_problem(p: usize, m: usize, seed: u64) -> (Arc<VsData>, CholState) {
    let sim = simulate_design(DesignKind::Independent, p, m, 0.9, seed).unwrap();
    let data = Arc::new(sim.data);
    let chol = CholState::from_model(&data, &sim.truth).unwrap();
    (data, chol)
}
