use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use geomc::diagnostics::{ess, sample_covariance};
use geomc::kernels::{
    run_chain, ChainTrace, GeometricMetropolis, Gibbs, GibbsBlock, Metropolis, MixtureKernelMetropolis, RandomWalk,
};
use geomc::{AffinityMode, ConditionalDensity, DirectionSet, Gaussian, GeometricProposal, Sampler};

fn correlated_target() -> Gaussian {
    Gaussian::new(DVector::from_vec(vec![1.0, -0.5]), DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0])).unwrap()
}

fn proposal() -> GeometricProposal {
    let dirs: Vec<Arc<dyn ConditionalDensity>> = vec![
        Arc::new(Gaussian::isotropic(&[2.0, 2.0], 4.0).unwrap()),
        Arc::new(Gaussian::isotropic(&[-1.0, 0.0], 1.0).unwrap()),
    ];
    GeometricProposal::new(
        Arc::new(RandomWalk::isotropic(2, 0.5).unwrap()),
        DirectionSet::new(dirs, vec![0.3, 0.7]).unwrap(),
        0.5,
        AffinityMode::ClosedForm,
    )
    .unwrap()
}

/// Means within five Monte Carlo standard errors and the covariance within
/// 10% of the target's.
fn assert_moments(trace: &ChainTrace, target: &Gaussian) {
    for j in 0..2 {
        let xs = trace.coordinate(j);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = (target.cov()[(j, j)] / ess(&xs).unwrap()).sqrt();
        assert!((mean - target.mean()[j]).abs() < 5.0 * se, "coordinate {j}: {mean} (se {se})");
    }
    let cov = sample_covariance(&trace.states).unwrap();
    let err = (&cov - target.cov()).amax();
    assert!(err < 0.1 * target.cov().amax(), "covariance {cov}");
}

#[test]
fn full_mixture_kernel_targets_gaussian() {
    let target = correlated_target();
    let sampler = GeometricMetropolis::new(proposal());
    let trace = run_chain(&sampler, &target, &[0.0, 0.0], 100_000, 7).unwrap();
    assert_moments(&trace, &target);
    assert!(trace.directions.iter().all(Option::is_none));
}

#[test]
fn direction_wise_kernel_targets_gaussian() {
    let target = correlated_target();
    let sampler = MixtureKernelMetropolis::new(proposal());
    let trace = run_chain(&sampler, &target, &[0.0, 0.0], 100_000, 8).unwrap();
    assert_moments(&trace, &target);
    let second = trace.directions.iter().filter(|d| **d == Some(1)).count() as f64;
    assert!((second / trace.len() as f64 - 0.7).abs() < 0.01);
}

#[test]
fn geometric_steps_within_gibbs_target_gaussian() {
    let target = correlated_target();
    let block = |c: usize| {
        let g: Arc<dyn ConditionalDensity> = Arc::new(Gaussian::univariate(0.0, 25.0).unwrap());
        let p = GeometricProposal::new(
            Arc::new(RandomWalk::isotropic(1, 0.3).unwrap()),
            DirectionSet::single(g),
            0.5,
            AffinityMode::ClosedForm,
        )
        .unwrap();
        GibbsBlock { coords: vec![c], sampler: Box::new(GeometricMetropolis::new(p)) as Box<dyn Sampler> }
    };
    let gibbs = Gibbs::new(2, vec![block(0), block(1)]).unwrap();
    let trace = run_chain(&gibbs, &target, &[0.0, 0.0], 100_000, 9).unwrap();
    assert_moments(&trace, &target);
}

#[test]
fn same_seed_same_trace() {
    let target = correlated_target();
    let sampler = Metropolis::new(Arc::new(RandomWalk::isotropic(2, 1.0).unwrap()));
    let a = run_chain(&sampler, &target, &[0.0, 0.0], 500, 42).unwrap();
    let b = run_chain(&sampler, &target, &[0.0, 0.0], 500, 42).unwrap();
    assert_eq!(a.states, b.states);
    assert_eq!(a.accepted, b.accepted);
}

#[test]
fn trace_csv_round_trip() {
    let target = correlated_target();
    let sampler = GeometricMetropolis::new(proposal());
    let trace = run_chain(&sampler, &target, &[0.0, 0.0], 200, 3).unwrap();
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let back = ChainTrace::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.states, trace.states);
    assert_eq!(back.accepted, trace.accepted);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_walk_density_is_symmetric(
        x in prop::collection::vec(-5.0..5.0f64, 2),
        y in prop::collection::vec(-5.0..5.0f64, 2),
        v in 0.1..3.0f64,
        r in -0.8..0.8f64,
    ) {
        let c = r * v;
        let kernel = RandomWalk::new(DMatrix::from_row_slice(2, 2, &[v, c, c, v])).unwrap();
        let fwd = kernel.ln_pdf_given(&x, &y);
        let back = kernel.ln_pdf_given(&y, &x);
        prop_assert!((fwd - back).abs() < 1e-12);
    }
}
