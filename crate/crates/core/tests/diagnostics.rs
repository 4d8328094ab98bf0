use std::sync::Arc;

use proptest::prelude::*;

use geomc::diagnostics::{acf, ess, msjd, multivariate_ess, DiagnosticsReport};
use geomc::kernels::{run_chain, Metropolis, RandomWalk};
use geomc::{ChainTrace, Gaussian};

fn trace(n: usize, seed: u64) -> ChainTrace {
    let target = Gaussian::isotropic(&[0.0, 0.0, 0.0], 1.0).unwrap();
    let sampler = Metropolis::new(Arc::new(RandomWalk::isotropic(3, 0.8).unwrap()));
    run_chain(&sampler, &target, &[0.0; 3], n, seed).unwrap()
}

#[test]
fn persisted_trace_gives_the_same_report() {
    let t = trace(5_000, 11);
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let back = ChainTrace::read_csv(buf.as_slice()).unwrap();
    let a = DiagnosticsReport::from_trace(&t, 8).unwrap();
    let b = DiagnosticsReport::from_trace(&back, 8).unwrap();
    assert_eq!(a.to_string(), b.to_string());
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn report_agrees_with_the_standalone_metrics() {
    let t = trace(5_000, 12);
    let r = DiagnosticsReport::from_trace(&t, 5).unwrap();
    assert_eq!(r.msjd, msjd(&t.states).unwrap());
    assert_eq!(r.mess, Some(multivariate_ess(&t.states).unwrap()));
    for j in 0..3 {
        let xs = t.coordinate(j);
        assert_eq!(r.ess[j], Some(ess(&xs).unwrap()));
        assert_eq!(r.acf[j].as_deref(), Some(acf(&xs, 5).unwrap().as_slice()));
    }
    assert!((r.acceptance_rate - t.acceptance_rate()).abs() < 1e-15);
}

#[test]
fn mixing_chain_has_sensible_ess() {
    let t = trace(20_000, 13);
    let r = DiagnosticsReport::from_trace(&t, 8).unwrap();
    let mess = r.mess.unwrap();
    assert!(mess > 500.0 && mess < 20_000.0, "{mess}");
    for e in r.ess.iter().flatten() {
        assert!(*e > 200.0 && *e < 20_000.0, "{e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn msjd_is_shift_invariant_and_scales_quadratically(
        xs in prop::collection::vec(-10.0..10.0f64, 2..60),
        shift in -5.0..5.0f64,
        scale in 0.1..4.0f64,
    ) {
        let states: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
        let moved: Vec<Vec<f64>> = xs.iter().map(|x| vec![scale * x + shift]).collect();
        let (a, b) = (msjd(&states).unwrap(), msjd(&moved).unwrap());
        prop_assert!((b - scale * scale * a).abs() <= 1e-9 * (1.0 + b));
    }

    #[test]
    fn acf_starts_at_one_and_is_bounded(xs in prop::collection::vec(-10.0..10.0f64, 100..300)) {
        prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-6));
        let r = acf(&xs, 5).unwrap();
        prop_assert!((r[0] - 1.0).abs() < 1e-12);
        prop_assert!(r.iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }
}
