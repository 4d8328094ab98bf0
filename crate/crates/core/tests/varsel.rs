use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use geomc::varsel::{
    dense_log_marginal, exact_transition_matrix, informed_g_pmf, log_marginal, neighborhood, rw_proposal_pmf,
    score_neighborhood, simulate_design, simulate_design_with, CholState, DesignKind, ModelGamma, RwKind, VsSampler,
};

fn kind() -> impl Strategy<Value = DesignKind> {
    prop::sample::select(DesignKind::ALL.to_vec())
}

fn random_model(p: usize, seed: u64) -> ModelGamma {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = (0..p).filter(|_| rng.random_bool(0.3)).collect();
    ModelGamma::new(idx, p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn incremental_factor_tracks_dense_marginal(k in kind(), p in 8usize..=50, seed in any::<u64>()) {
        let sim = simulate_design(k, p, 60, 0.7, seed).unwrap();
        let data = &sim.data;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
        let mut chol = CholState::null(data);
        for _ in 0..40 {
            let moves: Vec<_> = neighborhood(chol.gamma(), p).collect();
            chol = chol.apply(data, moves[rng.random_range(0..moves.len())]).unwrap();
            let dense = dense_log_marginal(data, chol.gamma()).unwrap();
            let inc = log_marginal(data, &chol);
            prop_assert!((inc - dense).abs() <= 1e-8 * dense.abs().max(1.0), "{} vs {}", inc, dense);
        }
    }

    #[test]
    fn neighborhood_scores_match_dense(k in kind(), seed in any::<u64>()) {
        let p = 20;
        let sim = simulate_design(k, p, 50, 0.7, seed).unwrap();
        let gamma = random_model(p, seed);
        let chol = CholState::from_model(&sim.data, &gamma).unwrap();
        let scores = score_neighborhood(&sim.data, &chol).unwrap();
        for (mv, s) in scores.moves().iter().zip(scores.scores()) {
            let dense = dense_log_marginal(&sim.data, &gamma.apply(*mv)).unwrap();
            prop_assert!((s - dense).abs() <= 1e-8 * dense.abs().max(1.0));
        }
    }

    #[test]
    fn informed_pmf_is_normalized(seed in any::<u64>()) {
        let p = 15;
        let sim = simulate_design(DesignKind::Independent, p, 40, 0.8, seed).unwrap();
        let chol = CholState::from_model(&sim.data, &random_model(p, seed)).unwrap();
        let scores = score_neighborhood(&sim.data, &chol).unwrap();
        let total: f64 = informed_g_pmf(&scores).unwrap().iter().map(|l| l.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_walk_is_symmetric_between_interior_models(p in 3usize..12, seed in any::<u64>()) {
        let gamma = random_model(p, seed);
        prop_assume!(!gamma.is_empty() && gamma.len() < p);
        let fwd = rw_proposal_pmf(RwKind::Symmetric, &gamma, p).unwrap();
        prop_assert!((fwd.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() < 1e-12);
        for (mv, q) in neighborhood(&gamma, p).zip(&fwd) {
            let next = gamma.apply(mv);
            if next.is_empty() || next.len() == p {
                continue;
            }
            let back = rw_proposal_pmf(RwKind::Symmetric, &next, p).unwrap();
            let j = neighborhood(&next, p).position(|m| m == ModelGamma::reverse(mv)).unwrap();
            prop_assert!((q - back[j]).abs() < 1e-12);
        }
    }
}

#[test]
fn exact_kernels_are_reversible_for_every_design() {
    let kinds = [RwKind::Symmetric, RwKind::ASYMMETRIC_DEFAULT];
    for (d, design) in DesignKind::ALL.into_iter().enumerate() {
        let sim = simulate_design_with(design, 8, 40, 0.6, 100 + d as u64, None, Some(0.3)).unwrap();
        let data = Arc::new(sim.data);
        for rw in kinds {
            for eps in [0.0, 0.3, 1.0] {
                let sampler = VsSampler::new(data.clone(), rw, eps).unwrap();
                let (mat, pi) = exact_transition_matrix(&sampler).unwrap();
                for x in 0..pi.len() {
                    assert!((mat.row(x).sum() - 1.0).abs() < 1e-12);
                    let low = mat.row(x).min();
                    assert!(low >= -1e-12, "{design} {rw:?} eps {eps}: row {x} has {low}");
                    for y in 0..pi.len() {
                        let flow = pi[x] * mat[(x, y)] - pi[y] * mat[(y, x)];
                        assert!(flow.abs() < 1e-13, "{design} {rw:?} eps {eps}: ({x}, {y}) {flow}");
                    }
                }
            }
        }
    }
}
