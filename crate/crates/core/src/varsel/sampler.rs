//! Geometric MH on model space with `k = 1`: base `f` from the random-walk
//! class weights, `g` the posterior restricted to the neighborhood.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use super::chol::{dense_log_marginal, log_marginal, CholState};
use super::data::VsData;
use super::model::{ModelGamma, Move};
use super::scores::{
    informed_g_pmf, neighborhood_affinity, rw_proposal_pmf, score_neighborhood, NeighborhoodScores, RwKind,
};
use crate::error::{Error, Result};
use crate::geometry::finite::ln_geometric_mixture;
use crate::numeric::log_sum_exp;

/// Largest `p` accepted by the enumeration helpers.
pub const MAX_ENUMERATION_P: usize = 16;

/// Chain state: the model, its factor, and (for `epsilon > 0`) its
/// neighborhood scores.
#[derive(Debug, Clone)]
pub struct VsState {
    chol: CholState,
    ln_post: f64,
    scores: Option<NeighborhoodScores>,
}

impl VsState {
    pub fn gamma(&self) -> &ModelGamma {
        self.chol.gamma()
    }

    pub fn chol(&self) -> &CholState {
        &self.chol
    }

    pub fn ln_post(&self) -> f64 {
        self.ln_post
    }

    pub fn scores(&self) -> Option<&NeighborhoodScores> {
        self.scores.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VsStep {
    pub proposed: Move,
    pub accepted: bool,
    pub ln_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct VsSampler {
    data: Arc<VsData>,
    kind: RwKind,
    epsilon: f64,
}

impl VsSampler {
    /// `epsilon = 0` gives the plain random-walk MH chain.
    pub fn new(data: Arc<VsData>, kind: RwKind, epsilon: f64) -> Result<Self> {
        kind.validate()?;
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        Ok(Self { data, kind, epsilon })
    }

    pub fn data(&self) -> &Arc<VsData> {
        &self.data
    }

    pub fn kind(&self) -> RwKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn informed(&self) -> bool {
        self.epsilon > 0.0
    }

    fn state_from(&self, chol: CholState) -> Result<VsState> {
        let ln_post = log_marginal(&self.data, &chol);
        let scores = if self.informed() { Some(score_neighborhood(&self.data, &chol)?) } else { None };
        Ok(VsState { chol, ln_post, scores })
    }

    pub fn init(&self, gamma: &ModelGamma) -> Result<VsState> {
        self.state_from(CholState::from_model(&self.data, gamma)?)
    }

    /// `log φ_ε` over the neighborhood described by `scores`.
    pub fn ln_proposal(&self, scores: &NeighborhoodScores) -> Result<Vec<f64>> {
        let ln_f = rw_proposal_pmf(self.kind, scores.gamma(), scores.p())?;
        if !self.informed() {
            return Ok(ln_f);
        }
        let ln_g = informed_g_pmf(scores)?;
        let aff = neighborhood_affinity(&ln_f, &ln_g)?;
        ln_geometric_mixture(&ln_f, &ln_g, &aff, self.epsilon)
    }

    fn ln_base(&self, gamma: &ModelGamma, mv: Move) -> Result<f64> {
        self.kind.ln_pmf(mv.class(), gamma.len(), self.data.ncols())
    }

    fn draw_base(&self, gamma: &ModelGamma, rng: &mut dyn RngCore) -> Result<Move> {
        let p = self.data.ncols();
        let (a, d, _) = self.kind.class_weights(gamma.len(), p)?;
        let outside: Vec<usize> = (0..p).filter(|j| !gamma.contains(*j)).collect();
        let inside = gamma.indices();
        let u: f64 = rng.random();
        Ok(if u < a {
            Move::Add(outside[rng.random_range(0..outside.len())])
        } else if u < a + d {
            Move::Delete(inside[rng.random_range(0..inside.len())])
        } else {
            Move::Swap {
                out: inside[rng.random_range(0..inside.len())],
                into: outside[rng.random_range(0..outside.len())],
            }
        })
    }

    /// One MH transition. The reverse proposal is evaluated on the proposed
    /// model's own neighborhood; on acceptance those scores become current.
    pub fn step(&self, state: VsState, rng: &mut dyn RngCore) -> Result<(VsState, VsStep)> {
        let gamma = state.gamma().clone();
        let (mv, ln_fwd) = match &state.scores {
            Some(scores) => {
                let ln_phi = self.ln_proposal(scores)?;
                let idx = categorical(&ln_phi, rng);
                (scores.moves()[idx], ln_phi[idx])
            }
            None => {
                let mv = self.draw_base(&gamma, rng)?;
                (mv, self.ln_base(&gamma, mv)?)
            }
        };
        let next_chol = state.chol.apply(&self.data, mv)?;
        let next = self.state_from(next_chol)?;
        let back = ModelGamma::reverse(mv);
        let ln_rev = match &next.scores {
            Some(scores) => {
                let idx = scores.position(back).expect("reverse move is a neighbor");
                self.ln_proposal(scores)?[idx]
            }
            None => self.ln_base(next.gamma(), back)?,
        };
        let ln_ratio = next.ln_post + ln_rev - state.ln_post - ln_fwd;
        let accepted = ln_ratio >= 0.0 || rng.random::<f64>().ln() < ln_ratio;
        let step = VsStep { proposed: mv, accepted, ln_ratio };
        Ok((if accepted { next } else { state }, step))
    }
}

fn categorical(ln_p: &[f64], rng: &mut dyn RngCore) -> usize {
    let total = log_sum_exp(ln_p);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, v) in ln_p.iter().enumerate() {
        acc += (v - total).exp();
        if u < acc {
            return i;
        }
    }
    ln_p.iter().rposition(|v| v.is_finite()).unwrap_or(ln_p.len() - 1)
}

/// Models visited by a chain and their log posteriors; index 0 is the
/// starting model.
#[derive(Debug, Clone, Default)]
pub struct VsTrace {
    pub models: Vec<ModelGamma>,
    pub ln_post: Vec<f64>,
    pub accepted: Vec<bool>,
}

impl VsTrace {
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// Runs `n` transitions from `start`.
pub fn run_vs_chain(sampler: &VsSampler, start: &ModelGamma, n: usize, rng: &mut dyn RngCore) -> Result<VsTrace> {
    let mut state = sampler.init(start)?;
    let mut trace = VsTrace::default();
    trace.models.push(state.gamma().clone());
    trace.ln_post.push(state.ln_post());
    trace.accepted.push(false);
    for _ in 0..n {
        let (next, step) = sampler.step(state, rng)?;
        state = next;
        trace.models.push(state.gamma().clone());
        trace.ln_post.push(state.ln_post());
        trace.accepted.push(step.accepted);
    }
    Ok(trace)
}

/// All `2^p` models in bit order with their exact normalized posterior.
pub fn enumerate_posterior(data: &VsData) -> Result<Vec<(ModelGamma, f64)>> {
    let p = data.ncols();
    if p > MAX_ENUMERATION_P {
        return Err(Error::InvalidParameter(format!("enumeration limited to p <= {MAX_ENUMERATION_P}")));
    }
    let models: Vec<ModelGamma> = (0..1usize << p).map(|c| ModelGamma::from_bits(c, p)).collect();
    let ln: Vec<f64> = models.iter().map(|g| dense_log_marginal(data, g)).collect::<Result<_>>()?;
    let c = log_sum_exp(&ln);
    Ok(models.into_iter().zip(ln).map(|(g, l)| (g, (l - c).exp())).collect())
}

/// Exact marginal inclusion probabilities by enumeration.
pub fn exact_inclusion(data: &VsData) -> Result<Vec<f64>> {
    let mut mip = vec![0.0; data.ncols()];
    for (g, w) in enumerate_posterior(data)? {
        for j in g.indices() {
            mip[*j] += w;
        }
    }
    Ok(mip)
}

/// Transition matrix of the sampler over all `2^p` models, indexed by
/// [`ModelGamma::to_bits`], plus the exact posterior pmf.
pub fn exact_transition_matrix(sampler: &VsSampler) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let data = &sampler.data;
    let posterior = enumerate_posterior(data)?;
    let n = posterior.len();
    let mut proposals = Vec::with_capacity(n);
    let mut ln_post = Vec::with_capacity(n);
    for (g, _) in &posterior {
        let chol = CholState::from_model(data, g)?;
        let scores = score_neighborhood(data, &chol)?;
        ln_post.push(scores.current());
        proposals.push((sampler.ln_proposal(&scores)?, scores));
    }
    let mut mat = DMatrix::zeros(n, n);
    for x in 0..n {
        let (ln_phi, scores) = &proposals[x];
        let gamma = &posterior[x].0;
        for (i, mv) in scores.moves().iter().enumerate() {
            let y = gamma.apply(*mv).to_bits();
            let (back_phi, back_scores) = &proposals[y];
            let j = back_scores.position(ModelGamma::reverse(*mv)).expect("reverse move");
            let ln_ratio = ln_post[y] + back_phi[j] - ln_post[x] - ln_phi[i];
            mat[(x, y)] += ln_phi[i].exp() * ln_ratio.min(0.0).exp();
        }
        let off: f64 = mat.row(x).iter().sum();
        mat[(x, x)] = 1.0 - off;
    }
    Ok((mat, posterior.into_iter().map(|(_, w)| w).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn data(m: usize, p: usize, seed: u64) -> Arc<VsData> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(m, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z: Vec<f64> =
            (0..m).map(|i| 0.8 * x[(i, 0)] - 0.6 * x[(i, 2)] + rng.sample::<f64, _>(StandardNormal)).collect();
        Arc::new(VsData::new(x, &z, Some(1.0), Some(0.3)).unwrap())
    }

    #[test]
    fn exact_matrix_is_reversible_with_posterior_stationary() {
        let d = data(25, 5, 1);
        for kind in [RwKind::Symmetric, RwKind::ASYMMETRIC_DEFAULT] {
            let s = VsSampler::new(d.clone(), kind, 0.5).unwrap();
            let (p, pi) = exact_transition_matrix(&s).unwrap();
            for x in 0..pi.len() {
                assert!(p.row(x).iter().all(|v| *v >= -1e-15));
                for y in 0..pi.len() {
                    assert!((pi[x] * p[(x, y)] - pi[y] * p[(y, x)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_epsilon_matches_base_chain() {
        let d = data(25, 4, 2);
        let geo = VsSampler::new(d.clone(), RwKind::Symmetric, 0.0).unwrap();
        let (p, pi) = exact_transition_matrix(&geo).unwrap();
        for x in 0..16 {
            let g = ModelGamma::from_bits(x, 4);
            let lf = rw_proposal_pmf(RwKind::Symmetric, &g, 4).unwrap();
            for (mv, f) in super::super::model::neighborhood(&g, 4).zip(&lf) {
                let n = g.apply(mv);
                let y = n.to_bits();
                let back = geo.ln_base(&n, ModelGamma::reverse(mv)).unwrap();
                let want = f.exp() * (pi[y].ln() + back - pi[x].ln() - f).min(0.0).exp();
                assert!((p[(x, y)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chain_is_deterministic_per_seed() {
        let d = data(25, 6, 3);
        let s = VsSampler::new(d, RwKind::Symmetric, 0.5).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            run_vs_chain(&s, &ModelGamma::empty(), 200, &mut rng).unwrap().models
        };
        assert_eq!(run(7), run(7));
    }

    #[test]
    fn random_walk_path_runs_without_scores() {
        let d = data(25, 6, 4);
        let s = VsSampler::new(d, RwKind::ASYMMETRIC_DEFAULT, 0.0).unwrap();
        let st = s.init(&ModelGamma::empty()).unwrap();
        assert!(st.scores().is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tr = run_vs_chain(&s, &ModelGamma::empty(), 500, &mut rng).unwrap();
        assert_eq!(tr.len(), 501);
    }

    #[test]
    fn bad_epsilon_rejected() {
        assert!(VsSampler::new(data(10, 3, 5), RwKind::Symmetric, 1.5).is_err());
    }
}
