//! Neighborhood scoring and the proposal pmfs on model space.

use serde::{Deserialize, Serialize};

use super::chol::{extend, ln_marginal_terms, log_marginal, CholState};
use super::data::VsData;
use super::model::{class_sizes, neighborhood, ModelGamma, Move, MoveClass};
use crate::error::{Error, Result};
use crate::geometry::finite::ln_pmf_affinity;
use crate::geometry::Affinity;
use crate::numeric::log_sum_exp;

/// Log marginal posterior of every neighbor, in [`neighborhood`] order.
#[derive(Debug, Clone)]
pub struct NeighborhoodScores {
    gamma: ModelGamma,
    p: usize,
    moves: Vec<Move>,
    scores: Vec<f64>,
    current: f64,
    solves: usize,
}

impl NeighborhoodScores {
    pub fn gamma(&self) -> &ModelGamma {
        &self.gamma
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Score of the model itself.
    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// Triangular solves spent on candidates; one per addition or swap.
    pub fn triangular_solves(&self) -> usize {
        self.solves
    }

    pub fn position(&self, mv: Move) -> Option<usize> {
        let (na, nd, _) = class_sizes(self.gamma.len(), self.p);
        let outside_rank = |j: usize| j - self.gamma.indices().partition_point(|k| *k < j);
        let inside_rank = |j: usize| self.gamma.indices().binary_search(&j).ok();
        if !self.gamma.is_legal(mv, self.p) {
            return None;
        }
        Some(match mv {
            Move::Add(j) => outside_rank(j),
            Move::Delete(j) => na + inside_rank(j)?,
            Move::Swap { out, into } => na + nd + inside_rank(out)? * na + outside_rank(into),
        })
    }
}

/// Scores the whole neighborhood of `chol`'s model. Shared work is one
/// pass of `W_γᵀW`; each addition costs one triangular solve, each deletion
/// one Givens downdate, and swaps reuse the downdated factor.
pub fn score_neighborhood(data: &VsData, chol: &CholState) -> Result<NeighborhoodScores> {
    let gamma = chol.gamma().clone();
    let p = data.ncols();
    let k = gamma.len();
    let lambda = data.lambda();
    let cross: Vec<Vec<f64>> = chol.order().iter().map(|o| data.cross(data.column(*o).as_slice())).collect();
    let outside: Vec<usize> = (0..p).filter(|j| !gamma.contains(*j)).collect();
    let (na, nd, ns) = class_sizes(k, p);
    let mut moves = Vec::with_capacity(na + nd + ns);
    let mut scores = Vec::with_capacity(na + nd + ns);
    let mut solves = 0;
    let fallback = |mv: Move| -> Result<f64> {
        log::warn!("incremental score failed for {mv:?} from {}; refactorizing", chol.gamma());
        Ok(log_marginal(data, &chol.apply(data, mv)?))
    };

    for &j in &outside {
        let col: Vec<f64> = cross.iter().map(|c| c[j]).collect();
        solves += 1;
        let s = match chol.extend_with(&col, data.gram(j, j), data.wtz(j), lambda) {
            Some(e) if chol.resid() - e.v_new * e.v_new > 0.0 => {
                ln_marginal_terms(data, k + 1, chol.ln_det() + 2.0 * e.pivot.ln(), chol.resid() - e.v_new * e.v_new)
            }
            _ => fallback(Move::Add(j))?,
        };
        moves.push(Move::Add(j));
        scores.push(s);
    }

    let mut downdated = Vec::with_capacity(k);
    for &j in gamma.indices() {
        let pos = chol.order().iter().position(|o| *o == j).expect("model index in factor");
        let (u, v, dropped) = chol.downdate(pos);
        let ln_det = 2.0 * u.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let resid = chol.resid() + dropped * dropped;
        scores.push(ln_marginal_terms(data, k - 1, ln_det, resid));
        moves.push(Move::Delete(j));
        downdated.push((pos, u, v, ln_det, resid));
    }

    for ((pos, u, v, ln_det, resid), &o) in downdated.iter().zip(gamma.indices()) {
        for &j in &outside {
            let col: Vec<f64> = cross.iter().enumerate().filter(|(r, _)| r != pos).map(|(_, c)| c[j]).collect();
            solves += 1;
            let mv = Move::Swap { out: o, into: j };
            let s = match extend(u, v, &col, data.gram(j, j), data.wtz(j), lambda) {
                Some(e) if resid - e.v_new * e.v_new > 0.0 => {
                    ln_marginal_terms(data, k, ln_det + 2.0 * e.pivot.ln(), resid - e.v_new * e.v_new)
                }
                _ => fallback(mv)?,
            };
            moves.push(mv);
            scores.push(s);
        }
    }

    Ok(NeighborhoodScores { gamma, p, moves, scores, current: log_marginal(data, chol), solves })
}

/// Base random-walk proposal on model space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RwKind {
    /// `b⁺ = (p-|γ|)/2p`, `b⁻ = |γ|/2p`, `b° = 1/2`.
    Symmetric,
    /// Constant class weights.
    Asymmetric { add: f64, delete: f64, swap: f64 },
}

impl RwKind {
    pub const ASYMMETRIC_DEFAULT: RwKind = RwKind::Asymmetric { add: 0.4, delete: 0.4, swap: 0.2 };

    pub fn validate(&self) -> Result<()> {
        if let RwKind::Asymmetric { add, delete, swap } = *self {
            let ok = [add, delete, swap].iter().all(|b| *b >= 0.0 && b.is_finite());
            if !ok || ((add + delete + swap) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter("class weights must be nonnegative and sum to 1".into()));
            }
        }
        Ok(())
    }

    /// Class weights at a model of size `k`, with the mass of empty classes
    /// spread proportionally over the others.
    pub fn class_weights(&self, k: usize, p: usize) -> Result<(f64, f64, f64)> {
        let (add, delete, swap) = match *self {
            RwKind::Symmetric => {
                let pf = p as f64;
                ((p - k) as f64 / (2.0 * pf), k as f64 / (2.0 * pf), 0.5)
            }
            RwKind::Asymmetric { add, delete, swap } => (add, delete, swap),
        };
        let (na, nd, ns) = class_sizes(k, p);
        let keep = |b: f64, n: usize| if n == 0 { 0.0 } else { b };
        let (a, d, s) = (keep(add, na), keep(delete, nd), keep(swap, ns));
        let total = a + d + s;
        if !(total > 0.0) {
            return Err(Error::DegenerateSupport(format!("no proposal mass on the neighborhood of a size-{k} model")));
        }
        Ok((a / total, d / total, s / total))
    }

    /// `log f(γ'|γ)` for a neighbor reached through `class`.
    pub fn ln_pmf(&self, class: MoveClass, k: usize, p: usize) -> Result<f64> {
        let (a, d, s) = self.class_weights(k, p)?;
        let (na, nd, ns) = class_sizes(k, p);
        let (b, n) = match class {
            MoveClass::Addition => (a, na),
            MoveClass::Deletion => (d, nd),
            MoveClass::Swap => (s, ns),
        };
        Ok(if n == 0 || b == 0.0 { f64::NEG_INFINITY } else { (b / n as f64).ln() })
    }
}

/// `log f` over the neighborhood of `gamma`, in [`neighborhood`] order.
pub fn rw_proposal_pmf(kind: RwKind, gamma: &ModelGamma, p: usize) -> Result<Vec<f64>> {
    kind.validate()?;
    let k = gamma.len();
    let per_class = [
        kind.ln_pmf(MoveClass::Addition, k, p)?,
        kind.ln_pmf(MoveClass::Deletion, k, p)?,
        kind.ln_pmf(MoveClass::Swap, k, p)?,
    ];
    Ok(neighborhood(gamma, p)
        .map(|mv| match mv.class() {
            MoveClass::Addition => per_class[0],
            MoveClass::Deletion => per_class[1],
            MoveClass::Swap => per_class[2],
        })
        .collect())
}

/// `log g`: the neighbors' posterior scores normalized over the
/// neighborhood.
pub fn informed_g_pmf(scores: &NeighborhoodScores) -> Result<Vec<f64>> {
    let c = log_sum_exp(&scores.scores);
    if !c.is_finite() {
        return Err(Error::DegenerateSupport("every neighbor has zero posterior mass".into()));
    }
    Ok(scores.scores.iter().map(|s| s - c).collect())
}

/// Exact affinity of two log pmfs on the same neighborhood.
pub fn neighborhood_affinity(ln_f: &[f64], ln_g: &[f64]) -> Result<Affinity> {
    ln_pmf_affinity(ln_f, ln_g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::varsel::chol::dense_log_marginal;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn data(m: usize, p: usize, seed: u64) -> VsData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(m, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z: Vec<f64> = (0..m).map(|i| 2.0 * x[(i, 1)] + rng.sample::<f64, _>(StandardNormal)).collect();
        VsData::new(x, &z, Some(0.5), Some(0.3)).unwrap()
    }

    #[test]
    fn scores_match_dense_oracle() {
        let d = data(30, 7, 1);
        let g = ModelGamma::new(vec![1, 4, 5], 7).unwrap();
        let ch = CholState::from_model(&d, &g).unwrap();
        let sc = score_neighborhood(&d, &ch).unwrap();
        assert_eq!(sc.len(), 4 + 3 + 12);
        for (mv, s) in sc.moves().iter().zip(sc.scores()) {
            let want = dense_log_marginal(&d, &g.apply(*mv)).unwrap();
            assert!((s - want).abs() < 1e-9, "{mv:?}");
        }
        for (i, mv) in sc.moves().iter().enumerate() {
            assert_eq!(sc.position(*mv), Some(i));
        }
    }

    #[test]
    fn asymmetric_interior_split() {
        let lf = rw_proposal_pmf(RwKind::ASYMMETRIC_DEFAULT, &ModelGamma::new(vec![0, 3], 6).unwrap(), 6).unwrap();
        assert!((lf[0].exp() - 0.1).abs() < 1e-15);
        assert!((lf[4].exp() - 0.2).abs() < 1e-15);
        assert!((lf[6].exp() - 0.025).abs() < 1e-15);
        let total: f64 = lf.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_model_mass_goes_to_additions() {
        for kind in [RwKind::Symmetric, RwKind::ASYMMETRIC_DEFAULT] {
            let lf = rw_proposal_pmf(kind, &ModelGamma::empty(), 5).unwrap();
            assert!(lf.iter().all(|v| (v.exp() - 0.2).abs() < 1e-15));
        }
    }

    #[test]
    fn symmetric_kind_is_symmetric_on_interior_pairs() {
        let p = 6;
        for code in 1..(1 << p) - 1 {
            let g = ModelGamma::from_bits(code, p);
            let lf = rw_proposal_pmf(RwKind::Symmetric, &g, p).unwrap();
            for (mv, v) in neighborhood(&g, p).zip(&lf) {
                let n = g.apply(mv);
                if n.is_empty() || n.len() == p {
                    continue;
                }
                let back = rw_proposal_pmf(RwKind::Symmetric, &n, p).unwrap();
                let idx = neighborhood(&n, p).position(|m| m == ModelGamma::reverse(mv)).unwrap();
                assert!((v - back[idx]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dominant_neighbor_takes_all_g_mass() {
        let d = data(30, 5, 2);
        let ch = CholState::null(&d);
        let mut sc = score_neighborhood(&d, &ch).unwrap();
        sc.scores = vec![0.0, -50.0, -50.0, -50.0, -50.0];
        let g = informed_g_pmf(&sc).unwrap();
        assert!(g[0].exp() >= 1.0 - 1e-20);
        sc.scores = vec![1.0; 5];
        assert!(informed_g_pmf(&sc).unwrap().iter().all(|v| (v.exp() - 0.2).abs() < 1e-15));
        sc.scores = vec![f64::NEG_INFINITY; 5];
        assert!(informed_g_pmf(&sc).is_err());
    }

    #[test]
    fn affinity_of_identical_and_disjoint() {
        let f = vec![0.25f64.ln(); 4];
        assert!((neighborhood_affinity(&f, &f).unwrap().value() - 1.0).abs() < 1e-15);
        let a = vec![0.0, f64::NEG_INFINITY];
        let b = vec![f64::NEG_INFINITY, 0.0];
        let aff = neighborhood_affinity(&a, &b).unwrap();
        assert!(aff.value().abs() < 1e-15);
        assert!(neighborhood_affinity(&a, &f).is_err());
    }

    #[test]
    fn hand_affinity_p4() {
        let f = [0.4f64, 0.4, 0.1, 0.1];
        let g = [0.1f64, 0.2, 0.3, 0.4];
        let want: f64 = f.iter().zip(&g).map(|(a, b)| (a * b).sqrt()).sum();
        let lf: Vec<f64> = f.iter().map(|v| v.ln()).collect();
        let lg: Vec<f64> = g.iter().map(|v| v.ln()).collect();
        assert!((neighborhood_affinity(&lf, &lg).unwrap().value() - want).abs() < 1e-14);
    }
}
