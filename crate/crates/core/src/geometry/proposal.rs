//! The geodesically perturbed mixture proposal.

use std::sync::{Arc, OnceLock};

use rand::{Rng, RngCore};

use super::affinity::{gaussian_affinity, importance_affinity_with, quadrature_affinity_with, Affinity};
use super::density::ConditionalDensity;
use super::grid::Grid;
use super::residual::{ln_mixture_term, sample_residual_with, DEFAULT_REJECTION_CAP};
use crate::error::{Error, Result};
use crate::numeric::{ensure_dim, log_sum_exp};

/// Directions `g_1..g_k` with selection weights `a`.
#[derive(Clone)]
pub struct DirectionSet {
    dirs: Vec<Arc<dyn ConditionalDensity>>,
    weights: Vec<f64>,
}

impl std::fmt::Debug for DirectionSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirectionSet").field("k", &self.dirs.len()).field("weights", &self.weights).finish()
    }
}

impl DirectionSet {
    pub fn new(dirs: Vec<Arc<dyn ConditionalDensity>>, weights: Vec<f64>) -> Result<Self> {
        if dirs.is_empty() {
            return Err(Error::InvalidParameter("direction set is empty".into()));
        }
        ensure_dim(dirs.len(), weights.len())?;
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("direction weights must form a probability vector".into()));
        }
        let d = dirs[0].dimension();
        for g in &dirs {
            ensure_dim(d, g.dimension())?;
        }
        Ok(Self { dirs, weights })
    }

    pub fn single(dir: Arc<dyn ConditionalDensity>) -> Self {
        Self { dirs: vec![dir], weights: vec![1.0] }
    }

    pub fn uniform(dirs: Vec<Arc<dyn ConditionalDensity>>) -> Result<Self> {
        let k = dirs.len().max(1);
        Self::new(dirs, vec![1.0 / k as f64; k])
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize) -> &Arc<dyn ConditionalDensity> {
        &self.dirs[i]
    }

    pub fn dim(&self) -> usize {
        self.dirs[0].dimension()
    }

    /// Index drawn according to the weights.
    pub fn pick(&self, rng: &mut dyn RngCore) -> usize {
        if self.dirs.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }
}

/// How `<sqrt f(.|x), sqrt g_i(.|x)>` is obtained at a state.
#[derive(Debug, Clone, PartialEq)]
pub enum AffinityMode {
    /// Both densities must be Gaussian at the state.
    ClosedForm,
    /// One-dimensional sinh-spaced grid centred at the state, with tail
    /// correction. Each anchor adds a second sinh grid there, for
    /// directions that sit far from the state.
    LocalQuadrature { half_width: f64, scale: f64, points: usize, anchors: Vec<f64> },
    /// Importance sampling from `f(.|x)`. Adds noise to the acceptance
    /// ratio, so the sample size should be generous.
    MonteCarlo { samples: usize },
    /// Precomputed values, one per direction.
    Fixed(Vec<f64>),
}

/// Default sample size for [`AffinityMode::MonteCarlo`].
pub const DEFAULT_MC_SAMPLES: usize = 1_000;

/// A draw from the geometric proposal.
#[derive(Debug, Clone)]
pub struct ProposalDraw {
    pub point: Vec<f64>,
    pub direction: usize,
    pub from_residual: bool,
    pub attempts: usize,
}

/// `phi_eps(y|x) = sum_i a_i [cos^2(eps theta_i) f(y|x) + sin^2(eps theta_i) h_i(y|x)]`.
///
/// Affinities are cached when `f` and every `g_i` ignore the state;
/// otherwise they are recomputed at each state.
pub struct GeometricProposal {
    base: Arc<dyn ConditionalDensity>,
    directions: DirectionSet,
    epsilon: f64,
    mode: AffinityMode,
    rejection_cap: usize,
    cache: OnceLock<Vec<Affinity>>,
}

impl std::fmt::Debug for GeometricProposal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeometricProposal")
            .field("directions", &self.directions)
            .field("epsilon", &self.epsilon)
            .field("mode", &self.mode)
            .finish()
    }
}

impl GeometricProposal {
    pub fn new(
        base: Arc<dyn ConditionalDensity>,
        directions: DirectionSet,
        epsilon: f64,
        mode: AffinityMode,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon {epsilon} outside [0, 1]")));
        }
        ensure_dim(base.dimension(), directions.dim())?;
        match &mode {
            AffinityMode::Fixed(v) => {
                ensure_dim(directions.len(), v.len())?;
                for a in v {
                    Affinity::supplied(*a)?;
                }
            }
            AffinityMode::LocalQuadrature { half_width, scale, points, anchors } => {
                ensure_dim(1, base.dimension())?;
                if anchors.iter().any(|a| !a.is_finite()) {
                    return Err(Error::InvalidParameter("quadrature anchors must be finite".into()));
                }
                Grid::sinh(0.0, *half_width, *scale, *points)?;
            }
            AffinityMode::MonteCarlo { samples } if *samples < 2 => {
                return Err(Error::InvalidParameter("Monte Carlo affinity needs at least 2 samples".into()));
            }
            _ => {}
        }
        Ok(Self { base, directions, epsilon, mode, rejection_cap: DEFAULT_REJECTION_CAP, cache: OnceLock::new() })
    }

    pub fn with_rejection_cap(mut self, cap: usize) -> Self {
        self.rejection_cap = cap.max(1);
        self
    }

    pub fn base(&self) -> &Arc<dyn ConditionalDensity> {
        &self.base
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.directions
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mode(&self) -> &AffinityMode {
        &self.mode
    }

    pub fn dim(&self) -> usize {
        self.base.dimension()
    }

    /// True when the affinities do not depend on the state.
    pub fn is_state_free(&self) -> bool {
        matches!(self.mode, AffinityMode::Fixed(_))
            || (self.base.is_state_free() && self.directions.dirs.iter().all(|g| g.is_state_free()))
    }

    /// Affinities of `f(.|x)` with each `g_i(.|x)`.
    pub fn affinities(&self, given: &[f64], rng: &mut dyn RngCore) -> Result<Vec<Affinity>> {
        if self.is_state_free() {
            if let Some(c) = self.cache.get() {
                return Ok(c.clone());
            }
        }
        let affs = (0..self.directions.len()).map(|i| self.affinity(i, given, rng)).collect::<Result<Vec<_>>>()?;
        if self.is_state_free() {
            let _ = self.cache.set(affs.clone());
        }
        Ok(affs)
    }

    fn affinity(&self, i: usize, given: &[f64], rng: &mut dyn RngCore) -> Result<Affinity> {
        let g = &self.directions.dirs[i];
        match &self.mode {
            AffinityMode::Fixed(v) => Affinity::supplied(v[i]),
            AffinityMode::ClosedForm => {
                let fa = self
                    .base
                    .gaussian_at(given)
                    .ok_or(Error::Capability("closed-form affinity needs a Gaussian base"))?;
                let ga =
                    g.gaussian_at(given).ok_or(Error::Capability("closed-form affinity needs Gaussian directions"))?;
                gaussian_affinity(&fa, &ga)
            }
            AffinityMode::LocalQuadrature { half_width, scale, points, anchors } => {
                let mut centers = vec![given[0]];
                centers.extend(anchors);
                let grid = Grid::sinh_union(&centers, *half_width, *scale, *points)?.with_tail_correction();
                quadrature_affinity_with(&grid, |y| self.base.ln_pdf_given(given, y), |y| g.ln_pdf_given(given, y))
            }
            AffinityMode::MonteCarlo { samples } => importance_affinity_with(
                *samples,
                rng,
                |r| self.base.sample_given(given, r),
                |y| self.base.ln_pdf_given(given, y),
                |y| g.ln_pdf_given(given, y),
            ),
        }
    }

    /// `ln phi_{i,eps}(y|x)` for one direction.
    pub fn ln_component_pdf(&self, i: usize, given: &[f64], y: &[f64], affs: &[Affinity]) -> f64 {
        let lf = self.base.ln_pdf_given(given, y);
        if self.epsilon == 0.0 {
            return lf;
        }
        let lg = self.directions.dirs[i].ln_pdf_given(given, y);
        ln_mixture_term(lf, lg, &affs[i], self.epsilon)
    }

    /// `ln phi_eps(y|x)`.
    pub fn ln_pdf(&self, given: &[f64], y: &[f64], affs: &[Affinity]) -> f64 {
        let lf = self.base.ln_pdf_given(given, y);
        if self.epsilon == 0.0 || lf.is_nan() {
            return lf;
        }
        let terms: Vec<f64> = self
            .directions
            .weights
            .iter()
            .enumerate()
            .filter(|(_, a)| **a > 0.0)
            .map(|(i, a)| {
                let lg = self.directions.dirs[i].ln_pdf_given(given, y);
                a.ln() + ln_mixture_term(lf, lg, &affs[i], self.epsilon)
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Draws `i ~ a`, then `y ~ phi_{i,eps}(.|x)`.
    pub fn sample(&self, given: &[f64], affs: &[Affinity], rng: &mut dyn RngCore) -> Result<ProposalDraw> {
        let i = self.directions.pick(rng);
        self.sample_component(i, given, affs, rng)
    }

    /// `y ~ phi_{i,eps}(.|x)`: a draw from `f` with probability
    /// `cos^2(eps theta_i)`, otherwise from the residual `h_i`.
    pub fn sample_component(
        &self,
        i: usize,
        given: &[f64],
        affs: &[Affinity],
        rng: &mut dyn RngCore,
    ) -> Result<ProposalDraw> {
        let aff = &affs[i];
        let w = aff.residual_weight(self.epsilon);
        if w == 0.0 || rng.random::<f64>() >= w {
            let point = self.base.sample_given(given, rng).ok_or(Error::Capability("sampler for base kernel"))?;
            return Ok(ProposalDraw { point, direction: i, from_residual: false, attempts: 1 });
        }
        let g = &self.directions.dirs[i];
        let draw = sample_residual_with(
            aff.value(),
            self.rejection_cap,
            rng,
            |r| self.base.sample_given(given, r),
            |r| g.sample_given(given, r),
            |y| self.base.ln_pdf_given(given, y),
            |y| g.ln_pdf_given(given, y),
        )?;
        Ok(ProposalDraw { point: draw.point, direction: i, from_residual: true, attempts: draw.attempts })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::density::Gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_one(eps: f64) -> GeometricProposal {
        let f: Arc<dyn ConditionalDensity> = Arc::new(Gaussian::univariate(1.0, 1.0).unwrap());
        let g: Arc<dyn ConditionalDensity> = Arc::new(Gaussian::univariate(0.0, 1.0).unwrap());
        GeometricProposal::new(f, DirectionSet::single(g), eps, AffinityMode::ClosedForm).unwrap()
    }

    #[test]
    fn zero_step_is_base() {
        let p = example_one(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let affs = p.affinities(&[0.0], &mut rng).unwrap();
        let f = Gaussian::univariate(1.0, 1.0).unwrap();
        for y in [-3.0, 0.0, 2.2] {
            assert_eq!(p.ln_pdf(&[0.0], &[y], &affs), crate::geometry::Density::ln_pdf(&f, &[y]));
        }
    }

    #[test]
    fn epsilon_out_of_range_rejected() {
        let f: Arc<dyn ConditionalDensity> = Arc::new(Gaussian::univariate(1.0, 1.0).unwrap());
        let r = GeometricProposal::new(f.clone(), DirectionSet::single(f), 1.5, AffinityMode::ClosedForm);
        assert!(r.is_err());
    }

    #[test]
    fn weights_must_sum_to_one() {
        let f: Arc<dyn ConditionalDensity> = Arc::new(Gaussian::univariate(1.0, 1.0).unwrap());
        assert!(DirectionSet::new(vec![f.clone(), f], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn state_free_affinities_are_cached() {
        let p = example_one(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = p.affinities(&[0.0], &mut rng).unwrap();
        let b = p.affinities(&[7.0], &mut rng).unwrap();
        assert_eq!(a, b);
        assert!((a[0].residual_weight(0.5) - 0.0588).abs() < 1e-4);
    }

    #[test]
    fn anchored_quadrature_matches_closed_form_far_from_direction() {
        let f: Arc<dyn ConditionalDensity> = Arc::new(crate::kernels::RandomWalk::isotropic(1, 1.0).unwrap());
        let g: Arc<dyn ConditionalDensity> = Arc::new(Gaussian::univariate(0.0, 4.0).unwrap());
        let quad = |anchors: Vec<f64>| {
            let mode = AffinityMode::LocalQuadrature { half_width: 1e4, scale: 1.0, points: 801, anchors };
            GeometricProposal::new(f.clone(), DirectionSet::single(g.clone()), 0.5, mode).unwrap()
        };
        let exact =
            GeometricProposal::new(f.clone(), DirectionSet::single(g.clone()), 0.5, AffinityMode::ClosedForm).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [300.0];
        let a = quad(vec![0.0]).affinities(&x, &mut rng).unwrap()[0].value();
        let b = exact.affinities(&x, &mut rng).unwrap()[0].value();
        assert!((a - b).abs() < 1e-12 + 1e-6 * b, "{a} vs {b}");
        assert!(matches!(quad(vec![]).affinities(&x, &mut rng), Err(Error::Coverage { .. })));
    }
}
