//! The residual density `h = (sqrt g - c sqrt f)^2 / (1 - c^2)` and the
//! exact geodesic perturbation of `f` toward `g`.

use std::sync::Arc;

use rand::{Rng, RngCore};

use super::affinity::Affinity;
use super::density::{Density, Support};
use crate::error::{Error, Result};
use crate::numeric::{ensure_dim, log_add_exp};

/// Default cap on rejection attempts per draw.
pub const DEFAULT_REJECTION_CAP: usize = 1_000_000;

/// `ln h` from `ln f`, `ln g` and the affinity value `c < 1`, without
/// forming `sqrt f` or `sqrt g` directly.
pub fn ln_residual(lf: f64, lg: f64, c: f64) -> f64 {
    let ln_norm = (1.0 - c * c).ln();
    if lf == f64::NEG_INFINITY {
        return lg - ln_norm;
    }
    if lg == f64::NEG_INFINITY {
        return lf + 2.0 * c.ln() - ln_norm;
    }
    let r = 0.5 * (lf - lg);
    if r < 0.0 {
        lg + 2.0 * (1.0 - c * r.exp()).abs().ln() - ln_norm
    } else {
        lf + 2.0 * ((-r).exp() - c).abs().ln() - ln_norm
    }
}

/// Log acceptance probability `(sqrt g - c sqrt f)^2 / (g + c^2 f)` of the
/// residual rejection sampler at a point with log densities `lf`, `lg`.
pub fn ln_residual_acceptance(lf: f64, lg: f64, c: f64) -> f64 {
    if lf == f64::NEG_INFINITY {
        return 0.0;
    }
    if lg == f64::NEG_INFINITY {
        // h = c^2 f / (1 - c^2) here, matching the envelope exactly
        return if c > 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let r = 0.5 * (lf - lg);
    if r < 0.0 {
        let e = r.exp();
        2.0 * (1.0 - c * e).abs().ln() - (c * c * e * e).ln_1p()
    } else {
        let e = (-r).exp();
        2.0 * (e - c).abs().ln() - log_add_exp(2.0 * (-r), 2.0 * c.ln())
    }
}

/// One residual draw together with the number of envelope proposals used.
#[derive(Debug, Clone)]
pub struct ResidualDraw {
    pub point: Vec<f64>,
    pub attempts: usize,
}

/// Rejection sampler for `h` with envelope `(g + c^2 f) / (1 + c^2)` and
/// bound `(1 + c^2) / (1 - c^2)`. `draw_f`/`draw_g` produce exact draws,
/// `ln_f`/`ln_g` evaluate the densities.
pub fn sample_residual_with(
    c: f64,
    cap: usize,
    rng: &mut dyn RngCore,
    mut draw_f: impl FnMut(&mut dyn RngCore) -> Option<Vec<f64>>,
    mut draw_g: impl FnMut(&mut dyn RngCore) -> Option<Vec<f64>>,
    ln_f: impl Fn(&[f64]) -> f64,
    ln_g: impl Fn(&[f64]) -> f64,
) -> Result<ResidualDraw> {
    let c2 = c * c;
    let p_from_g = 1.0 / (1.0 + c2);
    for attempts in 1..=cap {
        let y = if rng.random::<f64>() < p_from_g {
            draw_g(rng).ok_or(Error::Capability("sampler for direction density"))?
        } else {
            draw_f(rng).ok_or(Error::Capability("sampler for base density"))?
        };
        let la = ln_residual_acceptance(ln_f(&y), ln_g(&y), c);
        if la.is_nan() {
            continue;
        }
        if rng.random::<f64>().ln() < la {
            return Ok(ResidualDraw { point: y, attempts });
        }
    }
    Err(Error::EnvelopeFailure(cap))
}

fn check_affinity(aff: &Affinity) -> Result<f64> {
    if aff.is_degenerate() {
        Err(Error::DegenerateDirection(aff.value()))
    } else {
        Ok(aff.value())
    }
}

/// The residual density of a pair of state-free densities.
pub struct ResidualDensity {
    f: Arc<dyn Density>,
    g: Arc<dyn Density>,
    aff: Affinity,
    cap: usize,
}

impl std::fmt::Debug for ResidualDensity {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        out.debug_struct("ResidualDensity").field("affinity", &self.aff).field("cap", &self.cap).finish()
    }
}

/// Builds `h` for `f`, `g` and their affinity. Fails when the affinity is
/// numerically 1, in which case callers fall back to `f`.
pub fn residual_density_h(f: Arc<dyn Density>, g: Arc<dyn Density>, aff: Affinity) -> Result<ResidualDensity> {
    ensure_dim(f.dim(), g.dim())?;
    check_affinity(&aff)?;
    Ok(ResidualDensity { f, g, aff, cap: DEFAULT_REJECTION_CAP })
}

impl ResidualDensity {
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn affinity(&self) -> &Affinity {
        &self.aff
    }

    pub fn envelope_bound(&self) -> f64 {
        self.aff.envelope_bound()
    }

    pub fn draw(&self, rng: &mut dyn RngCore) -> Result<ResidualDraw> {
        sample_residual_with(
            self.aff.value(),
            self.cap,
            rng,
            |r| self.f.sample(r),
            |r| self.g.sample(r),
            |y| self.f.ln_pdf(y),
            |y| self.g.ln_pdf(y),
        )
    }
}

impl Density for ResidualDensity {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        ln_residual(self.f.ln_pdf(x), self.g.ln_pdf(x), self.aff.value())
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        self.draw(rng).ok().map(|d| d.point)
    }

    fn support(&self) -> Support {
        self.g.support()
    }
}

/// Draws from `h` for state-free `f`, `g`.
pub fn sample_residual_h(
    f: &dyn Density,
    g: &dyn Density,
    aff: &Affinity,
    cap: usize,
    rng: &mut dyn RngCore,
) -> Result<ResidualDraw> {
    let c = check_affinity(aff)?;
    sample_residual_with(c, cap, rng, |r| f.sample(r), |r| g.sample(r), |y| f.ln_pdf(y), |y| g.ln_pdf(y))
}

/// Density of `(cos(eps theta) sqrt f + sin(eps theta) zeta)^2` at a point,
/// the exact geodesic perturbation including the cross term.
pub fn exact_perturbed_pdf(lf: f64, lg: f64, aff: &Affinity, epsilon: f64) -> Result<f64> {
    let c = check_affinity(aff)?;
    let (s, co) = (epsilon * aff.angle()).sin_cos();
    let rf = (0.5 * lf).exp();
    let rg = (0.5 * lg).exp();
    let zeta = (rg - c * rf) / (1.0 - c * c).sqrt();
    Ok((co * rf + s * zeta).powi(2))
}

/// The cross term `sin(2 eps theta) sqrt f zeta` dropped by the mixture
/// proposal.
pub fn perturbation_cross_term(lf: f64, lg: f64, aff: &Affinity, epsilon: f64) -> Result<f64> {
    let c = check_affinity(aff)?;
    let rf = (0.5 * lf).exp();
    let rg = (0.5 * lg).exp();
    let zeta = (rg - c * rf) / (1.0 - c * c).sqrt();
    Ok((2.0 * epsilon * aff.angle()).sin() * rf * zeta)
}

/// `ln[cos^2(eps theta) f + sin^2(eps theta) h]`, falling back to `ln f`
/// for degenerate affinities.
pub fn ln_mixture_term(lf: f64, lg: f64, aff: &Affinity, epsilon: f64) -> f64 {
    let w = aff.residual_weight(epsilon);
    if w == 0.0 {
        return lf;
    }
    let lh = ln_residual(lf, lg, aff.value());
    let cos2 = (epsilon * aff.angle()).cos().powi(2);
    log_add_exp(cos2.ln() + lf, w.ln() + lh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_h(f: f64, g: f64, c: f64) -> f64 {
        (g.sqrt() - c * f.sqrt()).powi(2) / (1.0 - c * c)
    }

    #[test]
    fn stable_log_residual_matches_naive() {
        for &(f, g) in &[(0.3, 0.1), (0.01, 0.5), (1e-8, 2.0), (0.2, 0.2), (4.0, 1e-6)] {
            for &c in &[0.0, 0.3, 0.88, 0.99] {
                let lh = ln_residual(f64::ln(f), f64::ln(g), c);
                let want = naive_h(f, g, c);
                assert!((lh.exp() - want).abs() <= 1e-12 * want.max(1.0), "f={f} g={g} c={c}");
            }
        }
    }

    #[test]
    fn acceptance_matches_naive() {
        for &(f, g) in &[(0.3f64, 0.1f64), (0.01, 0.5), (0.2, 0.2)] {
            for &c in &[0.1, 0.7] {
                let want = (g.sqrt() - c * f.sqrt()).powi(2) / (g + c * c * f);
                let got = ln_residual_acceptance(f64::ln(f), f64::ln(g), c).exp();
                assert!((got - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn orthogonal_limit_gives_g() {
        let lh = ln_residual(-1.0, -2.0, 0.0);
        assert!((lh + 2.0).abs() < 1e-15);
    }

    #[test]
    fn mixture_term_at_zero_step_is_f() {
        let a = Affinity::supplied(0.7).unwrap();
        assert_eq!(ln_mixture_term(-1.3, -0.2, &a, 0.0), -1.3);
    }

    #[test]
    fn degenerate_affinity_is_refused() {
        let a = Affinity::supplied(1.0).unwrap();
        assert!(matches!(exact_perturbed_pdf(0.0, 0.0, &a, 0.5), Err(Error::DegenerateDirection(_))));
        assert_eq!(ln_mixture_term(-0.5, -3.0, &a, 0.5), -0.5);
    }
}
