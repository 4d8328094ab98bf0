//! Discrete analogues: affinities and geometric mixtures of pmfs.

use super::affinity::{Affinity, AffinitySource};
use super::residual::{ln_mixture_term, ln_residual};
use crate::error::{Error, Result};
use crate::numeric::ensure_dim;

/// Exact `sum sqrt(f g)` over a shared finite support.
pub fn pmf_affinity(f: &[f64], g: &[f64]) -> Result<Affinity> {
    ensure_dim(f.len(), g.len())?;
    if f.iter().chain(g).any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidParameter("pmf has negative or NaN mass".into()));
    }
    let s: f64 = f.iter().zip(g).map(|(a, b)| (a * b).sqrt()).sum();
    Affinity::new(s, AffinitySource::Exact)
}

/// [`pmf_affinity`] from log masses.
pub fn ln_pmf_affinity(ln_f: &[f64], ln_g: &[f64]) -> Result<Affinity> {
    ensure_dim(ln_f.len(), ln_g.len())?;
    let s: f64 = ln_f.iter().zip(ln_g).map(|(a, b)| (0.5 * (a + b)).exp()).sum();
    Affinity::new(s, AffinitySource::Exact)
}

/// Residual pmf `(sqrt g - c sqrt f)^2 / (1 - c^2)`.
pub fn residual_pmf(f: &[f64], g: &[f64], aff: &Affinity) -> Result<Vec<f64>> {
    ensure_dim(f.len(), g.len())?;
    if aff.is_degenerate() {
        return Err(Error::DegenerateDirection(aff.value()));
    }
    let c = aff.value();
    Ok(f.iter().zip(g).map(|(a, b)| (b.sqrt() - c * a.sqrt()).powi(2) / (1.0 - c * c)).collect())
}

/// Log residual pmf from log masses.
pub fn ln_residual_pmf(ln_f: &[f64], ln_g: &[f64], aff: &Affinity) -> Result<Vec<f64>> {
    ensure_dim(ln_f.len(), ln_g.len())?;
    if aff.is_degenerate() {
        return Err(Error::DegenerateDirection(aff.value()));
    }
    Ok(ln_f.iter().zip(ln_g).map(|(a, b)| ln_residual(*a, *b, aff.value())).collect())
}

/// `cos^2(eps theta) f + sin^2(eps theta) h`, or `f` when degenerate.
pub fn geometric_mixture_pmf(f: &[f64], g: &[f64], aff: &Affinity, epsilon: f64) -> Result<Vec<f64>> {
    ensure_dim(f.len(), g.len())?;
    let w = aff.residual_weight(epsilon);
    if w == 0.0 {
        return Ok(f.to_vec());
    }
    let h = residual_pmf(f, g, aff)?;
    let cos2 = (epsilon * aff.angle()).cos().powi(2);
    Ok(f.iter().zip(&h).map(|(a, b)| cos2 * a + w * b).collect())
}

/// Log of [`geometric_mixture_pmf`] from log masses.
pub fn ln_geometric_mixture(ln_f: &[f64], ln_g: &[f64], aff: &Affinity, epsilon: f64) -> Result<Vec<f64>> {
    ensure_dim(ln_f.len(), ln_g.len())?;
    Ok(ln_f.iter().zip(ln_g).map(|(a, b)| ln_mixture_term(*a, *b, aff, epsilon)).collect())
}

/// Exact perturbation `(cos(eps theta) sqrt f + sin(eps theta) zeta)^2`.
pub fn exact_perturbed_pmf(f: &[f64], g: &[f64], aff: &Affinity, epsilon: f64) -> Result<Vec<f64>> {
    ensure_dim(f.len(), g.len())?;
    if aff.is_degenerate() {
        return Err(Error::DegenerateDirection(aff.value()));
    }
    let c = aff.value();
    let (s, co) = (epsilon * aff.angle()).sin_cos();
    let k = (1.0 - c * c).sqrt();
    Ok(f.iter()
        .zip(g)
        .map(|(a, b)| {
            let zeta = (b.sqrt() - c * a.sqrt()) / k;
            (co * a.sqrt() + s * zeta).powi(2)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_pmfs_have_unit_affinity() {
        let f = [0.2, 0.3, 0.5];
        assert!((pmf_affinity(&f, &f).unwrap().value() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_pmfs_are_orthogonal() {
        let a = pmf_affinity(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(a.value(), 0.0);
        assert!((a.angle() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn support_mismatch_is_an_error() {
        assert!(pmf_affinity(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn residual_and_mixture_sum_to_one() {
        let f = [0.1, 0.2, 0.3, 0.4];
        let g = [0.4, 0.4, 0.1, 0.1];
        let aff = pmf_affinity(&f, &g).unwrap();
        let h = residual_pmf(&f, &g, &aff).unwrap();
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for eps in [0.0, 0.3, 1.0] {
            let m = geometric_mixture_pmf(&f, &g, &aff, eps).unwrap();
            assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let end = exact_perturbed_pmf(&f, &g, &aff, 1.0).unwrap();
        for (a, b) in end.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
