//! A two-dimensional target on `[-10, 10]^2` whose modes sit between the
//! poles of `csc x2`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Density, Support};
use crate::kernels::Target;

pub const SIX_MODE_BOUND: f64 = 10.0;

/// `psi(x1, x2) ∝ exp(-x1^2/2) exp(-(csc^5 x2 - x1)^2 / 2)` on the box.
/// Exact poles of `csc` carry log density `-inf`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SixModeTarget;

fn in_box(v: f64) -> bool {
    (-SIX_MODE_BOUND..=SIX_MODE_BOUND).contains(&v)
}

/// Unnormalized log density.
pub fn six_mode_ln(x1: f64, x2: f64) -> f64 {
    if !in_box(x1) || !in_box(x2) {
        return f64::NEG_INFINITY;
    }
    let s = x2.sin();
    if s == 0.0 {
        return f64::NEG_INFINITY;
    }
    let c5 = s.recip().powi(5);
    let v = -0.5 * x1 * x1 - 0.5 * (c5 - x1) * (c5 - x1);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

impl SixModeTarget {
    /// Basin label `0..6` of a state: the interval `(k pi, (k+1) pi)`,
    /// `k = -3..=2`, holding `x2`. The thin strips beyond `±3 pi` join the
    /// outermost basins.
    pub fn basin(x2: f64) -> usize {
        (((x2 / PI).floor() as i64).clamp(-3, 2) + 3) as usize
    }

    pub fn box_support() -> Support {
        Support::Box { lower: vec![-SIX_MODE_BOUND; 2], upper: vec![SIX_MODE_BOUND; 2] }
    }
}

impl Target for SixModeTarget {
    fn dim(&self) -> usize {
        2
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        six_mode_ln(x[0], x[1])
    }

    fn support(&self) -> Support {
        Self::box_support()
    }
}

/// One full conditional of [`SixModeTarget`] as an unnormalized 1-D
/// density on `[-10, 10]`.
#[derive(Debug, Clone, Copy)]
pub struct SixModeConditional {
    axis: usize,
    fixed: f64,
}

/// Conditional along `axis` (0 for `x1`, 1 for `x2`) with the other
/// coordinate held at `fixed`.
pub fn sixmode_conditional(axis: usize, fixed: f64) -> Result<SixModeConditional> {
    if axis > 1 {
        return Err(Error::InvalidParameter(format!("axis {axis} not in {{0, 1}}")));
    }
    if !in_box(fixed) {
        return Err(Error::InvalidParameter(format!("fixed value {fixed} outside the box")));
    }
    if axis == 0 && fixed.sin() == 0.0 {
        return Err(Error::DegenerateSupport(format!("x2 = {fixed} is a pole; the conditional of x1 vanishes")));
    }
    Ok(SixModeConditional { axis, fixed })
}

impl Density for SixModeConditional {
    fn dim(&self) -> usize {
        1
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        if self.axis == 0 {
            six_mode_ln(x[0], self.fixed)
        } else {
            six_mode_ln(self.fixed, x[0])
        }
    }

    fn is_normalized(&self) -> bool {
        false
    }

    fn support(&self) -> Support {
        Support::Box { lower: vec![-SIX_MODE_BOUND], upper: vec![SIX_MODE_BOUND] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_at_half_pi_is_gaussian() {
        let c = sixmode_conditional(0, PI / 2.0).unwrap();
        // -x^2/2 - (1-x)^2/2 = -(x - 1/2)^2 - 1/4
        for x in [-1.0, 0.0, 0.5, 2.0] {
            let want = -(x - 0.5) * (x - 0.5) - 0.25;
            assert!((c.ln_pdf(&[x]) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn poles_and_box() {
        assert_eq!(six_mode_ln(0.0, 0.0), f64::NEG_INFINITY);
        assert_eq!(six_mode_ln(10.5, 1.0), f64::NEG_INFINITY);
        assert!(sixmode_conditional(0, 0.0).is_err());
        assert!(sixmode_conditional(1, 11.0).is_err());
    }

    #[test]
    fn odd_symmetry_of_csc() {
        for (x1, x2) in [(0.3, 1.2), (-0.7, 2.5), (0.1, 4.0)] {
            assert!((six_mode_ln(x1, x2) - six_mode_ln(-x1, -x2)).abs() < 1e-12);
        }
    }

    #[test]
    fn basins_cover_six_labels() {
        let labels: Vec<usize> =
            [-9.9, -8.0, -5.0, -1.0, 1.0, 5.0, 8.0, 9.9].iter().map(|x| SixModeTarget::basin(*x)).collect();
        assert_eq!(labels, vec![0, 0, 1, 2, 3, 4, 5, 5]);
    }
}
