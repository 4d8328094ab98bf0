//! Finite-state geometric MH matrices and the analytic Peskun constant.

use nalgebra::{DMatrix, DVector};

use super::chain::{mh_transition_matrix, FiniteChain};
use crate::error::{Error, Result};
use crate::geometry::finite::{geometric_mixture_pmf, pmf_affinity};

/// Smallest off-diagonal `P_xy / Q_xy` over pairs with `Q_xy > 0`.
/// Returns 1 when `Q` has no off-diagonal mass.
pub fn peskun_constant(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::DimensionMismatch { expected: q.nrows(), got: p.nrows() });
    }
    let n = p.nrows();
    let mut c = f64::INFINITY;
    for x in 0..n {
        for y in 0..n {
            if x != y && q[(x, y)] > 0.0 {
                c = c.min(p[(x, y)] / q[(x, y)]);
            }
        }
    }
    Ok(if c.is_finite() { c } else { 1.0 })
}

fn check_inputs(f: &DMatrix<f64>, gs: &[DMatrix<f64>], a: &[f64], epsilon: f64) -> Result<()> {
    if gs.is_empty() || gs.len() != a.len() {
        return Err(Error::DimensionMismatch { expected: gs.len(), got: a.len() });
    }
    if let Some(g) = gs.iter().find(|g| g.shape() != f.shape()) {
        return Err(Error::DimensionMismatch { expected: f.nrows(), got: g.nrows() });
    }
    if a.iter().any(|w| !(*w >= 0.0)) || (a.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter("direction weights must be a pmf".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    Ok(())
}

/// Rows `phi_{i,eps}(·|x)` for each direction.
pub fn component_proposals(f: &DMatrix<f64>, gs: &[DMatrix<f64>], epsilon: f64) -> Result<Vec<DMatrix<f64>>> {
    let n = f.nrows();
    gs.iter()
        .map(|g| {
            let mut phi = DMatrix::zeros(n, f.ncols());
            for x in 0..n {
                let fr: Vec<f64> = f.row(x).iter().copied().collect();
                let gr: Vec<f64> = g.row(x).iter().copied().collect();
                let aff = pmf_affinity(&fr, &gr)?;
                let row = geometric_mixture_pmf(&fr, &gr, &aff, epsilon)?;
                phi.row_mut(x).copy_from_slice(&row);
            }
            Ok(phi)
        })
        .collect()
}

/// Mixture proposal `sum_i a_i phi_{i,eps}`.
pub fn mixture_proposal(f: &DMatrix<f64>, gs: &[DMatrix<f64>], a: &[f64], epsilon: f64) -> Result<DMatrix<f64>> {
    check_inputs(f, gs, a, epsilon)?;
    let comps = component_proposals(f, gs, epsilon)?;
    Ok(comps.iter().zip(a).fold(DMatrix::zeros(f.nrows(), f.ncols()), |acc, (phi, w)| acc + phi * *w))
}

/// Chain whose acceptance uses the full mixture density.
pub fn algorithm1_matrix(
    f: &DMatrix<f64>,
    gs: &[DMatrix<f64>],
    a: &[f64],
    epsilon: f64,
    psi: &[f64],
) -> Result<FiniteChain> {
    mh_transition_matrix(&mixture_proposal(f, gs, a, epsilon)?, psi)
}

/// Chain that picks direction `i` first and accepts with `phi_i` alone.
pub fn algorithm2_matrix(
    f: &DMatrix<f64>,
    gs: &[DMatrix<f64>],
    a: &[f64],
    epsilon: f64,
    psi: &[f64],
) -> Result<FiniteChain> {
    check_inputs(f, gs, a, epsilon)?;
    let n = psi.len();
    if f.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, got: f.nrows() });
    }
    if psi.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidParameter("target must be strictly positive".into()));
    }
    let total: f64 = psi.iter().sum();
    let psi = DVector::from_iterator(n, psi.iter().map(|p| p / total));
    let comps = component_proposals(f, gs, epsilon)?;
    let mut p = DMatrix::zeros(n, n);
    for (phi, w) in comps.iter().zip(a) {
        for x in 0..n {
            for y in 0..n {
                if x != y && phi[(x, y)] > 0.0 {
                    let r = psi[y] * phi[(y, x)] / (psi[x] * phi[(x, y)]);
                    p[(x, y)] += w * phi[(x, y)] * r.min(1.0);
                }
            }
        }
    }
    for x in 0..n {
        let off: f64 = p.row(x).sum();
        p[(x, x)] = 1.0 - off;
    }
    FiniteChain::new(p, psi)
}

/// Analytic lower bound `c_eps = sum_i a_i c_{i,eps}` on the off-diagonal
/// ratio between the geometric chain and the base MH chain.
///
/// `c_{i,eps}` is the infimum over pairs `x != y` with `f(y|x) > 0` of
/// `cos²(eps θ_{i,x}) + sin²(eps θ_{i,x}) d_i(y|x)`, taken in both orders.
/// A degenerate direction at `x` contributes 1 there.
pub fn c_epsilon_bound(f: &DMatrix<f64>, gs: &[DMatrix<f64>], a: &[f64], epsilon: f64) -> Result<f64> {
    check_inputs(f, gs, a, epsilon)?;
    let n = f.nrows();
    if f.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.ncols() });
    }
    let mut total = 0.0;
    for (g, w) in gs.iter().zip(a) {
        // term[x][y] for the ordered pair (x, y); +inf where f(y|x) = 0
        let mut term = DMatrix::from_element(n, n, f64::INFINITY);
        for x in 0..n {
            let fr: Vec<f64> = f.row(x).iter().copied().collect();
            let gr: Vec<f64> = g.row(x).iter().copied().collect();
            let aff = pmf_affinity(&fr, &gr)?;
            let c = aff.value();
            let (s2, c2) = {
                let (s, co) = (epsilon * aff.angle()).sin_cos();
                (s * s, co * co)
            };
            for y in 0..n {
                if y == x || fr[y] <= 0.0 {
                    continue;
                }
                term[(x, y)] = if aff.is_degenerate() || s2 == 0.0 {
                    1.0
                } else {
                    let d = ((gr[y] / fr[y]).sqrt() - c).powi(2) / (1.0 - c * c);
                    c2 + s2 * d
                };
            }
        }
        let forward = term.iter().copied().fold(f64::INFINITY, f64::min);
        let backward = term.transpose().iter().copied().fold(f64::INFINITY, f64::min);
        let ci = forward.min(backward);
        total += w * if ci.is_finite() { ci } else { 1.0 };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rw(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |x, y| if (x + 1) % n == y || (y + 1) % n == x { 0.5 } else { 0.0 })
    }

    fn state_free(row: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(row.len(), row.len(), |_, y| row[y])
    }

    fn psi(n: usize) -> Vec<f64> {
        (0..n).map(|x| 1.0 + (x as f64 * 0.7).sin().powi(2) * 3.0).collect()
    }

    #[test]
    fn epsilon_zero_gives_base_chain() {
        let n = 8;
        let ps = psi(n);
        let g = state_free(&ps.iter().map(|v| v / ps.iter().sum::<f64>()).collect::<Vec<_>>());
        let base = mh_transition_matrix(&rw(n), &ps).unwrap();
        let geo = algorithm1_matrix(&rw(n), std::slice::from_ref(&g), &[1.0], 0.0, &ps).unwrap();
        assert!((geo.transition() - base.transition()).amax() < 1e-12);
        assert_eq!(c_epsilon_bound(&rw(n), &[g], &[1.0], 0.0).unwrap(), 1.0);
    }

    #[test]
    fn peskun_excludes_diagonal_and_zero_q() {
        let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]);
        let q = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.4, 0.6]);
        assert!((peskun_constant(&p, &q).unwrap() - 0.2).abs() < 1e-15);
        let id = DMatrix::identity(2, 2);
        assert_eq!(peskun_constant(&p, &id).unwrap(), 1.0);
    }

    #[test]
    fn bound_below_empirical_constant() {
        let n = 10;
        let ps = psi(n);
        let total: f64 = ps.iter().sum();
        let g1 = state_free(&ps.iter().map(|v| v / total).collect::<Vec<_>>());
        let g2 = DMatrix::from_fn(n, n, |x, y| if (x + 2) % n == y { 0.6 } else { 0.4 / (n - 1) as f64 });
        let gs = [g1, g2];
        for eps in [0.2, 0.5, 1.0] {
            let c = c_epsilon_bound(&rw(n), &gs, &[0.3, 0.7], eps).unwrap();
            let base = mh_transition_matrix(&rw(n), &ps).unwrap();
            for chain in [
                algorithm1_matrix(&rw(n), &gs, &[0.3, 0.7], eps, &ps).unwrap(),
                algorithm2_matrix(&rw(n), &gs, &[0.3, 0.7], eps, &ps).unwrap(),
            ] {
                let emp = peskun_constant(chain.transition(), base.transition()).unwrap();
                assert!(c <= emp + 1e-9, "eps {eps}: {c} > {emp}");
            }
        }
    }

    #[test]
    fn algorithm2_is_reversible_and_dominated() {
        let n = 6;
        let ps = psi(n);
        let total: f64 = ps.iter().sum();
        let g = state_free(&ps.iter().map(|v| v / total).collect::<Vec<_>>());
        let g2 = state_free(&[0.5, 0.1, 0.1, 0.1, 0.1, 0.1]);
        let f = state_free(&[1.0 / 6.0; 6]);
        let p1 = algorithm1_matrix(&f, &[g.clone(), g2.clone()], &[0.5, 0.5], 0.7, &ps).unwrap();
        let p2 = algorithm2_matrix(&f, &[g, g2], &[0.5, 0.5], 0.7, &ps).unwrap();
        assert!(p2.is_reversible());
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    assert!(p1.transition()[(x, y)] >= p2.transition()[(x, y)] - 1e-12);
                }
            }
        }
    }
}
