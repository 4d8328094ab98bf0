use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub const ROW_SUM_TOL: f64 = 1e-12;
pub const BALANCE_TOL: f64 = 1e-10;

/// Row-stochastic transition matrix with a stationary pmf.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    transition: DMatrix<f64>,
    stationary: DVector<f64>,
}

impl FiniteChain {
    /// Checks row sums, nonnegativity, and `ψP = ψ`.
    pub fn new(transition: DMatrix<f64>, stationary: DVector<f64>) -> Result<Self> {
        let n = transition.nrows();
        if transition.ncols() != n || stationary.len() != n || n == 0 {
            return Err(Error::DimensionMismatch { expected: n, got: stationary.len() });
        }
        if transition.iter().any(|v| !(*v >= -ROW_SUM_TOL)) {
            return Err(Error::InvalidParameter("row stochasticity: negative or NaN entry".into()));
        }
        for (x, row) in transition.row_iter().enumerate() {
            if (row.sum() - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidParameter(format!("row stochasticity: row {x} sums to {}", row.sum())));
            }
        }
        if stationary.iter().any(|p| !(*p > 0.0)) || (stationary.sum() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter("stationary pmf must be positive and sum to 1".into()));
        }
        let moved = transition.tr_mul(&stationary);
        let err = (moved - &stationary).amax();
        if err > BALANCE_TOL {
            return Err(Error::InvalidParameter(format!("stationarity: |ψP - ψ| = {err:.3e}")));
        }
        Ok(Self { transition, stationary })
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.stationary
    }

    pub fn len(&self) -> usize {
        self.stationary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stationary.is_empty()
    }

    /// Largest `|ψ_x P_xy - ψ_y P_yx|`.
    pub fn balance_error(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for x in 0..n {
            for y in x + 1..n {
                let flow = self.stationary[x] * self.transition[(x, y)] - self.stationary[y] * self.transition[(y, x)];
                worst = worst.max(flow.abs());
            }
        }
        worst
    }

    pub fn is_reversible(&self) -> bool {
        self.balance_error() <= BALANCE_TOL
    }

    fn require_reversible(&self) -> Result<()> {
        if self.is_reversible() {
            Ok(())
        } else {
            Err(Error::NotReversible(format!("detailed balance error {:.3e}", self.balance_error())))
        }
    }

    /// `E_ψ t`.
    pub fn mean(&self, t: &DVector<f64>) -> f64 {
        self.stationary.dot(t)
    }

    /// `t - E_ψ t`.
    pub fn center(&self, t: &DVector<f64>) -> DVector<f64> {
        t.add_scalar(-self.mean(t))
    }

    /// `E_ψ t²` of the centered `t`.
    pub fn variance(&self, t: &DVector<f64>) -> f64 {
        let c = self.center(t);
        self.stationary.dot(&c.component_mul(&c))
    }

    /// `⟨Pt, t⟩_ψ` of the centered `t`.
    pub fn lag_one(&self, t: &DVector<f64>) -> f64 {
        let c = self.center(t);
        let pt = &self.transition * &c;
        self.stationary.dot(&pt.component_mul(&c))
    }

    /// Eigenpairs of `S₀ = D^{1/2} P D^{-1/2} - sqrt(ψ) sqrt(ψ)ᵀ`, which
    /// agrees with `P` on mean-zero functions and sends `sqrt(ψ)` to 0.
    /// Also returns the index of the pair aligned with `sqrt(ψ)`.
    fn deflated_spectrum(&self) -> Result<(SymmetricEigen<f64, nalgebra::Dyn>, usize)> {
        self.require_reversible()?;
        let n = self.len();
        let root = self.stationary.map(f64::sqrt);
        let s = DMatrix::from_fn(n, n, |x, y| root[x] * self.transition[(x, y)] / root[y]);
        let s = (&s + s.transpose()) * 0.5 - &root * root.transpose();
        let eig = SymmetricEigen::new(s);
        let unit = (0..n)
            .max_by(|a, b| {
                let oa = eig.eigenvectors.column(*a).dot(&root).abs();
                let ob = eig.eigenvectors.column(*b).dot(&root).abs();
                oa.total_cmp(&ob)
            })
            .expect("nonempty");
        Ok((eig, unit))
    }

    /// Eigenvalues of `P` restricted to mean-zero functions, ascending.
    pub fn centered_eigenvalues(&self) -> Result<Vec<f64>> {
        let (eig, unit) = self.deflated_spectrum()?;
        let mut vals: Vec<f64> =
            eig.eigenvalues.iter().enumerate().filter(|(i, _)| *i != unit).map(|(_, v)| *v).collect();
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }
}

/// Metropolis-Hastings matrix for proposal `q` (rows are `q(·|x)`) and
/// target `psi`; the diagonal absorbs the rejected mass.
pub fn mh_transition_matrix(q: &DMatrix<f64>, psi: &[f64]) -> Result<FiniteChain> {
    let n = psi.len();
    if q.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, got: q.nrows() });
    }
    if psi.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidParameter("target must be strictly positive".into()));
    }
    for (x, row) in q.row_iter().enumerate() {
        if (row.sum() - 1.0).abs() > 1e-10 || row.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter(format!("proposal row {x} is not a pmf")));
        }
    }
    let total: f64 = psi.iter().sum();
    let psi = DVector::from_iterator(n, psi.iter().map(|p| p / total));
    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            if x != y && q[(x, y)] > 0.0 {
                let back = psi[y] * q[(y, x)];
                let fwd = psi[x] * q[(x, y)];
                p[(x, y)] = q[(x, y)] * (back / fwd).min(1.0);
            }
        }
        let off: f64 = p.row(x).sum();
        p[(x, x)] = 1.0 - off;
    }
    FiniteChain::new(p, psi)
}

/// `1 - max |λ|` over the mean-zero spectrum.
pub fn spectral_gap(chain: &FiniteChain) -> Result<f64> {
    let vals = chain.centered_eigenvalues()?;
    Ok(1.0 - vals.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// `1 - max λ` over the mean-zero spectrum, i.e. `1 - sup ⟨Pt,t⟩` over
/// unit-variance `t`.
pub fn right_spectral_gap(chain: &FiniteChain) -> Result<f64> {
    let vals = chain.centered_eigenvalues()?;
    Ok(1.0 - vals.last().copied().unwrap_or(0.0))
}

/// CLT variance of ergodic averages of `t` (centered internally) by the
/// spectral formula.
pub fn asymptotic_variance(chain: &FiniteChain, t: &DVector<f64>) -> Result<f64> {
    if t.len() != chain.len() {
        return Err(Error::DimensionMismatch { expected: chain.len(), got: t.len() });
    }
    let (eig, _) = chain.deflated_spectrum()?;
    if eig.eigenvalues.iter().any(|v| *v > 1.0 - BALANCE_TOL) {
        return Err(Error::Reducible("eigenvalue 1 is not simple".into()));
    }
    // t is orthogonal to sqrt(ψ) after scaling, so the deflated direction
    // contributes nothing even inside a degenerate eigenspace
    let s = chain.center(t).component_mul(&chain.stationary().map(f64::sqrt));
    Ok(eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, l)| (1.0 + l) / (1.0 - l) * eig.eigenvectors.column(i).dot(&s).powi(2))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> FiniteChain {
        let p = DMatrix::from_row_slice(2, 2, &[1.0 - a, a, b, 1.0 - b]);
        let psi = DVector::from_vec(vec![b / (a + b), a / (a + b)]);
        FiniteChain::new(p, psi).unwrap()
    }

    #[test]
    fn hand_mh_two_states() {
        let q = DMatrix::from_element(2, 2, 0.5);
        let c = mh_transition_matrix(&q, &[2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((c.transition()[(0, 1)] - 0.25).abs() < 1e-15);
        assert!((c.transition()[(1, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identity_and_iid_gaps() {
        let psi = DVector::from_vec(vec![0.2, 0.3, 0.5]);
        let id = FiniteChain::new(DMatrix::identity(3, 3), psi.clone()).unwrap();
        assert!(spectral_gap(&id).unwrap().abs() < 1e-12);
        let iid = DMatrix::from_fn(3, 3, |_, y| psi[y]);
        let iid = FiniteChain::new(iid, psi.clone()).unwrap();
        assert!((spectral_gap(&iid).unwrap() - 1.0).abs() < 1e-12);
        let t = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert!((asymptotic_variance(&iid, &t).unwrap() - iid.variance(&t)).abs() < 1e-12);
        assert!(matches!(asymptotic_variance(&id, &t), Err(Error::Reducible(_))));
    }

    #[test]
    fn two_state_closed_forms() {
        for (a, b) in [(0.3, 0.6), (0.9, 0.8), (0.1, 0.05)] {
            let c = two_state(a, b);
            let lam: f64 = 1.0 - a - b;
            assert!((spectral_gap(&c).unwrap() - (1.0 - lam.abs())).abs() < 1e-12);
            let t = DVector::from_vec(vec![1.0, 0.0]);
            let var = c.variance(&t);
            let want = var * (1.0 + lam) / (1.0 - lam);
            assert!((asymptotic_variance(&c, &t).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn assembled_matrix_is_reversible() {
        let q = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, 0.3, 0.1, 0.1, 0.8, 0.6, 0.2, 0.2]);
        let c = mh_transition_matrix(&q, &[1.0, 2.0, 3.0]).unwrap();
        assert!(c.balance_error() < 1e-15);
    }

    #[test]
    fn non_reversible_rejected() {
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let c = FiniteChain::new(p, DVector::from_element(3, 1.0 / 3.0)).unwrap();
        assert!(matches!(spectral_gap(&c), Err(Error::NotReversible(_))));
    }

    #[test]
    fn bad_stationary_rejected() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.1, 0.9]);
        assert!(FiniteChain::new(p, DVector::from_vec(vec![0.5, 0.5])).is_err());
    }
}
