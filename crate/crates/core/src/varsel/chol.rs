//! Incremental Cholesky algebra for `A_γ = W_γᵀW_γ + λI`.

use nalgebra::{DMatrix, DVector};

use super::data::VsData;
use super::model::{ModelGamma, Move};
use crate::error::{Error, Result};

/// Factor state of one model. Columns are held in insertion order, so the
/// factor is of `A_γ` with rows and columns permuted by [`CholState::order`].
#[derive(Debug, Clone)]
pub struct CholState {
    gamma: ModelGamma,
    order: Vec<usize>,
    /// Upper triangular, `A = UᵀU`.
    u: DMatrix<f64>,
    /// `U⁻ᵀ W_γᵀ z̃`.
    v: DVector<f64>,
    ln_det: f64,
    resid: f64,
}

/// Log marginal posterior up to a constant, from `|γ|`, `log|A_γ|`, `R_γ`.
pub fn ln_marginal_terms(data: &VsData, k: usize, ln_det: f64, resid: f64) -> f64 {
    let m = data.nrows() as f64;
    let p = data.ncols();
    let (lambda, omega) = (data.lambda(), data.omega());
    0.5 * k as f64 * lambda.ln() - 0.5 * ln_det - 0.5 * (m - 1.0) * resid.ln()
        + k as f64 * omega.ln()
        + (p - k) as f64 * (-omega).ln_1p()
}

/// Log marginal posterior of the model held by `chol`.
pub fn log_marginal(data: &VsData, chol: &CholState) -> f64 {
    ln_marginal_terms(data, chol.gamma.len(), chol.ln_det, chol.resid)
}

/// Direct evaluation by a fresh dense factorization; the reference the
/// incremental path is checked against.
pub fn dense_log_marginal(data: &VsData, gamma: &ModelGamma) -> Result<f64> {
    let (ln_det, resid) = dense_terms(data, gamma)?;
    Ok(ln_marginal_terms(data, gamma.len(), ln_det, resid))
}

fn dense_terms(data: &VsData, gamma: &ModelGamma) -> Result<(f64, f64)> {
    if gamma.is_empty() {
        return Ok((0.0, data.ztz()));
    }
    let a = dense_a(data, gamma.indices());
    let b = DVector::from_iterator(gamma.len(), gamma.indices().iter().map(|j| data.wtz(*j)));
    let ch = a.cholesky().ok_or(Error::Singular("A_gamma".into()))?;
    let ln_det = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let resid = data.ztz() - b.dot(&ch.solve(&b));
    if !(resid > 0.0) {
        return Err(Error::Numerical(format!("ridge residual {resid} not positive")));
    }
    Ok((ln_det, resid))
}

fn dense_a(data: &VsData, cols: &[usize]) -> DMatrix<f64> {
    let k = cols.len();
    let mut a = DMatrix::from_fn(k, k, |r, c| data.gram(cols[r], cols[c]));
    for i in 0..k {
        a[(i, i)] += data.lambda();
    }
    a
}

/// Outcome of appending one column to a factor, before committing it.
pub(crate) struct Extension {
    pub s: DVector<f64>,
    pub pivot: f64,
    pub v_new: f64,
}

/// One forward solve against `Uᵀ` plus the new pivot.
pub(crate) fn extend(
    u: &DMatrix<f64>,
    v: &DVector<f64>,
    cross: &[f64],
    gjj: f64,
    wtz_j: f64,
    lambda: f64,
) -> Option<Extension> {
    let a = DVector::from_column_slice(cross);
    let s = if u.nrows() == 0 { DVector::zeros(0) } else { u.tr_solve_upper_triangular(&a)? };
    let piv2 = gjj + lambda - s.norm_squared();
    if !(piv2 > 0.0) {
        return None;
    }
    let pivot = piv2.sqrt();
    let v_new = (wtz_j - s.dot(v)) / pivot;
    Some(Extension { s, pivot, v_new })
}

impl CholState {
    pub fn null(data: &VsData) -> Self {
        Self {
            gamma: ModelGamma::empty(),
            order: Vec::new(),
            u: DMatrix::zeros(0, 0),
            v: DVector::zeros(0),
            ln_det: 0.0,
            resid: data.ztz(),
        }
    }

    /// Factorizes from scratch.
    pub fn from_model(data: &VsData, gamma: &ModelGamma) -> Result<Self> {
        if gamma.indices().last().is_some_and(|j| *j >= data.ncols()) {
            return Err(Error::InvalidParameter("model index beyond p".into()));
        }
        if gamma.is_empty() {
            return Ok(Self::null(data));
        }
        let order = gamma.indices().to_vec();
        let ch = dense_a(data, &order).cholesky().ok_or(Error::Singular("A_gamma".into()))?;
        let u = ch.l().transpose();
        let b = DVector::from_iterator(order.len(), order.iter().map(|j| data.wtz(*j)));
        let v = u.tr_solve_upper_triangular(&b).ok_or(Error::Singular("A_gamma factor".into()))?;
        let ln_det = 2.0 * u.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let resid = data.ztz() - v.norm_squared();
        if !(resid > 0.0) {
            return Err(Error::Numerical(format!("ridge residual {resid} not positive")));
        }
        Ok(Self { gamma: gamma.clone(), order, u, v, ln_det, resid })
    }

    pub fn gamma(&self) -> &ModelGamma {
        &self.gamma
    }

    /// Column indices in factor order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// `log|A_γ|` from the factor diagonal.
    pub fn ln_det(&self) -> f64 {
        self.ln_det
    }

    /// `R_γ`.
    pub fn resid(&self) -> f64 {
        self.resid
    }

    /// `W_γᵀ z̃` in factor order.
    pub fn wtz(&self) -> DVector<f64> {
        self.u.tr_mul(&self.v)
    }

    /// Appends column `j` given `cross[r] = w_{order[r]}ᵀ w_j`.
    pub(crate) fn extend_with(&self, cross: &[f64], gjj: f64, wtz_j: f64, lambda: f64) -> Option<Extension> {
        extend(&self.u, &self.v, cross, gjj, wtz_j, lambda)
    }

    fn add_fast(&self, data: &VsData, j: usize) -> Option<Self> {
        let cross: Vec<f64> = self.order.iter().map(|o| data.gram(*o, j)).collect();
        let ext = self.extend_with(&cross, data.gram(j, j), data.wtz(j), data.lambda())?;
        let k = self.order.len();
        let mut u = self.u.clone().resize(k + 1, k + 1, 0.0);
        u.view_mut((0, k), (k, 1)).copy_from(&ext.s);
        u[(k, k)] = ext.pivot;
        let mut v = self.v.clone().resize_vertically(k + 1, 0.0);
        v[k] = ext.v_new;
        let resid = self.resid - ext.v_new * ext.v_new;
        if !(resid > 0.0) {
            return None;
        }
        let mut order = self.order.clone();
        order.push(j);
        Some(Self {
            gamma: self.gamma.apply(Move::Add(j)),
            order,
            u,
            v,
            ln_det: self.ln_det + 2.0 * ext.pivot.ln(),
            resid,
        })
    }

    /// Removes factor position `pos` and restores triangularity by Givens
    /// rotations. Returns the new factor, `v`, and the dropped `v` entry.
    pub(crate) fn downdate(&self, pos: usize) -> (DMatrix<f64>, DVector<f64>, f64) {
        let k = self.order.len();
        let mut u = self.u.clone().remove_column(pos);
        let mut v = self.v.clone();
        for i in pos..k - 1 {
            let (a, b) = (u[(i, i)], u[(i + 1, i)]);
            let r = a.hypot(b);
            let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (a / r, b / r) };
            for col in i..k - 1 {
                let (x, y) = (u[(i, col)], u[(i + 1, col)]);
                u[(i, col)] = c * x + s * y;
                u[(i + 1, col)] = -s * x + c * y;
            }
            let (x, y) = (v[i], v[i + 1]);
            v[i] = c * x + s * y;
            v[i + 1] = -s * x + c * y;
        }
        let dropped = v[k - 1];
        let u = u.remove_row(k - 1);
        let v = v.remove_row(k - 1);
        (u, v, dropped)
    }

    fn delete_fast(&self, j: usize) -> Option<Self> {
        let pos = self.order.iter().position(|o| *o == j)?;
        let (u, v, dropped) = self.downdate(pos);
        let ln_det = 2.0 * u.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !ln_det.is_finite() {
            return None;
        }
        let mut order = self.order.clone();
        order.remove(pos);
        Some(Self {
            gamma: self.gamma.apply(Move::Delete(j)),
            order,
            u,
            v,
            ln_det,
            resid: self.resid + dropped * dropped,
        })
    }

    /// State after `mv`. Falls back to a full refactorization, with a
    /// warning, if the update loses positive definiteness.
    pub fn apply(&self, data: &VsData, mv: Move) -> Result<Self> {
        if !self.gamma.is_legal(mv, data.ncols()) {
            return Err(Error::InvalidParameter(format!("illegal move {mv:?} from {}", self.gamma)));
        }
        let fast = match mv {
            Move::Add(j) => self.add_fast(data, j),
            Move::Delete(j) => self.delete_fast(j),
            Move::Swap { out, into } => self.delete_fast(out).and_then(|s| s.add_fast(data, into)),
        };
        match fast {
            Some(s) => Ok(s),
            None => {
                let target = self.gamma.apply(mv);
                log::warn!("incremental Cholesky update failed for {target}; refactorizing");
                Self::from_model(data, &target)
            }
        }
    }

    /// `A_γ` rebuilt from the factor, in factor order.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.u.tr_mul(&self.u)
    }

    /// `A_γ` computed directly, in factor order.
    pub fn dense_a(&self, data: &VsData) -> DMatrix<f64> {
        dense_a(data, &self.order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_data(m: usize, p: usize, seed: u64) -> VsData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(m, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z: Vec<f64> = (0..m).map(|i| x[(i, 0)] - 0.5 * x[(i, 1)] + rng.sample::<f64, _>(StandardNormal)).collect();
        VsData::new(x, &z, Some(0.7), Some(0.2)).unwrap()
    }

    #[test]
    fn null_model_value() {
        let d = random_data(20, 4, 1);
        let want = -9.5 * d.ztz().ln() + 4.0 * (0.8f64).ln();
        assert!((log_marginal(&d, &CholState::null(&d)) - want).abs() < 1e-12);
    }

    #[test]
    fn singleton_closed_form() {
        let d = random_data(25, 5, 2);
        let j = 3;
        let a = d.gram(j, j) + d.lambda();
        let r = d.ztz() - d.wtz(j).powi(2) / a;
        let want = 0.5 * d.lambda().ln() - 0.5 * a.ln() - 12.0 * r.ln() + 0.2f64.ln() + 4.0 * 0.8f64.ln();
        let s = CholState::null(&d).apply(&d, Move::Add(j)).unwrap();
        assert!((log_marginal(&d, &s) - want).abs() < 1e-10);
    }

    #[test]
    fn add_then_delete_restores_factor() {
        let d = random_data(30, 6, 3);
        let base = CholState::from_model(&d, &ModelGamma::new(vec![0, 2, 4], 6).unwrap()).unwrap();
        let back = base.apply(&d, Move::Add(5)).unwrap().apply(&d, Move::Delete(5)).unwrap();
        assert!((back.factor() - base.factor()).amax() < 1e-10);
        assert!((back.resid() - base.resid()).abs() < 1e-10);
    }

    #[test]
    fn deleting_inner_column_matches_dense() {
        let d = random_data(30, 6, 4);
        let s = CholState::from_model(&d, &ModelGamma::new(vec![0, 1, 3, 5], 6).unwrap()).unwrap();
        let t = s.apply(&d, Move::Delete(1)).unwrap();
        assert!((t.reconstruct() - t.dense_a(&d)).amax() < 1e-10);
        let want = dense_log_marginal(&d, t.gamma()).unwrap();
        assert!((log_marginal(&d, &t) - want).abs() < 1e-10);
    }

    #[test]
    fn resid_decreases_on_addition() {
        let d = random_data(30, 6, 5);
        let mut s = CholState::null(&d);
        for j in [2, 0, 5, 1] {
            let t = s.apply(&d, Move::Add(j)).unwrap();
            assert!(t.resid() <= s.resid() + 1e-12);
            s = t;
        }
        assert!((s.wtz() - DVector::from_iterator(4, s.order().iter().map(|j| d.wtz(*j)))).amax() < 1e-10);
    }

    #[test]
    fn illegal_move_rejected() {
        let d = random_data(10, 3, 6);
        assert!(CholState::null(&d).apply(&d, Move::Delete(0)).is_err());
    }
}
