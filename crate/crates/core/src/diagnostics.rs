//! Chain-quality metrics: ACF, batch-means ESS, multivariate ESS, MSJD.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::ChainTrace;
use crate::numeric::{mean, sample_variance};

pub const MIN_ESS_LEN: usize = 100;
pub const MESS_MIN_PER_DIM: usize = 20;
pub const DEFAULT_MAX_LAG: usize = 8;

fn degenerate(v: f64) -> bool {
    !(v > 1e-300) || !v.is_finite()
}

/// Mean squared Euclidean jump between consecutive states.
pub fn msjd(states: &[Vec<f64>]) -> Result<f64> {
    if states.len() < 2 {
        return Err(Error::InsufficientData("msjd needs at least two states".into()));
    }
    let total: f64 = states.windows(2).map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).powi(2)).sum::<f64>()).sum();
    Ok(total / (states.len() - 1) as f64)
}

/// Sample autocorrelations at lags `0..=max_lag`, normalized by `n`.
pub fn acf(xs: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = xs.len();
    if n <= 10 * max_lag || n < 2 {
        return Err(Error::InsufficientData(format!(
            "acf to lag {max_lag} needs more than {} values, got {n}",
            10 * max_lag
        )));
    }
    let m = mean(xs);
    let c: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let c0 = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if degenerate(c0) {
        return Err(Error::DegenerateSupport("series has zero variance".into()));
    }
    Ok((0..=max_lag).map(|k| c.iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 / c0).collect())
}

/// Batch size `floor(sqrt(n))` and the number of full batches.
fn batches(n: usize) -> (usize, usize) {
    let b = (n as f64).sqrt().floor() as usize;
    (b, n / b)
}

/// Batch-means estimate of the CLT variance of the mean.
pub fn batch_means_variance(xs: &[f64]) -> Result<f64> {
    if xs.len() < MIN_ESS_LEN {
        return Err(Error::InsufficientData(format!("need at least {MIN_ESS_LEN} values, got {}", xs.len())));
    }
    let (b, a) = batches(xs.len());
    let means: Vec<f64> = xs.chunks_exact(b).take(a).map(mean).collect();
    let grand = mean(&means);
    Ok(b as f64 * means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (a - 1) as f64)
}

/// `n σ̂² / σ̂²_MC` with batch-means `σ̂²_MC`.
pub fn ess(xs: &[f64]) -> Result<f64> {
    let mc = batch_means_variance(xs)?;
    let var = sample_variance(xs);
    if degenerate(var) {
        return Err(Error::DegenerateSupport("series has zero variance".into()));
    }
    if degenerate(mc) {
        return Err(Error::DegenerateSupport("batch means have zero variance".into()));
    }
    Ok(xs.len() as f64 * var / mc)
}

fn as_matrix(states: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = states.first().map_or(0, Vec::len);
    if d == 0 || states.iter().any(|s| s.len() != d) {
        return Err(Error::InvalidParameter("states must share a positive dimension".into()));
    }
    Ok(DMatrix::from_fn(states.len(), d, |i, j| states[i][j]))
}

/// Sample covariance `Λ̂` (denominator `n - 1`).
pub fn sample_covariance(states: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let x = as_matrix(states)?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InsufficientData("covariance needs at least two states".into()));
    }
    let mu = x.row_mean();
    let c = DMatrix::from_fn(n, x.ncols(), |i, j| x[(i, j)] - mu[j]);
    Ok(c.tr_mul(&c) / (n - 1) as f64)
}

/// Multivariate batch-means `Σ̂_MC`.
pub fn batch_means_covariance(states: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let x = as_matrix(states)?;
    if x.nrows() < MIN_ESS_LEN {
        return Err(Error::InsufficientData(format!("need at least {MIN_ESS_LEN} states, got {}", x.nrows())));
    }
    let (b, a) = batches(x.nrows());
    let d = x.ncols();
    let means: Vec<DVector<f64>> =
        (0..a).map(|k| DVector::from_fn(d, |j, _| x.view((k * b, j), (b, 1)).mean())).collect();
    let grand = means.iter().fold(DVector::zeros(d), |acc, m| acc + m) / a as f64;
    let s = means.iter().fold(DMatrix::zeros(d, d), |acc, m| {
        let c = m - &grand;
        acc + &c * c.transpose()
    });
    Ok(s * (b as f64 / (a - 1) as f64))
}

fn ln_det(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let scale = m.diagonal().amax();
    let ch = m.clone().cholesky().ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))?;
    let l = ch.l();
    let diag_min = l.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(*v * *v));
    if !(diag_min > 1e-12 * scale) {
        return Err(Error::Singular(format!("{what} is numerically singular")));
    }
    Ok(2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// `n (|Λ̂| / |Σ̂_MC|)^{1/d}`.
pub fn multivariate_ess(states: &[Vec<f64>]) -> Result<f64> {
    let d = states.first().map_or(0, Vec::len);
    let n = states.len();
    if n < MESS_MIN_PER_DIM * d.max(1) {
        return Err(Error::InsufficientData(format!("mESS needs n >= {} for dimension {d}", MESS_MIN_PER_DIM * d)));
    }
    let lam = ln_det(&sample_covariance(states)?, "sample covariance")?;
    let sig = ln_det(&batch_means_covariance(states)?, "batch-means covariance")?;
    Ok(n as f64 * ((lam - sig) / d as f64).exp())
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub dim: usize,
    pub max_lag: usize,
    /// Per coordinate; `None` when the coordinate is constant or too short.
    pub acf: Vec<Option<Vec<f64>>>,
    pub ess: Vec<Option<f64>>,
    pub mess: Option<f64>,
    pub msjd: f64,
    pub acceptance_rate: f64,
    pub sigma_mc: Option<DMatrix<f64>>,
    pub lambda: Option<DMatrix<f64>>,
    /// Why an entry is missing.
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    pub fn from_trace(trace: &ChainTrace, max_lag: usize) -> Result<Self> {
        Self::from_states(&trace.states, trace.acceptance_rate(), max_lag)
    }

    pub fn from_states(states: &[Vec<f64>], acceptance_rate: f64, max_lag: usize) -> Result<Self> {
        let msjd = msjd(states)?;
        let dim = states[0].len();
        let mut notes = Vec::new();
        let mut acfs = Vec::with_capacity(dim);
        let mut esss = Vec::with_capacity(dim);
        for j in 0..dim {
            let xs: Vec<f64> = states.iter().map(|s| s[j]).collect();
            acfs.push(acf(&xs, max_lag).map_err(|e| notes.push(format!("acf x{}: {e}", j + 1))).ok());
            esss.push(ess(&xs).map_err(|e| notes.push(format!("ess x{}: {e}", j + 1))).ok());
        }
        let mess = multivariate_ess(states).map_err(|e| notes.push(format!("mess: {e}"))).ok();
        Ok(Self {
            n: states.len(),
            dim,
            max_lag,
            acf: acfs,
            ess: esss,
            mess,
            msjd,
            acceptance_rate,
            sigma_mc: batch_means_covariance(states).ok(),
            lambda: sample_covariance(states).ok(),
            notes,
        })
    }

    /// Long-format CSV: `metric,coordinate,lag,value`; empty fields where
    /// not applicable.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "coordinate", "lag", "value"])?;
        let num = |v: f64| format!("{v:.10e}");
        w.write_record(["n", "", "", &self.n.to_string()])?;
        w.write_record(["acceptance_rate", "", "", &num(self.acceptance_rate)])?;
        w.write_record(["msjd", "", "", &num(self.msjd)])?;
        if let Some(m) = self.mess {
            w.write_record(["mess", "", "", &num(m)])?;
        }
        for j in 0..self.dim {
            let coord = (j + 1).to_string();
            if let Some(e) = self.ess[j] {
                w.write_record(["ess", &coord, "", &num(e)])?;
            }
            if let Some(a) = &self.acf[j] {
                for (k, v) in a.iter().enumerate() {
                    w.write_record(["acf", &coord, &k.to_string(), &num(*v)])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for DiagnosticsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}, dim = {}", self.n, self.dim)?;
        writeln!(f, "acceptance rate  {:.4}", self.acceptance_rate)?;
        writeln!(f, "msjd             {:.6}", self.msjd)?;
        match self.mess {
            Some(m) => writeln!(f, "mESS             {m:.1}")?,
            None => writeln!(f, "mESS             n/a")?,
        }
        write!(f, "{:>6} {:>10}", "coord", "ESS")?;
        for k in 1..=self.max_lag {
            write!(f, " {:>7}", format!("acf{k}"))?;
        }
        writeln!(f)?;
        for j in 0..self.dim {
            let e = self.ess[j].map_or("n/a".to_string(), |v| format!("{v:.1}"));
            write!(f, "{:>6} {e:>10}", format!("x{}", j + 1))?;
            match &self.acf[j] {
                Some(a) => {
                    for v in &a[1..] {
                        write!(f, " {v:>7.3}")?;
                    }
                }
                None => write!(f, " {:>7}", "n/a")?,
            }
            writeln!(f)?;
        }
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}
