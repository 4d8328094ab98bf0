use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::ensure_dim;

/// Magic bytes opening a sparse column file.
pub const SPARSE_MAGIC: &[u8; 8] = b"GMCSPC1\0";

/// Raw covariates stored column-compressed.
///
/// On disk (all little-endian): the 8 magic bytes, `m: u64`, `p: u64`,
/// `nnz: u64`, `p + 1` column offsets as `u64`, `nnz` row indices as `u32`,
/// then `nnz` values as `f64`. Offsets must be nondecreasing and end at `nnz`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumns {
    nrows: usize,
    offsets: Vec<usize>,
    rows: Vec<u32>,
    values: Vec<f64>,
}

impl SparseColumns {
    pub fn new(nrows: usize, offsets: Vec<usize>, rows: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if offsets.is_empty() || offsets[0] != 0 || *offsets.last().unwrap() != rows.len() {
            return Err(Error::Parse("column offsets do not bracket the entries".into()));
        }
        if rows.len() != values.len() || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Parse("malformed column offsets".into()));
        }
        for j in 0..offsets.len() - 1 {
            let col = &rows[offsets[j]..offsets[j + 1]];
            if col.iter().any(|r| *r as usize >= nrows) || col.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Parse(format!("column {j}: row indices out of range or unsorted")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("non-finite stored value".into()));
        }
        Ok(Self { nrows, offsets, rows, values })
    }

    pub fn from_dense(x: &DMatrix<f64>) -> Self {
        let mut offsets = vec![0];
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for col in x.column_iter() {
            for (i, v) in col.iter().enumerate() {
                if *v != 0.0 {
                    rows.push(i as u32);
                    values.push(*v);
                }
            }
            offsets.push(rows.len());
        }
        Self { nrows: x.nrows(), offsets, rows, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn column(&self, j: usize) -> (&[u32], &[f64]) {
        let r = self.offsets[j]..self.offsets[j + 1];
        (&self.rows[r.clone()], &self.values[r])
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(SPARSE_MAGIC)?;
        for v in [self.nrows, self.ncols(), self.nnz()] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        for o in &self.offsets {
            out.write_all(&(*o as u64).to_le_bytes())?;
        }
        for r in &self.rows {
            out.write_all(&r.to_le_bytes())?;
        }
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != SPARSE_MAGIC {
            return Err(Error::Parse("not a sparse column file (bad magic)".into()));
        }
        let mut u64s = |n: usize| -> Result<Vec<usize>> {
            let mut buf = vec![0u8; 8 * n];
            input.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize).collect())
        };
        let head = u64s(3)?;
        let (m, p, nnz) = (head[0], head[1], head[2]);
        let offsets = u64s(p + 1)?;
        let mut buf = vec![0u8; 4 * nnz];
        input.read_exact(&mut buf)?;
        let rows = buf.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
        let mut buf = vec![0u8; 8 * nnz];
        input.read_exact(&mut buf)?;
        let values = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Self::new(m, offsets, rows, values)
    }
}

/// Standardized covariates, either materialized or kept sparse with the
/// centering and scaling applied on the fly.
#[derive(Debug, Clone)]
enum Design {
    Dense(DMatrix<f64>),
    Sparse { raw: SparseColumns, means: Vec<f64>, scales: Vec<f64> },
}

/// Data and hyperparameters for the model-space posterior.
#[derive(Debug, Clone)]
pub struct VsData {
    design: Design,
    z_tilde: DVector<f64>,
    z_bar: f64,
    ztz: f64,
    wtz: Vec<f64>,
    col_sq: Vec<f64>,
    lambda: f64,
    omega: f64,
}

fn column_stats(m: usize, sum: f64, sum_sq: f64) -> (f64, f64) {
    let mean = sum / m as f64;
    let var = (sum_sq - m as f64 * mean * mean) / (m as f64 - 1.0);
    (mean, var.max(0.0).sqrt())
}

impl VsData {
    /// Centers and scales every column of `x` to unit sample SD and centers
    /// `z`. Omitted hyperparameters default to `omega = sqrt(m)/p` and
    /// `lambda = m/p^2`.
    pub fn new(x: DMatrix<f64>, z: &[f64], lambda: Option<f64>, omega: Option<f64>) -> Result<Self> {
        let (m, p) = x.shape();
        ensure_dim(m, z.len())?;
        let mut w = x;
        for (j, mut col) in w.column_iter_mut().enumerate() {
            let (mean, sd) = column_stats(m, col.sum(), col.norm_squared());
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::InvalidParameter(format!("column {} is constant or non-finite", j + 1)));
            }
            col.apply(|v| *v = (*v - mean) / sd);
        }
        Self::finish(Design::Dense(w), m, p, z, lambda, omega)
    }

    /// Same standardization as [`VsData::new`] without densifying.
    pub fn from_sparse(raw: SparseColumns, z: &[f64], lambda: Option<f64>, omega: Option<f64>) -> Result<Self> {
        let (m, p) = (raw.nrows(), raw.ncols());
        ensure_dim(m, z.len())?;
        let mut means = Vec::with_capacity(p);
        let mut scales = Vec::with_capacity(p);
        for j in 0..p {
            let (_, vals) = raw.column(j);
            let (mean, sd) = column_stats(m, vals.iter().sum(), vals.iter().map(|v| v * v).sum());
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::InvalidParameter(format!("column {} is constant or non-finite", j + 1)));
            }
            means.push(mean);
            scales.push(sd);
        }
        Self::finish(Design::Sparse { raw, means, scales }, m, p, z, lambda, omega)
    }

    fn finish(design: Design, m: usize, p: usize, z: &[f64], lambda: Option<f64>, omega: Option<f64>) -> Result<Self> {
        if m < 3 || p == 0 {
            return Err(Error::InsufficientData(format!("need m >= 3 and p >= 1, got m = {m}, p = {p}")));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("response has non-finite entries".into()));
        }
        let lambda = lambda.unwrap_or(m as f64 / (p * p) as f64);
        let omega = omega.unwrap_or((m as f64).sqrt() / p as f64);
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::InvalidParameter(format!("omega must lie in (0, 1), got {omega}")));
        }
        let z_bar = z.iter().sum::<f64>() / m as f64;
        let z_tilde = DVector::from_iterator(m, z.iter().map(|v| v - z_bar));
        let ztz = z_tilde.norm_squared();
        if ztz <= 0.0 {
            return Err(Error::InvalidParameter("response is constant".into()));
        }
        let mut data = Self { design, z_tilde, z_bar, ztz, wtz: Vec::new(), col_sq: Vec::new(), lambda, omega };
        data.wtz = data.cross(data.z_tilde.as_slice());
        data.col_sq = (0..p).map(|j| data.column(j).norm_squared()).collect();
        Ok(data)
    }

    /// Reads a header row then numeric rows; `response` names the response
    /// column and every other column is a covariate.
    pub fn from_csv<R: Read>(input: R, response: &str, lambda: Option<f64>, omega: Option<f64>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let idx = header
            .iter()
            .position(|h| h.trim() == response)
            .ok_or_else(|| Error::Parse(format!("no column named {response:?}")))?;
        let p = header.len() - 1;
        let mut cells = Vec::new();
        let mut z = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("row {}, column {:?}: {e}", line + 2, &header[k])))?;
                if k == idx {
                    z.push(v);
                } else {
                    cells.push(v);
                }
            }
        }
        let x = DMatrix::from_row_slice(z.len(), p, &cells);
        Self::new(x, &z, lambda, omega)
    }

    pub fn nrows(&self) -> usize {
        self.z_tilde.len()
    }

    pub fn ncols(&self) -> usize {
        self.wtz.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn z_bar(&self) -> f64 {
        self.z_bar
    }

    pub fn z_tilde(&self) -> &DVector<f64> {
        &self.z_tilde
    }

    /// `z̃ᵀz̃`.
    pub fn ztz(&self) -> f64 {
        self.ztz
    }

    /// `w_jᵀz̃`.
    pub fn wtz(&self, j: usize) -> f64 {
        self.wtz[j]
    }

    /// Standardized column `j`.
    pub fn column(&self, j: usize) -> DVector<f64> {
        match &self.design {
            Design::Dense(w) => w.column(j).into_owned(),
            Design::Sparse { raw, means, scales } => {
                let mut col = DVector::from_element(raw.nrows(), -means[j] / scales[j]);
                let (rows, vals) = raw.column(j);
                for (r, v) in rows.iter().zip(vals) {
                    col[*r as usize] += v / scales[j];
                }
                col
            }
        }
    }

    /// `Wᵀv` for every column.
    pub fn cross(&self, v: &[f64]) -> Vec<f64> {
        match &self.design {
            Design::Dense(w) => w.tr_mul(&DVector::from_column_slice(v)).as_slice().to_vec(),
            Design::Sparse { raw, means, scales } => {
                let total: f64 = v.iter().sum();
                (0..raw.ncols())
                    .map(|j| {
                        let (rows, vals) = raw.column(j);
                        let dot: f64 = rows.iter().zip(vals).map(|(r, x)| x * v[*r as usize]).sum();
                        (dot - means[j] * total) / scales[j]
                    })
                    .collect()
            }
        }
    }

    /// `w_jᵀw_k`.
    pub fn gram(&self, j: usize, k: usize) -> f64 {
        if j == k {
            return self.col_sq[j];
        }
        match &self.design {
            Design::Dense(w) => w.column(j).dot(&w.column(k)),
            Design::Sparse { .. } => self.column(j).dot(&self.column(k)),
        }
    }

    /// Dense standardized design; for tests and small problems.
    pub fn dense_design(&self) -> DMatrix<f64> {
        match &self.design {
            Design::Dense(w) => w.clone(),
            Design::Sparse { .. } => {
                DMatrix::from_columns(&(0..self.ncols()).map(|j| self.column(j)).collect::<Vec<_>>())
            }
        }
    }
}
