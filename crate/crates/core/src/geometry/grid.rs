//! Quadrature grids and discretized square-root densities.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::ensure_dim;

use super::density::Density;

/// Tolerance for unit norm and tangency checks on grid functions.
const SPHERE_TOL: f64 = 1e-8;

/// A weighted point set for integrating functions on R^1 or R^2.
///
/// One-dimensional grids can carry an algebraic tail correction: beyond
/// each end the integrand is extrapolated as a power law fitted to the two
/// outermost nodes.
#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    tail_correction: bool,
}

fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = 0.5 * (nodes[i + 1] - nodes[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

impl Grid {
    /// Trapezoid rule on strictly increasing nodes.
    pub fn trapezoid(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidParameter("grid needs at least two nodes".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("grid nodes must be finite and strictly increasing".into()));
        }
        let weights = trapezoid_weights(&nodes);
        Ok(Self { dim: 1, coords: nodes, weights, tail_correction: false })
    }

    pub fn uniform(lower: f64, upper: f64, points: usize) -> Result<Self> {
        if points < 2 || !(upper > lower) {
            return Err(Error::InvalidParameter(format!("uniform grid on [{lower}, {upper}] with {points} points")));
        }
        let h = (upper - lower) / (points - 1) as f64;
        Self::trapezoid((0..points).map(|i| lower + h * i as f64).collect())
    }

    /// Nodes `center + scale * sinh(t)` with `t` uniform, dense near the
    /// centre and sparse in the tails. Weights are the trapezoid rule in
    /// `t`, which converges geometrically for smooth integrands.
    pub fn sinh(center: f64, half_width: f64, scale: f64, points: usize) -> Result<Self> {
        if points < 3 || !(half_width > 0.0) || !(scale > 0.0) {
            return Err(Error::InvalidParameter("sinh grid parameters".into()));
        }
        let t_max = (half_width / scale).asinh();
        let h = 2.0 * t_max / (points - 1) as f64;
        let ts: Vec<f64> = (0..points).map(|i| -t_max + h * i as f64).collect();
        let mut grid = Self::trapezoid(ts.iter().map(|t| center + scale * t.sinh()).collect())?;
        for (i, (w, t)) in grid.weights.iter_mut().zip(&ts).enumerate() {
            let end = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
            *w = end * h * scale * t.cosh();
        }
        Ok(grid)
    }

    /// Sinh grids around several centres. Each centre owns the cell up to
    /// the midpoints with its neighbours, integrated by Simpson's rule in
    /// the sinh variable at the step of [`Grid::sinh`]. A single centre
    /// gives exactly [`Grid::sinh`].
    pub fn sinh_union(centers: &[f64], half_width: f64, scale: f64, points: usize) -> Result<Self> {
        let mut cs: Vec<f64> = centers.to_vec();
        if cs.is_empty() || cs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("sinh union needs finite centres".into()));
        }
        cs.sort_by(f64::total_cmp);
        cs.dedup_by(|b, a| *b - *a < 1e-9 * scale);
        if cs.len() == 1 {
            return Self::sinh(cs[0], half_width, scale, points);
        }
        let base = Self::sinh(0.0, half_width, scale, points)?;
        let step = 2.0 * (half_width / scale).asinh() / (points - 1) as f64;
        let mut coords: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (k, c) in cs.iter().enumerate() {
            let lo = if k == 0 { c - half_width } else { 0.5 * (cs[k - 1] + c) };
            let hi = if k + 1 == cs.len() { c + half_width } else { 0.5 * (c + cs[k + 1]) };
            let (ta, tb) = (((lo - c) / scale).asinh(), ((hi - c) / scale).asinh());
            let intervals = (((tb - ta) / step).ceil() as usize).max(2).next_multiple_of(2);
            let h = (tb - ta) / intervals as f64;
            for i in 0..=intervals {
                let t = ta + h * i as f64;
                let simpson = if i == 0 || i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let w = simpson * h / 3.0 * scale * t.cosh();
                let x = if i == 0 {
                    lo
                } else if i == intervals {
                    hi
                } else {
                    c + scale * t.sinh()
                };
                if i == 0 && k > 0 {
                    *weights.last_mut().expect("previous cell") += w;
                } else {
                    coords.push(x);
                    weights.push(w);
                }
            }
        }
        if coords.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("sinh union produced unsorted nodes".into()));
        }
        Ok(Self { coords, weights, ..base })
    }

    pub fn with_tail_correction(mut self) -> Self {
        self.tail_correction = self.dim == 1;
        self
    }

    /// Tensor product of two one-dimensional grids.
    pub fn product(a: &Grid, b: &Grid) -> Result<Self> {
        if a.dim != 1 || b.dim != 1 {
            return Err(Error::InvalidParameter("product of 1-D grids only".into()));
        }
        let mut coords = Vec::with_capacity(2 * a.len() * b.len());
        let mut weights = Vec::with_capacity(a.len() * b.len());
        for (x, wx) in a.coords.iter().zip(&a.weights) {
            for (y, wy) in b.coords.iter().zip(&b.weights) {
                coords.push(*x);
                coords.push(*y);
                weights.push(wx * wy);
            }
        }
        Ok(Self { dim: 2, coords, weights, tail_correction: false })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    pub fn eval(&self, f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        self.points().map(f).collect()
    }

    /// Weighted sum of `values`, plus extrapolated tails when enabled.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let body: f64 = self.weights.iter().zip(values).map(|(w, v)| w * v).sum();
        if !self.tail_correction || self.len() < 4 {
            return body;
        }
        let n = self.len();
        let x = &self.coords;
        body + power_tail(x[n - 1], values[n - 1], x[n - 2], values[n - 2])
            + power_tail(-x[0], values[0], -x[1], values[1])
    }
}

/// Integral of `v * (t / x)^(-alpha)` over `[x, inf)`, with `alpha` fitted
/// through `(x_in, v_in)` and `(x, v)`. Zero when the fit is not a decaying
/// power law with finite mass.
fn power_tail(x: f64, v: f64, x_in: f64, v_in: f64) -> f64 {
    if !(x > 0.0 && x_in > 0.0 && v > 0.0 && v_in > v) {
        return 0.0;
    }
    let alpha = (v_in / v).ln() / (x / x_in).ln();
    if alpha > 1.0 {
        v * x / (alpha - 1.0)
    } else {
        0.0
    }
}

/// Values of a function on a shared grid, treated as an element of L2.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        ensure_dim(grid.len(), values.len())?;
        Ok(Self { grid, values })
    }

    /// `sqrt(f)` on the grid, renormalized to unit norm.
    pub fn sqrt_density(grid: Arc<Grid>, f: &dyn Density) -> Result<Self> {
        ensure_dim(grid.dim(), f.dim())?;
        let values = grid.eval(|x| (0.5 * f.ln_pdf(x)).exp());
        let mut out = Self { grid, values };
        let norm = out.norm();
        if !(norm > 0.0) {
            return Err(Error::DegenerateSupport("density vanishes on the grid".into()));
        }
        out.values.iter_mut().for_each(|v| *v /= norm);
        Ok(out)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.len() == other.grid.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.grid.len(), got: other.grid.len() })
        }
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.grid.weights().iter().zip(self.values.iter().zip(&other.values)).map(|(w, (a, b))| w * a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| a * v).collect() }
    }

    fn check_unit(&self) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > SPHERE_TOL {
            return Err(Error::InvalidParameter(format!("point has norm {n}, expected 1")));
        }
        Ok(())
    }

    /// Geodesic distance `arccos <self, other>` on the unit sphere.
    pub fn distance(&self, other: &Self) -> f64 {
        self.inner(other).clamp(-1.0, 1.0).acos()
    }

    /// Moves along the great circle from `self` in the direction `tangent`.
    pub fn exp_map(&self, tangent: &Self) -> Result<Self> {
        self.same_grid(tangent)?;
        self.check_unit()?;
        if self.inner(tangent).abs() > SPHERE_TOL {
            return Err(Error::InvalidParameter("tangent is not orthogonal to the base point".into()));
        }
        let len = tangent.norm();
        if len == 0.0 {
            return Ok(self.clone());
        }
        Ok(self.combine(len.cos(), tangent, len.sin() / len))
    }

    /// Tangent at `self` pointing to `target`, with norm equal to their
    /// distance.
    pub fn log_map(&self, target: &Self) -> Result<Self> {
        self.same_grid(target)?;
        self.check_unit()?;
        target.check_unit()?;
        let c = self.inner(target).clamp(-1.0, 1.0);
        let theta = c.acos();
        if theta == 0.0 || theta.sin() == 0.0 {
            return Ok(self.scaled(0.0));
        }
        Ok(target.combine(theta / theta.sin(), self, -c * theta / theta.sin()))
    }

    /// Transports `tangent` from the tangent space at `self` to the one at
    /// `target` along the connecting geodesic.
    pub fn parallel_transport(&self, tangent: &Self, target: &Self) -> Result<Self> {
        self.same_grid(tangent)?;
        self.same_grid(target)?;
        let sum = self.combine(1.0, target, 1.0);
        let sq = sum.inner(&sum);
        if sq < 1e-24 {
            return Err(Error::InvalidParameter("antipodal points have no unique geodesic".into()));
        }
        let k = 2.0 * tangent.inner(target) / sq;
        Ok(tangent.combine(1.0, &sum, -k))
    }
}
