//! Shipped finite-state fixtures and the checks run against them.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::chain::{mh_transition_matrix, FiniteChain, BALANCE_TOL};
use super::ergodicity::{uniform_ergodicity_bound, MAX_TV_STEPS};
use super::peskun::{algorithm1_matrix, algorithm2_matrix, c_epsilon_bound, mixture_proposal, peskun_constant};
use super::theorem::{verify_theorem1, SLACK_TOL};
use crate::error::{Error, Result};

pub const DEFAULT_TRIALS: usize = 100;

/// A base proposal, a set of directions and a target on a finite space.
/// Matrices are stored row-major as nested vectors; row `x` is the pmf
/// `·|x`. `geometric` optionally overrides the assembled geometric chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    pub psi: Vec<f64>,
    pub base: Vec<Vec<f64>>,
    pub directions: Vec<Vec<Vec<f64>>>,
    pub weights: Vec<f64>,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometric: Option<Vec<Vec<f64>>>,
}

fn to_matrix(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
    }
    Ok(DMatrix::from_fn(n, n, |x, y| rows[x][y]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl Fixture {
    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn base_matrix(&self) -> Result<DMatrix<f64>> {
        to_matrix(&self.base, self.len())
    }

    pub fn direction_matrices(&self) -> Result<Vec<DMatrix<f64>>> {
        self.directions.iter().map(|d| to_matrix(d, self.len())).collect()
    }

    pub fn base_chain(&self) -> Result<FiniteChain> {
        mh_transition_matrix(&self.base_matrix()?, &self.psi)
    }

    pub fn algorithm1(&self) -> Result<FiniteChain> {
        algorithm1_matrix(&self.base_matrix()?, &self.direction_matrices()?, &self.weights, self.epsilon, &self.psi)
    }

    pub fn algorithm2(&self) -> Result<FiniteChain> {
        algorithm2_matrix(&self.base_matrix()?, &self.direction_matrices()?, &self.weights, self.epsilon, &self.psi)
    }

    /// The override when present, otherwise the full-mixture chain.
    pub fn geometric_chain(&self) -> Result<FiniteChain> {
        match &self.geometric {
            Some(rows) => {
                let p = to_matrix(rows, self.len())?;
                let base = self.base_chain()?;
                FiniteChain::new(p, base.stationary().clone())
            }
            None => self.algorithm1(),
        }
    }

    pub fn c_epsilon(&self) -> Result<f64> {
        c_epsilon_bound(&self.base_matrix()?, &self.direction_matrices()?, &self.weights, self.epsilon)
    }

    /// Whether every row of the base and of each direction is the same pmf.
    pub fn is_state_free(&self) -> bool {
        let same = |m: &Vec<Vec<f64>>| m.iter().all(|r| r == &m[0]);
        same(&self.base) && self.directions.iter().all(same)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, geometric: None, ..self.clone() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub slack: f64,
    pub detail: String,
}

impl Check {
    fn slack(name: &'static str, slack: f64, tol: f64) -> Self {
        Self { name, passed: slack >= -tol, slack, detail: String::new() }
    }

    fn failed(name: &'static str, detail: String) -> Self {
        Self { name, passed: false, slack: f64::NEG_INFINITY, detail }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureReport {
    pub name: String,
    pub states: usize,
    pub peskun: f64,
    pub c_epsilon: f64,
    pub checks: Vec<Check>,
}

impl FixtureReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn off_diagonal_min_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut worst = f64::INFINITY;
    for x in 0..a.nrows() {
        for y in 0..a.ncols() {
            if x != y {
                worst = worst.min(a[(x, y)] - b[(x, y)]);
            }
        }
    }
    worst
}

/// Runs every applicable check on one fixture. Invalid fixture data is an
/// error; a chain that fails validation is reported as a failed check.
pub fn verify_fixture(fx: &Fixture, trials: usize, seed: u64) -> Result<FixtureReport> {
    let base = fx.base_chain()?;
    let c_eps = fx.c_epsilon()?;
    let mut checks = Vec::new();
    let report = |checks: Vec<Check>, peskun: f64| FixtureReport {
        name: fx.name.clone(),
        states: fx.len(),
        peskun,
        c_epsilon: c_eps,
        checks,
    };
    let geo = match fx.geometric_chain() {
        Ok(chain) => chain,
        Err(e) => {
            let name = if e.to_string().contains("stationarity") { "stationarity" } else { "row-stochasticity" };
            checks.push(Check::failed(name, e.to_string()));
            return Ok(report(checks, f64::NAN));
        }
    };
    checks.push(Check::slack(
        "stationarity",
        -(geo.transition().tr_mul(geo.stationary()) - geo.stationary()).amax(),
        BALANCE_TOL,
    ));
    checks.push(Check::slack("detailed-balance", -geo.balance_error(), BALANCE_TOL));
    if !geo.is_reversible() {
        let peskun = peskun_constant(geo.transition(), base.transition())?;
        return Ok(report(checks, peskun));
    }
    let zero = fx.with_epsilon(0.0).algorithm1()?;
    checks.push(Check::slack("epsilon-zero", -(zero.transition() - base.transition()).amax(), 1e-12));
    let ord = verify_theorem1(&geo, &base, trials, seed)?;
    checks.push(Check::slack("theorem1-covariance", ord.covariance_slack, SLACK_TOL));
    checks.push(Check::slack("theorem1-gap", ord.gap_slack, SLACK_TOL));
    checks.push(Check::slack("theorem1-variance", ord.variance_slack, SLACK_TOL));
    checks.push(Check::slack("theorem2-peskun", ord.peskun - c_eps, SLACK_TOL));
    if fx.geometric.is_none() {
        let alg2 = fx.algorithm2()?;
        checks.push(Check::slack(
            "theorem2-peskun-alg2",
            peskun_constant(alg2.transition(), base.transition())? - c_eps,
            SLACK_TOL,
        ));
        checks.push(Check::slack(
            "remark1-domination",
            off_diagonal_min_diff(geo.transition(), alg2.transition()),
            1e-12,
        ));
        if fx.is_state_free() {
            let phi = mixture_proposal(&fx.base_matrix()?, &fx.direction_matrices()?, &fx.weights, fx.epsilon)?;
            let phi: Vec<f64> = phi.row(0).iter().copied().collect();
            let ue = uniform_ergodicity_bound(&phi, &fx.psi, MAX_TV_STEPS)?;
            let mut check = Check::slack("prop3-tv-bound", ue.worst_slack().unwrap_or(f64::NEG_INFINITY), 1e-12);
            check.detail = format!("beta = {:.6}", ue.beta);
            checks.push(check);
        }
    }
    Ok(report(checks, ord.peskun))
}

pub fn verify_fixtures(fixtures: &[Fixture], trials: usize, seed: u64) -> Result<Vec<FixtureReport>> {
    if fixtures.is_empty() {
        return Err(Error::InvalidParameter("empty fixture set".into()));
    }
    fixtures.iter().enumerate().map(|(i, fx)| verify_fixture(fx, trials, seed.wrapping_add(i as u64))).collect()
}

enum Shape {
    Bimodal,
    Random,
    Decay,
}

fn target(shape: Shape, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|x| {
            let x = x as f64;
            match shape {
                Shape::Bimodal => {
                    let (a, b) = (n as f64 * 0.25, n as f64 * 0.7);
                    (-(x - a).powi(2) / 8.0).exp() + 0.6 * (-(x - b).powi(2) / 8.0).exp() + 1e-3
                }
                Shape::Random => rng.sample::<f64, _>(StandardNormal).exp(),
                Shape::Decay => 0.8f64.powf(x),
            }
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn ring_walk(n: usize, reach: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |x, y| {
        let d = (x + n - y) % n;
        if d != 0 && (d <= reach || n - d <= reach) {
            1.0 / (2 * reach) as f64
        } else {
            0.0
        }
    })
}

fn independent(row: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(row.len(), row.len(), |_, y| row[y])
}

fn dense_random(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.05..1.0));
    for mut r in m.row_iter_mut() {
        let s = r.sum();
        r /= s;
    }
    m
}

/// `g(y|x) ∝ f(y|x) psi(y)^power`.
fn informed(f: &DMatrix<f64>, psi: &[f64], power: f64) -> DMatrix<f64> {
    let mut g = DMatrix::from_fn(f.nrows(), f.ncols(), |x, y| f[(x, y)] * psi[y].powf(power));
    for mut r in g.row_iter_mut() {
        let s = r.sum();
        r /= s;
    }
    g
}

fn tempered(psi: &[f64], power: f64) -> Vec<f64> {
    let raw: Vec<f64> = psi.iter().map(|p| p.powf(power)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn shifted(psi: &[f64], by: usize) -> Vec<f64> {
    (0..psi.len()).map(|y| psi[(y + by) % psi.len()]).collect()
}

fn fixture(
    name: &str,
    psi: Vec<f64>,
    base: DMatrix<f64>,
    dirs: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
    epsilon: f64,
) -> Fixture {
    Fixture {
        name: name.into(),
        psi,
        base: to_rows(&base),
        directions: dirs.iter().map(to_rows).collect(),
        weights,
        epsilon,
        geometric: None,
    }
}

/// Ten fixtures: six on 20 states and four on 10 states, mixing local,
/// independent and dense bases with global and locally informed directions.
pub fn default_fixtures() -> Vec<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_241);
    let mut out = Vec::new();

    let psi = target(Shape::Bimodal, 20, &mut rng);
    out.push(fixture(
        "n20-bimodal-ring1-target",
        psi.clone(),
        ring_walk(20, 1),
        vec![independent(&psi)],
        vec![1.0],
        0.5,
    ));
    let f = ring_walk(20, 2);
    out.push(fixture(
        "n20-bimodal-ring2-informed",
        psi,
        f.clone(),
        vec![informed(&f, &target(Shape::Bimodal, 20, &mut rng), 1.0)],
        vec![1.0],
        1.0,
    ));

    let psi = target(Shape::Random, 20, &mut rng);
    let unif = vec![1.0 / 20.0; 20];
    out.push(fixture(
        "n20-random-independent-target",
        psi.clone(),
        independent(&unif),
        vec![independent(&psi)],
        vec![1.0],
        0.5,
    ));
    out.push(fixture(
        "n20-random-independent-two",
        psi.clone(),
        independent(&unif),
        vec![independent(&psi), independent(&tempered(&psi, 0.5))],
        vec![0.6, 0.4],
        0.75,
    ));

    let psi = target(Shape::Decay, 20, &mut rng);
    let f = dense_random(20, &mut rng);
    out.push(fixture(
        "n20-decay-dense-informed-shifted",
        psi.clone(),
        f.clone(),
        vec![informed(&f, &psi, 1.0), independent(&shifted(&psi, 3))],
        vec![0.5, 0.5],
        0.3,
    ));
    out.push(fixture(
        "n20-decay-ring1-tempered",
        psi.clone(),
        ring_walk(20, 1),
        vec![independent(&tempered(&psi, 0.5))],
        vec![1.0],
        1.0,
    ));

    let psi = target(Shape::Random, 10, &mut rng);
    let f = ring_walk(10, 1);
    out.push(fixture(
        "n10-random-ring1-informed",
        psi.clone(),
        f.clone(),
        vec![informed(&f, &psi, 0.5)],
        vec![1.0],
        0.25,
    ));
    out.push(fixture(
        "n10-random-dense-target",
        psi.clone(),
        dense_random(10, &mut rng),
        vec![independent(&psi)],
        vec![1.0],
        0.6,
    ));

    let psi = target(Shape::Bimodal, 10, &mut rng);
    out.push(fixture(
        "n10-bimodal-independent-shifted",
        psi.clone(),
        independent(&[0.1; 10]),
        vec![independent(&shifted(&psi, 2))],
        vec![1.0],
        1.0,
    ));
    let psi = target(Shape::Decay, 10, &mut rng);
    let f = ring_walk(10, 2);
    out.push(fixture(
        "n10-decay-ring2-target-informed",
        psi.clone(),
        f.clone(),
        vec![independent(&psi), informed(&f, &psi, 1.0)],
        vec![0.3, 0.7],
        0.9,
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_pass() {
        let fx = default_fixtures();
        assert_eq!(fx.len(), 10);
        for r in verify_fixtures(&fx, 20, 7).unwrap() {
            assert!(r.passed(), "{}: {:?}", r.name, r.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn doctored_matrix_fails_named_check() {
        let mut fx = default_fixtures().remove(0);
        let mut p = fx.algorithm1().unwrap().transition().clone();
        // move off-diagonal mass onto the diagonal, keeping balance
        let n = p.nrows();
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    p[(x, y)] *= 0.1;
                }
            }
            let off: f64 = (0..n).filter(|y| *y != x).map(|y| p[(x, y)]).sum();
            p[(x, x)] = 1.0 - off;
        }
        fx.geometric = Some(to_rows(&p));
        let r = verify_fixture(&fx, 10, 1).unwrap();
        assert!(!r.passed());
        assert!(r.failures().any(|c| c.name == "theorem2-peskun"));
    }

    #[test]
    fn json_round_trip() {
        let fx = default_fixtures().remove(6);
        let s = serde_json::to_string(&fx).unwrap();
        assert_eq!(serde_json::from_str::<Fixture>(&s).unwrap(), fx);
    }

    #[test]
    fn empty_set_is_error() {
        assert!(verify_fixtures(&[], 10, 1).is_err());
    }
}
