//! Experiment configuration files. TOML, unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use geomc::varsel::{DesignKind, RwKind};

use crate::error::{CliError, CliResult};

pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, toml::de::Error> {
    toml::from_str(text)
}

fn default_replicates() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_max_lag() -> usize {
    geomc::diagnostics::DEFAULT_MAX_LAG
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

/// `variance` for an isotropic covariance or a full `cov`; exactly one.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovSpec {
    pub variance: Option<f64>,
    pub cov: Option<Vec<Vec<f64>>>,
}

impl CovSpec {
    pub fn resolve(&self, dim: usize, field: &str) -> CliResult<DMatrix<f64>> {
        match (&self.variance, &self.cov) {
            (Some(v), None) => Ok(DMatrix::from_diagonal_element(dim, dim, *v)),
            (None, Some(rows)) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(CliError::invalid(field, format!("cov must be {dim} x {dim}")));
                }
                Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
            }
            _ => Err(CliError::invalid(field, "give exactly one of `variance` and `cov`")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    StandardNormal,
    Normal {
        mean: f64,
        variance: f64,
    },
    StudentT {
        nu: f64,
        #[serde(default)]
        loc: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Cauchy {
        #[serde(default)]
        loc: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    /// Equal mixture of `N((0,0), I)` and `N((10,10), 2I)`.
    BimodalMixture,
    SixMode,
    /// Logistic regression posterior from a CSV file.
    Logistic {
        data: PathBuf,
        response: String,
        #[serde(default = "yes")]
        intercept: bool,
    },
    /// Logistic regression posterior on simulated data.
    SimulatedLogistic {
        m: usize,
        p: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    RandomWalk {
        variance: Option<f64>,
        cov: Option<Vec<Vec<f64>>>,
    },
    IndependentNormal {
        mean: Vec<f64>,
        variance: Option<f64>,
        cov: Option<Vec<Vec<f64>>>,
    },
    IndependentT {
        nu: f64,
        #[serde(default)]
        loc: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Mala {
        h: f64,
    },
    Mmala {
        h: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    #[default]
    Metropolis,
    /// Full mixture proposal, one accept step.
    Geometric,
    /// Pick a direction, then accept against that component alone.
    MixtureKernel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DirectionSpec {
    Normal {
        mean: Vec<f64>,
        variance: Option<f64>,
        cov: Option<Vec<Vec<f64>>>,
    },
    StudentT {
        nu: f64,
        #[serde(default)]
        loc: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Cauchy {
        #[serde(default)]
        loc: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// One direction per component of a Gaussian-mixture target.
    TargetComponents,
    /// `N(mode, inflate * H⁻¹)` at the logistic posterior mode.
    PosteriorMode {
        #[serde(default = "one")]
        inflate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AffinitySpec {
    #[default]
    ClosedForm,
    LocalQuadrature {
        half_width: f64,
        #[serde(default = "one")]
        scale: f64,
        points: usize,
        #[serde(default)]
        anchors: Vec<f64>,
    },
    MonteCarlo {
        samples: usize,
    },
    Fixed {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricSpec {
    pub epsilon: f64,
    pub directions: Vec<DirectionSpec>,
    /// Direction weights; uniform when omitted.
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub affinity: AffinitySpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self { max_lag: default_max_lag() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub iterations: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub start: Vec<f64>,
    #[serde(default)]
    pub sampler: SamplerKind,
    /// One block per coordinate, each running the configured sampler on
    /// its full conditional.
    #[serde(default)]
    pub gibbs: bool,
    pub target: TargetSpec,
    pub kernel: KernelSpec,
    pub geometric: Option<GeometricSpec>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub replicates: Option<usize>,
    pub epsilon: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &RunOverrides) -> CliResult<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(n) = o.iterations {
            self.iterations = n;
        }
        if let Some(r) = o.replicates {
            self.replicates = r;
        }
        if let Some(d) = &o.out {
            self.output.dir.clone_from(d);
        }
        if let Some(e) = o.epsilon {
            match &mut self.geometric {
                Some(g) => g.epsilon = e,
                None => return Err(CliError::invalid("epsilon", "no [geometric] section to override")),
            }
        }
        Ok(())
    }

    /// Checks that do not need the target built.
    pub fn validate(&self) -> CliResult<()> {
        if self.iterations < 2 {
            return Err(CliError::invalid("iterations", "must be at least 2"));
        }
        if self.replicates == 0 {
            return Err(CliError::invalid("replicates", "must be at least 1"));
        }
        if self.start.iter().any(|v| !v.is_finite()) {
            return Err(CliError::invalid("start", "entries must be finite"));
        }
        match (&self.sampler, &self.geometric) {
            (SamplerKind::Metropolis, _) => {}
            (_, None) => return Err(CliError::invalid("geometric", "required by geometric samplers")),
            (_, Some(g)) => {
                if !(0.0..=1.0).contains(&g.epsilon) {
                    return Err(CliError::invalid("geometric.epsilon", format!("{} is outside [0, 1]", g.epsilon)));
                }
                if g.directions.is_empty() {
                    return Err(CliError::invalid("geometric.directions", "at least one direction is needed"));
                }
            }
        }
        if self.gibbs && matches!(self.kernel, KernelSpec::Mala { .. } | KernelSpec::Mmala { .. }) {
            return Err(CliError::invalid("kernel.kind", "gradient kernels are not available within Gibbs"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DesignSource {
    Simulated {
        design: DesignKind,
        p: usize,
        m: usize,
        r2: f64,
    },
    /// Header row; `response` names the response column.
    Csv {
        path: PathBuf,
        response: String,
    },
    /// Binary column-compressed design plus a one-column response file.
    Sparse {
        path: PathBuf,
        response: PathBuf,
    },
}

fn default_rw() -> RwKind {
    RwKind::Symmetric
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarselConfig {
    pub seed: u64,
    pub iterations: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub epsilon: f64,
    #[serde(default = "default_rw")]
    pub proposal: RwKind,
    /// Defaults to `m / p²`.
    pub lambda: Option<f64>,
    /// Defaults to `sqrt(m) / p`.
    pub omega: Option<f64>,
    /// Starting model as 0-based indices.
    #[serde(default)]
    pub start: Vec<usize>,
    pub data: DesignSource,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Default)]
pub struct VarselOverrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub replicates: Option<usize>,
    pub epsilon: Option<f64>,
    pub out: Option<PathBuf>,
}

impl VarselConfig {
    pub fn apply(&mut self, o: &VarselOverrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(n) = o.iterations {
            self.iterations = n;
        }
        if let Some(r) = o.replicates {
            self.replicates = r;
        }
        if let Some(e) = o.epsilon {
            self.epsilon = e;
        }
        if let Some(d) = &o.out {
            self.output.dir.clone_from(d);
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.iterations == 0 {
            return Err(CliError::invalid("iterations", "must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(CliError::invalid("replicates", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(CliError::invalid("epsilon", format!("{} is outside [0, 1]", self.epsilon)));
        }
        self.proposal.validate().map_err(|e| CliError::invalid("proposal", e))?;
        if let DesignSource::Simulated { r2, .. } = &self.data {
            if !(*r2 > 0.0 && *r2 < 1.0) {
                return Err(CliError::invalid("data.r2", "must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 1
iterations = 10
start = [0.0]
[target]
kind = "standard-normal"
[kernel]
kind = "random-walk"
variance = 1.0
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c: ExperimentConfig = parse(MINIMAL).unwrap();
        assert_eq!(c.replicates, 1);
        assert_eq!(c.sampler, SamplerKind::Metropolis);
        assert_eq!(c.output.dir, PathBuf::from("out"));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = MINIMAL.replace("variance = 1.0", "variance = 1.0\nstep = 2");
        let err = parse::<ExperimentConfig>(&text).unwrap_err().to_string();
        assert!(err.contains("step"), "{err}");
        assert!(err.contains("line"), "{err}");
        let top = format!("bogus = 1\n{MINIMAL}");
        assert!(parse::<ExperimentConfig>(&top).is_err());
    }

    #[test]
    fn unknown_kernel_kind_is_rejected() {
        let text = MINIMAL.replace("\"random-walk\"", "\"hamiltonian\"");
        let err = parse::<ExperimentConfig>(&text).unwrap_err().to_string();
        assert!(err.contains("hamiltonian"), "{err}");
    }

    #[test]
    fn overrides_replace_config_values() {
        let mut c: ExperimentConfig = parse(MINIMAL).unwrap();
        let o = RunOverrides { seed: Some(9), iterations: Some(50), ..Default::default() };
        c.apply(&o).unwrap();
        assert_eq!((c.seed, c.iterations), (9, 50));
        let eps = RunOverrides { epsilon: Some(0.2), ..Default::default() };
        assert!(c.apply(&eps).is_err());
    }

    #[test]
    fn cov_spec_needs_exactly_one_form() {
        let both = CovSpec { variance: Some(1.0), cov: Some(vec![vec![1.0]]) };
        assert!(both.resolve(1, "x").is_err());
        assert!(CovSpec::default().resolve(1, "x").is_err());
        let iso = CovSpec { variance: Some(2.0), cov: None }.resolve(3, "x").unwrap();
        assert_eq!(iso, DMatrix::from_diagonal_element(3, 3, 2.0));
    }
}
