//! Turns a validated configuration into a target and a sampler.

use std::fs::File;
use std::sync::Arc;

use nalgebra::DVector;

use geomc::kernels::{
    make_base_kernel, BaseKernelSpec, GeometricMetropolis, Gibbs, GibbsBlock, Independent, Metropolis,
    MixtureKernelMetropolis, ProposalKernel, RandomWalk,
};
use geomc::targets::{bimodal_mixture, LogisticPosterior, MixtureTarget, SixModeTarget};
use geomc::{AffinityMode, ConditionalDensity, DirectionSet, Gaussian, GeometricProposal, Sampler, StudentT, Target};

use crate::config::{AffinitySpec, CovSpec, DirectionSpec, ExperimentConfig, KernelSpec, SamplerKind, TargetSpec};
use crate::error::{CliError, CliResult};

/// How states are assigned to modes for occupancy reporting.
#[derive(Clone)]
pub enum Basins {
    Mixture(MixtureTarget),
    SixMode,
}

impl Basins {
    pub fn count(&self) -> usize {
        match self {
            Basins::Mixture(m) => m.components().len(),
            Basins::SixMode => 6,
        }
    }

    pub fn label(&self, x: &[f64]) -> usize {
        match self {
            Basins::Mixture(m) => m.component_of(x),
            Basins::SixMode => SixModeTarget::basin(x[1]),
        }
    }
}

pub struct BuiltTarget {
    pub target: Arc<dyn Target>,
    pub basins: Option<Basins>,
    mixture: Option<MixtureTarget>,
    logistic: Option<Arc<LogisticPosterior>>,
}

pub fn build_target(spec: &TargetSpec) -> CliResult<BuiltTarget> {
    let bad = |e: geomc::Error| CliError::invalid("target", e);
    let plain = |target: Arc<dyn Target>| BuiltTarget { target, basins: None, mixture: None, logistic: None };
    Ok(match spec {
        TargetSpec::StandardNormal => plain(Arc::new(Gaussian::univariate(0.0, 1.0).map_err(bad)?)),
        TargetSpec::Normal { mean, variance } => plain(Arc::new(Gaussian::univariate(*mean, *variance).map_err(bad)?)),
        TargetSpec::StudentT { nu, loc, scale } => plain(Arc::new(StudentT::new(*nu, *loc, *scale).map_err(bad)?)),
        TargetSpec::Cauchy { loc, scale } => plain(Arc::new(StudentT::cauchy(*loc, *scale).map_err(bad)?)),
        TargetSpec::Gaussian { mean, cov } => {
            let d = mean.len();
            let cov = CovSpec { variance: None, cov: Some(cov.clone()) }.resolve(d, "target.cov")?;
            plain(Arc::new(Gaussian::new(DVector::from_vec(mean.clone()), cov).map_err(bad)?))
        }
        TargetSpec::BimodalMixture => {
            let m = bimodal_mixture().map_err(bad)?;
            BuiltTarget {
                target: Arc::new(m.clone()),
                basins: Some(Basins::Mixture(m.clone())),
                mixture: Some(m),
                logistic: None,
            }
        }
        TargetSpec::SixMode => BuiltTarget {
            target: Arc::new(SixModeTarget),
            basins: Some(Basins::SixMode),
            mixture: None,
            logistic: None,
        },
        TargetSpec::Logistic { data, response, intercept } => {
            let file =
                File::open(data).map_err(|e| CliError::invalid("target.data", format!("{}: {e}", data.display())))?;
            let post = Arc::new(LogisticPosterior::from_csv(file, response, *intercept).map_err(bad)?);
            BuiltTarget { target: post.clone(), basins: None, mixture: None, logistic: Some(post) }
        }
        TargetSpec::SimulatedLogistic { m, p, seed } => {
            let (post, _) = LogisticPosterior::simulate(*m, *p, *seed).map_err(bad)?;
            let post = Arc::new(post);
            BuiltTarget { target: post.clone(), basins: None, mixture: None, logistic: Some(post) }
        }
    })
}

fn base_spec(spec: &KernelSpec, dim: usize) -> CliResult<BaseKernelSpec> {
    Ok(match spec {
        KernelSpec::RandomWalk { variance, cov } => BaseKernelSpec::RandomWalk {
            cov: CovSpec { variance: *variance, cov: cov.clone() }.resolve(dim, "kernel")?,
        },
        KernelSpec::IndependentNormal { mean, variance, cov } => BaseKernelSpec::IndependentGaussian {
            mean: mean.clone(),
            cov: CovSpec { variance: *variance, cov: cov.clone() }.resolve(mean.len(), "kernel")?,
        },
        KernelSpec::IndependentT { nu, loc, scale } => {
            BaseKernelSpec::IndependentStudentT { nu: *nu, loc: *loc, scale: *scale }
        }
        KernelSpec::Mala { h } => BaseKernelSpec::Mala { h: *h },
        KernelSpec::Mmala { h } => BaseKernelSpec::Mmala { h: *h },
    })
}

/// Base kernel on a block of `dim` coordinates. Gradient kernels need the
/// full target and are only built when `dim` is its dimension.
fn base_kernel(spec: &KernelSpec, dim: usize, target: &Arc<dyn Target>) -> CliResult<Arc<dyn ProposalKernel>> {
    let bad = |e: geomc::Error| CliError::invalid("kernel", e);
    let spec = base_spec(spec, dim)?;
    if dim == target.dim() {
        return make_base_kernel(&spec, target.clone()).map_err(bad);
    }
    match spec {
        BaseKernelSpec::RandomWalk { cov } => Ok(Arc::new(RandomWalk::new(cov).map_err(bad)?)),
        BaseKernelSpec::IndependentGaussian { mean, cov } => {
            if mean.len() != dim {
                return Err(CliError::invalid("kernel.mean", format!("length must be {dim}")));
            }
            let g = Gaussian::new(DVector::from_vec(mean), cov).map_err(bad)?;
            Ok(Arc::new(Independent::new(Arc::new(g))))
        }
        BaseKernelSpec::IndependentStudentT { nu, loc, scale } => {
            Ok(Arc::new(Independent::new(Arc::new(StudentT::new(nu, loc, scale).map_err(bad)?))))
        }
        BaseKernelSpec::Mala { .. } | BaseKernelSpec::Mmala { .. } => {
            Err(CliError::invalid("kernel.kind", "gradient kernels need the full target"))
        }
    }
}

fn directions(specs: &[DirectionSpec], built: &BuiltTarget) -> CliResult<Vec<Arc<dyn ConditionalDensity>>> {
    let bad = |e: geomc::Error| CliError::invalid("geometric.directions", e);
    let mut out: Vec<Arc<dyn ConditionalDensity>> = Vec::new();
    for spec in specs {
        match spec {
            DirectionSpec::Normal { mean, variance, cov } => {
                let cov =
                    CovSpec { variance: *variance, cov: cov.clone() }.resolve(mean.len(), "geometric.directions")?;
                out.push(Arc::new(Gaussian::new(DVector::from_vec(mean.clone()), cov).map_err(bad)?));
            }
            DirectionSpec::StudentT { nu, loc, scale } => {
                out.push(Arc::new(StudentT::new(*nu, *loc, *scale).map_err(bad)?));
            }
            DirectionSpec::Cauchy { loc, scale } => out.push(Arc::new(StudentT::cauchy(*loc, *scale).map_err(bad)?)),
            DirectionSpec::TargetComponents => {
                let m = built.mixture.as_ref().ok_or_else(|| {
                    CliError::invalid("geometric.directions", "target-components needs a mixture target")
                })?;
                out.extend(m.components().iter().map(|c| Arc::new(c.clone()) as Arc<dyn ConditionalDensity>));
            }
            DirectionSpec::PosteriorMode { inflate } => {
                let post = built.logistic.as_ref().ok_or_else(|| {
                    CliError::invalid("geometric.directions", "posterior-mode needs a logistic target")
                })?;
                let (mode, cov) =
                    post.posterior_mode().map_err(|e| CliError::runtime("locating the posterior mode", e))?;
                out.push(Arc::new(Gaussian::new(mode, cov * *inflate).map_err(bad)?));
            }
        }
    }
    Ok(out)
}

fn affinity_mode(spec: &AffinitySpec) -> AffinityMode {
    match spec {
        AffinitySpec::ClosedForm => AffinityMode::ClosedForm,
        AffinitySpec::LocalQuadrature { half_width, scale, points, anchors } => AffinityMode::LocalQuadrature {
            half_width: *half_width,
            scale: *scale,
            points: *points,
            anchors: anchors.clone(),
        },
        AffinitySpec::MonteCarlo { samples } => AffinityMode::MonteCarlo { samples: *samples },
        AffinitySpec::Fixed { values } => AffinityMode::Fixed(values.clone()),
    }
}

fn single_sampler(cfg: &ExperimentConfig, built: &BuiltTarget, dim: usize) -> CliResult<Box<dyn Sampler>> {
    let kernel = base_kernel(&cfg.kernel, dim, &built.target)?;
    if cfg.sampler == SamplerKind::Metropolis {
        return Ok(Box::new(Metropolis::new(kernel)));
    }
    let geo = cfg.geometric.as_ref().expect("validated");
    let dirs = directions(&geo.directions, built)?;
    let set = match &geo.weights {
        Some(w) => DirectionSet::new(dirs, w.clone()),
        None => DirectionSet::uniform(dirs),
    }
    .map_err(|e| CliError::invalid("geometric.weights", e))?;
    let base: Arc<dyn ConditionalDensity> = kernel;
    let proposal = GeometricProposal::new(base, set, geo.epsilon, affinity_mode(&geo.affinity))
        .map_err(|e| CliError::invalid("geometric", e))?;
    Ok(match cfg.sampler {
        SamplerKind::Geometric => Box::new(GeometricMetropolis::new(proposal)),
        _ => Box::new(MixtureKernelMetropolis::new(proposal)),
    })
}

pub struct Experiment {
    pub target: BuiltTarget,
    pub sampler: Box<dyn Sampler>,
}

/// Builds everything a run needs and checks the start state, so that a
/// bad configuration fails before any file is written.
pub fn build_experiment(cfg: &ExperimentConfig) -> CliResult<Experiment> {
    cfg.validate()?;
    let built = build_target(&cfg.target)?;
    let d = built.target.dim();
    if cfg.start.len() != d {
        return Err(CliError::invalid("start", format!("target has dimension {d}, start has {}", cfg.start.len())));
    }
    let l0 = built.target.ln_density(&cfg.start);
    if !l0.is_finite() {
        return Err(CliError::invalid("start", format!("log target is {l0} there")));
    }
    let sampler: Box<dyn Sampler> = if cfg.gibbs {
        let blocks = (0..d)
            .map(|c| Ok(GibbsBlock { coords: vec![c], sampler: single_sampler(cfg, &built, 1)? }))
            .collect::<CliResult<Vec<_>>>()?;
        Box::new(Gibbs::new(d, blocks).map_err(|e| CliError::invalid("gibbs", e))?)
    } else {
        single_sampler(cfg, &built, d)?
    };
    if sampler.dim() != d {
        return Err(CliError::invalid(
            "kernel",
            format!("kernel dimension {} does not match target {d}", sampler.dim()),
        ));
    }
    Ok(Experiment { target: built, sampler })
}

/// Per-basin visit fractions.
pub fn occupancy(basins: &Basins, states: &[Vec<f64>]) -> Vec<f64> {
    let mut counts = vec![0usize; basins.count()];
    for s in states {
        counts[basins.label(s)] += 1;
    }
    counts.into_iter().map(|c| c as f64 / states.len() as f64).collect()
}
