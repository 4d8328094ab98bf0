//! Built-in targets for the worked examples.

mod builtin;
mod logistic;
mod sixmode;

pub use crate::geometry::GaussianMixture as MixtureTarget;
pub use builtin::{bimodal_components, bimodal_mixture, builtin_density, BuiltinKind};
pub use logistic::{LogisticPosterior, PRIOR_VARIANCE};
pub use sixmode::{six_mode_ln, sixmode_conditional, SixModeConditional, SixModeTarget, SIX_MODE_BOUND};
