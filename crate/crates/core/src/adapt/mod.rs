//! Corrective reweighting: EM prior adjustment for label shift, kernel mean
//! matching for covariate shift, and the two closed-form bound calculators.

mod bounds;
mod em;
mod kmm;

pub use bounds::{cortes_covariate_bound, zhao_js_lower_bound, BoundName, BoundReport};
pub use em::{
    adjust_posteriors, confusion_matrix_prior, em_prior_adjust, EmOptions, EmPriorResult,
};
pub use kmm::{kernel_mean_matching, project_box_band, KmmOptions, KmmResult};
