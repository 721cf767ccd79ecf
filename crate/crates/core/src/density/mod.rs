//! Density estimation and divergence measures.
//!
//! Univariate divergences (KL, Jensen-Shannon, Rényi) are evaluated either in
//! closed form for Gaussian parameters or by trapezoidal integration on a
//! grid covering both supports. Multivariate comparisons go through MMD.

mod divergence;
mod integrate;
mod kde;
mod mmd;

pub use divergence::{
    js_divergence, js_divergence_with, kl_divergence, kl_divergence_with, renyi_divergence,
    renyi_divergence_with, DivergenceEstimate, Grid, Measure, Method, DENSITY_FLOOR,
};
pub use integrate::{numerical_integration_oracle, Integrand};
pub use kde::{fit_kde, silverman_bandwidth, Kde, BANDWIDTH_FLOOR};
pub use mmd::{median_heuristic_gamma, mmd, rbf_gram, sq_dist, MmdStatistic};

use serde::{Deserialize, Serialize};

/// A univariate density that can be evaluated pointwise.
pub trait Density1d {
    fn pdf(&self, x: f64) -> f64;

    /// Interval holding the mass of the density, widened by `pad` bandwidths
    /// (standard deviations for parametric densities).
    fn support(&self, pad: f64) -> (f64, f64);

    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> String {
        "density".into()
    }

    fn gaussian(&self) -> Option<Gaussian> {
        None
    }

    fn is_kde(&self) -> bool {
        false
    }
}

/// Normal distribution `N(mean, std^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub std: f64,
}

impl Gaussian {
    pub fn new(mean: f64, std: f64) -> Self {
        assert!(std > 0.0 && std.is_finite(), "std must be positive");
        Self { mean, std }
    }
}

impl Density1d for Gaussian {
    fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        (-0.5 * z * z).exp() / (self.std * (2.0 * std::f64::consts::PI).sqrt())
    }

    fn support(&self, pad: f64) -> (f64, f64) {
        (self.mean - pad * self.std, self.mean + pad * self.std)
    }

    fn name(&self) -> String {
        format!("N({}, {})", self.mean, self.std)
    }

    fn gaussian(&self) -> Option<Gaussian> {
        Some(*self)
    }
}

/// Finite mixture of univariate Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub components: Vec<(f64, Gaussian)>,
}

impl GaussianMixture {
    pub fn new(components: Vec<(f64, Gaussian)>) -> Self {
        Self { components }
    }

    /// The same mixture translated by `b`.
    pub fn shifted(&self, b: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|(w, g)| (*w, Gaussian::new(g.mean + b, g.std)))
                .collect(),
        }
    }
}

impl Density1d for GaussianMixture {
    fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, g)| w * g.pdf(x)).sum()
    }

    fn support(&self, pad: f64) -> (f64, f64) {
        self.components
            .iter()
            .map(|(_, g)| g.support(pad))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (lo, hi)| {
                (a.min(lo), b.max(hi))
            })
    }

    fn name(&self) -> String {
        "gaussian-mixture".into()
    }
}
