use serde::{Deserialize, Serialize};

use super::{text_table, Report};
use crate::data::Dataset;
use crate::density::{
    fit_kde, kl_divergence_with, numerical_integration_oracle, Density1d, Gaussian, GaussianMixture, Grid, Integrand,
};
use crate::error::Result;
use crate::rng::component_rng;
use rand_distr::{Distribution, Normal};

const N_PER_CLASS: usize = 10_000;
const MEANS: [f64; 2] = [1.0, -1.0];

/// Published feature-space KL for the shifts with printed values.
pub const PUBLISHED_FEATURE_KL: [(f64, f64); 7] = [
    (0.0, 0.00),
    (0.2, 0.01),
    (0.4, 0.04),
    (0.6, 0.10),
    (1.6, 0.73),
    (1.8, 0.94),
    (2.0, 1.17),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlRow {
    pub b: f64,
    /// `b^2 / 2` for unit-variance class conditionals.
    pub analytic_class_conditional: f64,
    /// Mean over both classes of the KDE-grid estimate.
    pub kde_class_conditional: f64,
    /// Equal-weight two-component mixture vs its translate, by trapezoidal
    /// integration.
    pub feature_space: f64,
    pub published_feature_space: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlTableReport {
    pub seed: u64,
    pub n_per_class: usize,
    pub rows: Vec<KlRow>,
}

fn sample(mean: f64, n: usize, seed: u64, tag: &str) -> Result<Dataset> {
    let mut rng = component_rng(seed, tag);
    let d = Normal::new(mean, 1.0).expect("unit variance");
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![d.sample(&mut rng)]).collect();
    Dataset::from_rows(tag, &rows, None)
}

/// KL divergence between source and target under the class-conditional
/// shift `t(x) = x + b`, `b = 0, 0.2, ..., 2.0`.
pub fn repro_kl_table(seed: u64) -> Result<KlTableReport> {
    let mixture = GaussianMixture::new(MEANS.iter().map(|&m| (0.5, Gaussian::new(m, 1.0))).collect());
    let mut rows = Vec::new();
    for i in 0..=10 {
        let b = i as f64 / 5.0;
        let mut kde_sum = 0.0;
        for (c, &m) in MEANS.iter().enumerate() {
            let src = fit_kde(&sample(m, N_PER_CLASS, seed, &format!("kl-table/b{i}/class{c}/source"))?, None)?;
            let tgt = fit_kde(&sample(m + b, N_PER_CLASS, seed, &format!("kl-table/b{i}/class{c}/target"))?, None)?;
            kde_sum += kl_divergence_with(&src, &tgt, &Grid::default())?.value;
        }
        let shifted = mixture.shifted(b);
        let (lo, hi) = mixture.support(12.0);
        let feature_space = numerical_integration_oracle(
            &|x| mixture.pdf(x),
            &|x| shifted.pdf(x),
            Integrand::Kl,
            (lo, hi + b),
            20_000,
        )?;
        rows.push(KlRow {
            b,
            analytic_class_conditional: b * b / 2.0,
            kde_class_conditional: kde_sum / 2.0,
            feature_space,
            published_feature_space: PUBLISHED_FEATURE_KL
                .iter()
                .find(|(pb, _)| (pb - b).abs() < 1e-9)
                .map(|(_, v)| *v),
        });
    }
    Ok(KlTableReport {
        seed,
        n_per_class: N_PER_CLASS,
        rows,
    })
}

impl Report for KlTableReport {
    fn render_text(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    format!("{:.1}", r.b),
                    format!("{:.4}", r.analytic_class_conditional),
                    format!("{:.4}", r.kde_class_conditional),
                    format!("{:.4}", r.feature_space),
                    r.published_feature_space.map_or("-".into(), |v| format!("{v:.2}")),
                ]
            })
            .collect();
        format!(
            "KL divergence under class-conditional shift t(x) = x + b (nats, KDE n = {} per class, seed {})\n\n{}",
            self.n_per_class,
            self.seed,
            text_table(
                &["b", "P(x|y) analytic", "P(x|y) KDE", "P(x)", "P(x) published"],
                &rows
            )
        )
    }
}
