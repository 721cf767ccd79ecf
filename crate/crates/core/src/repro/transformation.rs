use serde::{Deserialize, Serialize};

use super::{text_table, Report};
use crate::data::{Dataset, LabelSpace, ScenarioKind};
use crate::density::{fit_kde, Density1d, Gaussian, GaussianMixture, Kde};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::synth::{generate, ScenarioParams, ScenarioSpec};

pub const GAP_TOLERANCE: f64 = 0.05;
pub const TOTAL_PROBABILITY_TOLERANCE: f64 = 0.02;
const GRID_1D: usize = 512;
const GRID_2D: usize = 64;
const WITNESS_B: f64 = 1.5;
const WITNESS_TARGET_PRIOR: f64 = 0.8;
const TOTAL_PROBABILITY_N: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftGap {
    pub b: f64,
    pub target_prior: f64,
    /// `sup_x |KDE_s(x) - KDE_t(x + b)|` over the grid.
    pub sup_gap: f64,
    /// Same supremum for the generating mixtures.
    pub analytic_sup_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalProbabilityCheck {
    pub generator: ScenarioKind,
    pub domain: String,
    pub dim: usize,
    pub grid_points: usize,
    /// `max |P(x) - sum_y P(x|y) P(y)|` over the grid, class KDEs on the
    /// marginal bandwidths.
    pub residual: f64,
    /// Same with per-class Silverman bandwidths; includes smoothing mismatch.
    pub residual_own_bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformationReport {
    pub seed: u64,
    pub n: usize,
    pub gaps: Vec<ShiftGap>,
    /// Unequal priors across domains.
    pub witness: ShiftGap,
    pub total_probability: Vec<TotalProbabilityCheck>,
}

impl TransformationReport {
    pub fn gaps_within_tolerance(&self) -> bool {
        self.gaps.iter().all(|g| g.sup_gap <= GAP_TOLERANCE)
    }

    pub fn witness_exceeds_tolerance(&self) -> bool {
        self.witness.sup_gap > GAP_TOLERANCE
    }

    pub fn total_probability_holds(&self) -> bool {
        self.total_probability
            .iter()
            .all(|c| c.residual <= TOTAL_PROBABILITY_TOLERANCE)
    }
}

fn class_conditional(n: usize, prior: f64, shift: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let ScenarioParams::ClassConditional { means, sigma, .. } = ScenarioParams::default_for(ScenarioKind::ClassConditional)
    else {
        unreachable!("class-conditional defaults")
    };
    let params = ScenarioParams::ClassConditional {
        means,
        sigma,
        prior,
        shift,
    };
    let g = generate(&ScenarioSpec::new(ScenarioKind::ClassConditional, n, seed).with_params(params))?;
    Ok((g.pair.source, g.pair.target))
}

fn mixture(prior: f64) -> GaussianMixture {
    let ScenarioParams::ClassConditional { means, sigma, .. } = ScenarioParams::default_for(ScenarioKind::ClassConditional)
    else {
        unreachable!("class-conditional defaults")
    };
    GaussianMixture::new(vec![
        (prior, Gaussian::new(means[0], sigma)),
        (1.0 - prior, Gaussian::new(means[1], sigma)),
    ])
}

fn grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
}

fn sup_gap(source: &Dataset, target: &Dataset, b: f64, prior_s: f64, prior_t: f64) -> Result<ShiftGap> {
    let ks = fit_kde(source, None)?;
    let kt = fit_kde(target, None)?;
    let (lo, hi) = ks.support(3.0);
    let xs = grid(lo, hi, GRID_1D);
    let ms = mixture(prior_s);
    let mt = mixture(prior_t).shifted(b);
    let sup = |f: &dyn Fn(f64) -> f64| xs.iter().map(|&x| f(x).abs()).fold(0.0, f64::max);
    Ok(ShiftGap {
        b,
        target_prior: prior_t,
        sup_gap: sup(&|x| ks.pdf(x) - kt.pdf(x + b)),
        analytic_sup_gap: sup(&|x| ms.pdf(x) - mt.pdf(x + b)),
    })
}

/// Marginal KDE against the prior-weighted class KDEs of the same sample,
/// once with every KDE on the marginal's Silverman bandwidths and once with
/// each class on its own.
fn total_probability(
    generator: ScenarioKind,
    domain: &str,
    ds: &Dataset,
    space: &LabelSpace,
) -> Result<TotalProbabilityCheck> {
    let pooled = fit_kde(&ds.without_labels(), None)?;
    let h = pooled.bandwidth().to_vec();
    let y = ds.encoded_labels(space)?;
    let mut shared: Vec<(f64, Kde)> = Vec::new();
    let mut own: Vec<(f64, Kde)> = Vec::new();
    for c in 0..space.len() {
        let rows: Vec<usize> = (0..ds.n()).filter(|&i| y[i] == c).collect();
        if rows.is_empty() {
            continue;
        }
        let weight = rows.len() as f64 / ds.n() as f64;
        let sub = ds.select(&rows);
        shared.push((weight, Kde::with_bandwidths(&sub, &h)?));
        let own_kde = if rows.len() < 2 {
            Kde::with_bandwidths(&sub, &h)?
        } else {
            fit_kde(&sub, None)?
        };
        own.push((weight, own_kde));
    }
    let axes: Vec<Vec<f64>> = (0..ds.d())
        .map(|j| {
            let col = ds.column(j);
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let pad = 3.0 * h[j];
            grid(lo - pad, hi + pad, if ds.d() == 1 { GRID_1D } else { GRID_2D })
        })
        .collect();
    let points: Vec<Vec<f64>> = match axes.as_slice() {
        [xs] => xs.iter().map(|&x| vec![x]).collect(),
        [xs, ys] => xs.iter().flat_map(|&x| ys.iter().map(move |&y| vec![x, y])).collect(),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "grid check supports d <= 2, got {}",
                ds.d()
            )))
        }
    };
    let residual_of = |parts: &[(f64, Kde)]| {
        points
            .iter()
            .map(|p| {
                let mix: f64 = parts.iter().map(|(w, k)| w * k.density(p)).sum();
                (pooled.density(p) - mix).abs()
            })
            .fold(0.0, f64::max)
    };
    Ok(TotalProbabilityCheck {
        generator,
        domain: domain.into(),
        dim: ds.d(),
        grid_points: points.len(),
        residual: residual_of(&shared),
        residual_own_bandwidth: residual_of(&own),
    })
}

/// Class-conditional translation `t(x) = x + b` with equal priors leaves the
/// marginal translated by `b`; checks that on KDEs for each `b`, checks that
/// unequal priors break it, and checks the total-probability decomposition
/// on every labeled generator.
pub fn verify_transformation_proposition(bs: &[f64], n: usize, seed: u64) -> Result<TransformationReport> {
    if n < 1000 {
        return Err(Error::InsufficientSamples { needed: 1000, got: n });
    }
    if let Some(b) = bs.iter().find(|b| !b.is_finite()) {
        return Err(Error::InvalidArgument(format!("shift must be finite, got {b}")));
    }
    let mut gaps = Vec::new();
    for (i, &b) in bs.iter().enumerate() {
        let (s, t) = class_conditional(n, 0.5, b, derive_seed(seed, &format!("transformation/b{i}")))?;
        gaps.push(sup_gap(&s, &t, b, 0.5, 0.5)?);
    }
    let witness_seed = derive_seed(seed, "transformation/witness");
    let (s, _) = class_conditional(n, 0.5, WITNESS_B, witness_seed)?;
    let (_, t) = class_conditional(n, WITNESS_TARGET_PRIOR, WITNESS_B, witness_seed)?;
    let witness = sup_gap(&s, &t, WITNESS_B, 0.5, WITNESS_TARGET_PRIOR)?;

    let mut total = Vec::new();
    for kind in ScenarioKind::ALL {
        let g = generate(&ScenarioSpec::new(
            kind,
            TOTAL_PROBABILITY_N,
            derive_seed(seed, &format!("transformation/total/{kind}")),
        ))?;
        let space = g.pair.label_space.clone();
        total.push(total_probability(kind, "source", &g.pair.source, &space)?);
        total.push(total_probability(kind, "target", &g.pair.target, &space)?);
    }
    Ok(TransformationReport {
        seed,
        n,
        gaps,
        witness,
        total_probability: total,
    })
}

impl Report for TransformationReport {
    fn render_text(&self) -> String {
        let mut out = format!(
            "Class-conditional translation in feature space (n = {}, seed {})\n\n",
            self.n, self.seed
        );
        let rows: Vec<Vec<String>> = self
            .gaps
            .iter()
            .chain(std::iter::once(&self.witness))
            .map(|g| {
                vec![
                    format!("{:.2}", g.b),
                    format!("{:.2}", g.target_prior),
                    format!("{:.4}", g.sup_gap),
                    format!("{:.4}", g.analytic_sup_gap),
                    if g.sup_gap <= GAP_TOLERANCE { "<= 0.05" } else { "> 0.05" }.into(),
                ]
            })
            .collect();
        out.push_str(&text_table(&["b", "target P(y=+1)", "sup gap", "analytic", "verdict"], &rows));
        out.push_str("\nTotal probability residual max |P(x) - sum_y P(x|y)P(y)|\n");
        let rows: Vec<Vec<String>> = self
            .total_probability
            .iter()
            .map(|c| {
                vec![
                    c.generator.to_string(),
                    c.domain.clone(),
                    c.dim.to_string(),
                    c.grid_points.to_string(),
                    format!("{:.1e}", c.residual),
                    format!("{:.4}", c.residual_own_bandwidth),
                ]
            })
            .collect();
        out.push_str(&text_table(&["generator", "domain", "d", "grid", "residual", "own bandwidths"], &rows));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shift_has_small_gap() {
        let r = verify_transformation_proposition(&[0.0], 2000, 1).unwrap();
        assert!(r.gaps[0].sup_gap <= GAP_TOLERANCE);
        assert_eq!(r.gaps[0].analytic_sup_gap, 0.0);
        assert!(r.total_probability_holds());
        assert_eq!(r.total_probability.len(), 10);
    }

    #[test]
    fn witness_oracle_exceeds_tolerance() {
        // 0.3 * max |phi(x - 1) - phi(x + 1)| on the grid.
        let gap = sup_gap(
            &class_conditional(2000, 0.5, 1.5, 2).unwrap().0,
            &class_conditional(2000, 0.8, 1.5, 2).unwrap().1,
            1.5,
            0.5,
            0.8,
        )
        .unwrap();
        assert!(gap.analytic_sup_gap > 0.10 && gap.analytic_sup_gap < 0.11, "{gap:?}");
    }

    #[test]
    fn preconditions() {
        assert!(verify_transformation_proposition(&[1.0], 999, 0).is_err());
        assert!(verify_transformation_proposition(&[f64::NAN], 5000, 0).is_err());
    }
}
