//! Seeded generators for the five shift scenarios. Every generator labels
//! both domains with `+1` / `-1` (label index 0 is `+1`); target labels are
//! meant as a hold-out for evaluation only.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Causality, Dataset, DomainPair, LabelSpace, ScenarioKind, ShiftScenario};
use crate::error::{Error, Result};
use crate::rng::component_rng;

pub const POSITIVE: &str = "+1";
pub const NEGATIVE: &str = "-1";

/// Linear or quadratic decision rule for covariate-shift data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Concept {
    /// `+1` iff `w . x + b0 > 0`.
    Linear { w: [f64; 2], b0: f64 },
    /// `+1` iff `x2 > curvature * x1^2 + offset`.
    Parabolic { curvature: f64, offset: f64 },
}

impl Concept {
    pub fn label(&self, x: [f64; 2]) -> bool {
        match *self {
            Concept::Linear { w, b0 } => w[0] * x[0] + w[1] * x[1] + b0 > 0.0,
            Concept::Parabolic { curvature, offset } => x[1] > curvature * x[0] * x[0] + offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioParams {
    /// One feature, class conditionals `N(means[c], sigma)` fixed across
    /// domains; class priors differ.
    Prior {
        means: [f64; 2],
        sigma: f64,
        source_prior: f64,
        target_prior: f64,
    },
    /// One feature, equal priors; target conditionals are the source ones
    /// translated by `shift`.
    ClassConditional {
        means: [f64; 2],
        sigma: f64,
        prior: f64,
        shift: f64,
    },
    /// Two features with independent normal coordinates; the concept is
    /// shared and only the feature law moves.
    Covariate {
        concept: Concept,
        source_mean: [f64; 2],
        source_std: [f64; 2],
        target_mean: [f64; 2],
        target_std: [f64; 2],
        /// Probability of flipping a label.
        label_noise: f64,
    },
    /// One standard normal feature in both domains; `+1` iff the feature
    /// exceeds the domain's threshold.
    Concept {
        source_threshold: f64,
        target_threshold: f64,
    },
    /// Circle data: positives uniform in the disk of `radius`, negatives
    /// uniform in the ring `[ring_inner, ring_outer]`. In the target the
    /// negative cloud is translated by `negative_offset` along the first axis
    /// and the negative prior changes.
    General {
        radius: f64,
        ring_inner: f64,
        ring_outer: f64,
        negative_offset: f64,
        source_negative_prior: f64,
        target_negative_prior: f64,
    },
}

/// Positive-class share of the target for `ScenarioParams::Prior`.
pub const TABLE4_TARGET_PRIOR: f64 = 0.75;

impl ScenarioParams {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            ScenarioParams::Prior { .. } => ScenarioKind::Prior,
            ScenarioParams::ClassConditional { .. } => ScenarioKind::ClassConditional,
            ScenarioParams::Covariate { .. } => ScenarioKind::Covariate,
            ScenarioParams::Concept { .. } => ScenarioKind::Concept,
            ScenarioParams::General { .. } => ScenarioKind::General,
        }
    }

    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Prior => ScenarioParams::Prior {
                means: [-1.0, 1.0],
                sigma: 1.5,
                source_prior: 0.5,
                target_prior: TABLE4_TARGET_PRIOR,
            },
            ScenarioKind::ClassConditional => ScenarioParams::ClassConditional {
                means: [1.0, -1.0],
                sigma: 1.0,
                prior: 0.5,
                shift: 1.0,
            },
            ScenarioKind::Covariate => ScenarioParams::Covariate {
                concept: Concept::Linear { w: [1.0, 1.0], b0: -0.5 },
                source_mean: [0.0, 0.0],
                source_std: [1.0, 1.0],
                target_mean: [0.0, 1.5],
                target_std: [1.0, 1.0],
                label_noise: 0.0,
            },
            ScenarioKind::Concept => ScenarioParams::Concept {
                source_threshold: 0.0,
                target_threshold: 1.0,
            },
            ScenarioKind::General => ScenarioParams::General {
                radius: 1.0,
                ring_inner: 1.2,
                ring_outer: 2.2,
                negative_offset: 0.75,
                source_negative_prior: 0.5,
                target_negative_prior: 0.25,
            },
        }
    }

    /// Misspecified-linear-model covariate scenario: a parabolic concept
    /// whose local slope differs between the source and target regions.
    pub fn misspecified_covariate() -> Self {
        ScenarioParams::Covariate {
            concept: Concept::Parabolic {
                curvature: 1.0,
                offset: 0.0,
            },
            source_mean: [-0.5, 0.5],
            source_std: [1.0, 1.0],
            target_mean: [1.0, 1.5],
            target_std: [0.5, 0.8],
            label_noise: 0.05,
        }
    }

    fn validate(&self) -> Result<()> {
        let prob = |p: f64, what: &str| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{what} must be in [0, 1], got {p}")))
            }
        };
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            ScenarioParams::Prior {
                sigma,
                source_prior,
                target_prior,
                ..
            } => {
                positive(*sigma, "sigma")?;
                prob(*source_prior, "source prior")?;
                prob(*target_prior, "target prior")
            }
            ScenarioParams::ClassConditional { sigma, prior, shift, .. } => {
                positive(*sigma, "sigma")?;
                if !shift.is_finite() {
                    return Err(Error::InvalidArgument("shift must be finite".into()));
                }
                prob(*prior, "prior")
            }
            ScenarioParams::Covariate {
                source_std,
                target_std,
                label_noise,
                ..
            } => {
                for s in source_std.iter().chain(target_std) {
                    positive(*s, "std")?;
                }
                prob(*label_noise, "label noise")
            }
            ScenarioParams::Concept { .. } => Ok(()),
            ScenarioParams::General {
                radius,
                ring_inner,
                ring_outer,
                source_negative_prior,
                target_negative_prior,
                ..
            } => {
                positive(*radius, "radius")?;
                if !(ring_inner >= radius && ring_outer > ring_inner) {
                    return Err(Error::InvalidArgument(
                        "need radius <= ring_inner < ring_outer".into(),
                    ));
                }
                prob(*source_negative_prior, "source negative prior")?;
                prob(*target_negative_prior, "target negative prior")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub causality: Causality,
    pub params: ScenarioParams,
    pub n_source: usize,
    pub n_target: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Default parameters for `kind` with the causality its definition
    /// requires (general shift uses Y -> X).
    pub fn new(kind: ScenarioKind, n: usize, seed: u64) -> Self {
        let causality = match kind {
            ScenarioKind::Covariate | ScenarioKind::Concept => Causality::XtoY,
            _ => Causality::YtoX,
        };
        Self {
            causality,
            params: ScenarioParams::default_for(kind),
            n_source: n,
            n_target: n,
            seed,
        }
    }

    pub fn with_params(mut self, params: ScenarioParams) -> Self {
        self.params = params;
        self
    }

    pub fn scenario(&self) -> Result<ShiftScenario> {
        ShiftScenario::new(self.params.kind(), self.causality)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    /// Both domains labeled; target labels are hold-out truth.
    pub pair: DomainPair,
    pub scenario: ShiftScenario,
    pub target_labels_holdout: bool,
}

fn label(positive: bool) -> String {
    if positive { POSITIVE } else { NEGATIVE }.to_string()
}

fn sample_domain(spec: &ScenarioSpec, target: bool, rng: &mut ChaCha8Rng) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let n = if target { spec.n_target } else { spec.n_source };
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        match &spec.params {
            ScenarioParams::Prior {
                means,
                sigma,
                source_prior,
                target_prior,
            } => {
                let p = if target { *target_prior } else { *source_prior };
                let pos = rng.random_bool(p);
                let mu = if pos { means[0] } else { means[1] };
                rows.push(vec![mu + sigma * std_normal.sample(rng)]);
                labels.push(label(pos));
            }
            ScenarioParams::ClassConditional {
                means,
                sigma,
                prior,
                shift,
            } => {
                let pos = rng.random_bool(*prior);
                let mu = if pos { means[0] } else { means[1] } + if target { *shift } else { 0.0 };
                rows.push(vec![mu + sigma * std_normal.sample(rng)]);
                labels.push(label(pos));
            }
            ScenarioParams::Covariate {
                concept,
                source_mean,
                source_std,
                target_mean,
                target_std,
                label_noise,
            } => {
                let (m, s) = if target { (target_mean, target_std) } else { (source_mean, source_std) };
                let x = [
                    m[0] + s[0] * std_normal.sample(rng),
                    m[1] + s[1] * std_normal.sample(rng),
                ];
                let mut pos = concept.label(x);
                if *label_noise > 0.0 && rng.random_bool(*label_noise) {
                    pos = !pos;
                }
                rows.push(x.to_vec());
                labels.push(label(pos));
            }
            ScenarioParams::Concept {
                source_threshold,
                target_threshold,
            } => {
                let x: f64 = std_normal.sample(rng);
                let t = if target { *target_threshold } else { *source_threshold };
                rows.push(vec![x]);
                labels.push(label(x > t));
            }
            ScenarioParams::General {
                radius,
                ring_inner,
                ring_outer,
                negative_offset,
                source_negative_prior,
                target_negative_prior,
            } => {
                let p_neg = if target { *target_negative_prior } else { *source_negative_prior };
                let neg = rng.random_bool(p_neg);
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let u: f64 = rng.random();
                let r = if neg {
                    (u * (ring_outer * ring_outer - ring_inner * ring_inner) + ring_inner * ring_inner).sqrt()
                } else {
                    radius * u.sqrt()
                };
                let mut x = [r * angle.cos(), r * angle.sin()];
                if neg && target {
                    x[0] += negative_offset;
                }
                rows.push(x.to_vec());
                labels.push(label(!neg));
            }
        }
    }
    Ok((rows, labels))
}

/// Draws a labeled source/target pair for the spec. Deterministic in
/// `spec.seed`; source and target use independent streams.
pub fn generate(spec: &ScenarioSpec) -> Result<SyntheticPair> {
    spec.params.validate()?;
    let scenario = spec.scenario()?;
    if spec.n_source == 0 || spec.n_target == 0 {
        return Err(Error::InvalidArgument("n per domain must be positive".into()));
    }
    let (src_rows, src_labels) = sample_domain(spec, false, &mut component_rng(spec.seed, "synth/source"))?;
    let (tgt_rows, tgt_labels) = sample_domain(spec, true, &mut component_rng(spec.seed, "synth/target"))?;
    let tag = spec.params.kind().to_string().to_lowercase().replace(' ', "-");
    let source = Dataset::from_rows(format!("{tag}-source"), &src_rows, Some(src_labels))?;
    let target = Dataset::from_rows(format!("{tag}-target"), &tgt_rows, Some(tgt_labels))?;
    let pair = DomainPair::new(source, target, LabelSpace::signed_binary())?;
    Ok(SyntheticPair {
        pair,
        scenario,
        target_labels_holdout: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::empirical_prior;
    use crate::stats::ks_two_sample;

    #[test]
    fn prior_target_matches_requested_prior() {
        let spec = ScenarioSpec::new(ScenarioKind::Prior, 10_000, 3);
        let g = generate(&spec).unwrap();
        let p = empirical_prior(&g.pair.target, &g.pair.label_space).unwrap();
        assert!((p[0] - 0.75).abs() < 0.01, "{p:?}");
        let p = empirical_prior(&g.pair.source, &g.pair.label_space).unwrap();
        assert!((p[0] - 0.5).abs() < 0.015);
    }

    #[test]
    fn deterministic_under_seed() {
        for kind in ScenarioKind::ALL {
            let spec = ScenarioSpec::new(kind, 50, 11);
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
            let other = ScenarioSpec::new(kind, 50, 12);
            assert_ne!(generate(&spec).unwrap().pair.source, generate(&other).unwrap().pair.source);
        }
    }

    #[test]
    fn class_conditional_null_rarely_rejects() {
        let mut rejections = 0;
        for seed in 0..100 {
            let spec = ScenarioSpec::new(ScenarioKind::ClassConditional, 500, seed).with_params(
                ScenarioParams::ClassConditional {
                    means: [1.0, -1.0],
                    sigma: 1.0,
                    prior: 0.5,
                    shift: 0.0,
                },
            );
            let g = generate(&spec).unwrap();
            let r = ks_two_sample(&g.pair.source.column(0).to_vec(), &g.pair.target.column(0).to_vec()).unwrap();
            if r.rejects(0.05) {
                rejections += 1;
            }
        }
        assert!(rejections <= 10, "{rejections}");
    }

    #[test]
    fn general_negatives_move_in_target() {
        let g = generate(&ScenarioSpec::new(ScenarioKind::General, 2000, 1)).unwrap();
        let mean_neg_x = |ds: &Dataset| {
            let labels = ds.labels().unwrap();
            let xs: Vec<f64> = (0..ds.n()).filter(|&i| labels[i] == NEGATIVE).map(|i| ds.row(i)[0]).collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        };
        assert!(mean_neg_x(&g.pair.target) - mean_neg_x(&g.pair.source) > 0.5);
        let p = empirical_prior(&g.pair.target, &g.pair.label_space).unwrap();
        assert!((p[1] - 0.25).abs() < 0.03);
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = ScenarioSpec::new(ScenarioKind::Prior, 10, 0).with_params(ScenarioParams::Prior {
            means: [0.0, 1.0],
            sigma: 0.0,
            source_prior: 0.5,
            target_prior: 0.5,
        });
        assert!(generate(&bad).is_err());
        let mut wrong = ScenarioSpec::new(ScenarioKind::Covariate, 10, 0);
        wrong.causality = Causality::YtoX;
        assert!(generate(&wrong).is_err());
    }
}
