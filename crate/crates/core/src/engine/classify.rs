use serde::{Deserialize, Serialize};

use super::evidence::{Claim, Evidence, TestEvidence};
use super::{recommend, Action, Recommendation};
use crate::data::{Causality, ScenarioKind, ShiftScenario, TriState};
use crate::error::{Error, Result};
use crate::stats::DEFAULT_LEVEL;

/// Cut-offs turning test outputs and model metrics into tri-state facts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Significance level for every test verdict.
    pub level: f64,
    /// A model counts as well specified at or above this holdout accuracy...
    pub min_holdout_accuracy: f64,
    /// ...with a train/holdout gap no larger than this.
    pub max_generalization_gap: f64,
    /// Holdout minus target accuracy at or above this is a performance drop.
    pub performance_drop: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            level: DEFAULT_LEVEL,
            min_holdout_accuracy: 0.65,
            max_generalization_gap: 0.05,
            performance_drop: 0.05,
        }
    }
}

/// Where a fact came from, strongest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactSource {
    Test,
    Metric,
    Assertion,
    /// Nothing known; the value is Unknown.
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub claim: Claim,
    pub value: TriState,
    pub source: FactSource,
    pub detail: String,
}

/// Ordered weakest first so `max`/`min` follow strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Confidence {
    Assumed,
    Indicated,
    Determined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub scenario: ShiftScenario,
    pub confidence: Confidence,
    /// Consulted facts in rule order, then the rule that fired, then notes.
    pub rationale: Vec<String>,
    pub facts: Vec<Fact>,
    pub recommendation: Recommendation,
}

fn tri(v: bool) -> TriState {
    TriState::from_bool(v)
}

fn not(v: TriState) -> TriState {
    match v {
        TriState::Yes => TriState::No,
        TriState::No => TriState::Yes,
        TriState::Unknown => TriState::Unknown,
    }
}

/// Measured value if any, else the expert's word, else Unknown. A measured
/// value that disagrees with an assertion wins and the clash is recorded.
fn resolve(ev: &Evidence, claim: Claim, measured: Option<(TriState, FactSource, String)>, notes: &mut Vec<String>) -> Fact {
    let asserted = ev.assertion(claim);
    match measured {
        Some((value, source, detail)) => {
            if let Some(a) = asserted.filter(|a| a.value != value) {
                notes.push(format!(
                    "conflict on {}: expert asserted {:?} ({}), measurement gives {:?}; measurement kept",
                    claim.key(),
                    a.value,
                    a.justification,
                    value
                ));
            }
            Fact {
                claim,
                value,
                source,
                detail,
            }
        }
        None => match asserted {
            Some(a) => Fact {
                claim,
                value: a.value,
                source: FactSource::Assertion,
                detail: format!("expert: {}", a.justification),
            },
            None => Fact {
                claim,
                value: TriState::Unknown,
                source: FactSource::Missing,
                detail: "no evidence".into(),
            },
        },
    }
}

struct Facts {
    prior_shifted: Fact,
    cc_equal: Fact,
    concept_stable: Fact,
    feature_shifted: Fact,
    drop: Fact,
    well_specified: Fact,
}

fn gather(ev: &Evidence, t: &Thresholds, notes: &mut Vec<String>) -> Facts {
    let level = t.level;
    let feature = ev.feature_test().map(|f| match f {
        TestEvidence::FeatureShift(s) => (
            tri(s.per_dimension.iter().any(|r| r.rejects(level / s.per_dimension.len() as f64))),
            FactSource::Test,
            format!(
                "KS screen over {} features, min p = {:.3e}, level {level} / d",
                s.per_dimension.len(),
                s.per_dimension.iter().map(|r| r.p_value).fold(1.0, f64::min)
            ),
        ),
        TestEvidence::Mmd(r) => (
            tri(r.rejects(level)),
            FactSource::Test,
            format!("MMD permutation test p = {:.3e}, level {level}", r.p_value),
        ),
        _ => unreachable!("feature_test yields feature tests"),
    });
    let label = ev.label_shift().map(|r| {
        (
            tri(r.rejects(level)),
            FactSource::Test,
            format!("chi-squared label test p = {:.3e}, level {level}", r.p_value),
        )
    });
    let cc = ev.class_conditional().map(|s| {
        let k = s.per_class.len() as f64;
        let shifted = s
            .per_class
            .iter()
            .any(|c| c.screen.per_dimension.iter().any(|r| r.rejects(level / k / c.screen.per_dimension.len() as f64)));
        (
            not(tri(shifted)),
            FactSource::Test,
            format!("per-class KS screens over {} classes, level {level} / (k d)", s.per_class.len()),
        )
    });
    let fit = ev.model_fit();
    let well = fit.map(|m| {
        let ok = m.source_holdout_accuracy >= t.min_holdout_accuracy && m.generalization_gap() <= t.max_generalization_gap;
        (
            tri(ok),
            FactSource::Metric,
            format!(
                "{} holdout accuracy {:.3} (min {}), train-holdout gap {:.3} (max {})",
                m.learner,
                m.source_holdout_accuracy,
                t.min_holdout_accuracy,
                m.generalization_gap(),
                t.max_generalization_gap
            ),
        )
    });
    let drop = fit.and_then(|m| {
        m.target_accuracy.map(|acc| {
            (
                tri(m.source_holdout_accuracy - acc >= t.performance_drop),
                FactSource::Metric,
                format!(
                    "target accuracy {acc:.3} vs holdout {:.3} (drop threshold {})",
                    m.source_holdout_accuracy, t.performance_drop
                ),
            )
        })
    });
    Facts {
        prior_shifted: resolve(ev, Claim::PriorShifted, label, notes),
        cc_equal: resolve(ev, Claim::ClassConditionalsEqual, cc, notes),
        concept_stable: resolve(ev, Claim::ConceptStable, None, notes),
        feature_shifted: resolve(ev, Claim::FeatureShifted, feature, notes),
        drop: resolve(ev, Claim::PerformanceDrop, drop, notes),
        well_specified: resolve(ev, Claim::ModelWellSpecified, well, notes),
    }
}

fn confidence(consulted: &[&Fact]) -> Confidence {
    if consulted.iter().all(|f| f.source == FactSource::Test) {
        Confidence::Determined
    } else if consulted.iter().any(|f| matches!(f.source, FactSource::Test | FactSource::Metric)) {
        Confidence::Indicated
    } else {
        Confidence::Assumed
    }
}

struct Outcome<'a> {
    kind: ScenarioKind,
    rule: &'static str,
    consulted: Vec<&'a Fact>,
    caveats: Vec<String>,
    fallback: bool,
}

fn outcome<'a>(kind: ScenarioKind, rule: &'static str, consulted: Vec<&'a Fact>) -> Outcome<'a> {
    Outcome {
        kind,
        rule,
        consulted,
        caveats: Vec::new(),
        fallback: false,
    }
}

fn y_to_x(f: &Facts) -> Outcome<'_> {
    use TriState::{No, Unknown, Yes};
    let (p, c, d) = (&f.prior_shifted, &f.cc_equal, &f.drop);
    match (p.value, c.value, d.value) {
        (Yes, No, _) => outcome(ScenarioKind::General, "prior and class conditionals both shifted", vec![p, c]),
        (Yes, Yes, _) => outcome(ScenarioKind::Prior, "prior shifted, class conditionals equal", vec![p, c]),
        (Yes, Unknown, _) => {
            let mut o = outcome(ScenarioKind::Prior, "prior shifted, class conditionals not examined", vec![p, c]);
            o.caveats
                .push("Equal class conditionals are assumed; if they differ the shift is General.".into());
            o
        }
        (No, No, _) => outcome(ScenarioKind::ClassConditional, "prior stable, class conditionals shifted", vec![p, c]),
        (No, Unknown, Yes) => outcome(
            ScenarioKind::ClassConditional,
            "prior stable with a performance drop, class conditionals not asserted equal",
            vec![p, c, d],
        ),
        (Unknown, No, _) => {
            let mut o = outcome(
                ScenarioKind::ClassConditional,
                "class conditionals shifted, prior not examined",
                vec![p, c],
            );
            o.caveats
                .push("An unchanged prior is assumed; if it moved too the shift is General.".into());
            o
        }
        (Unknown, Yes, Yes) => outcome(
            ScenarioKind::Prior,
            "performance drop with equal class conditionals, so the prior moved",
            vec![p, c, d],
        ),
        _ => fallback(vec![p, c, d]),
    }
}

fn x_to_y(f: &Facts) -> Outcome<'_> {
    use TriState::{No, Unknown, Yes};
    let (x, s, w, d) = (&f.feature_shifted, &f.concept_stable, &f.well_specified, &f.drop);
    match (x.value, s.value, d.value) {
        (Yes, No, _) => outcome(ScenarioKind::General, "feature law and concept both shifted", vec![x, s]),
        (Yes, _, _) => {
            let mut o = outcome(ScenarioKind::Covariate, "feature law shifted, concept not shifted", vec![x, s, w]);
            if s.value == Unknown {
                o.caveats.push(
                    "Concept stability is assumed; if the concept moved as well the shift is General.".into(),
                );
            }
            if w.value == Unknown {
                o.caveats.push(
                    "Model specification was not assessed; reweighting is listed as the safe default.".into(),
                );
            }
            o
        }
        (No, _, Yes) => {
            let mut o = outcome(ScenarioKind::Concept, "feature law stable, performance drop", vec![x, d, w]);
            if w.value != Yes {
                o.caveats.push(
                    "The source model is not shown to generalize; the drop may reflect a poor fit rather than a moved concept."
                        .into(),
                );
            }
            o
        }
        (No, No, _) => outcome(ScenarioKind::Concept, "feature law stable, concept shifted", vec![x, s]),
        (Unknown, No, _) => {
            let mut o = outcome(ScenarioKind::Concept, "concept shifted, feature law not examined", vec![x, s]);
            o.caveats
                .push("A stable feature law is assumed; if it moved too the shift is General.".into());
            o
        }
        (Unknown, Yes, Yes) => outcome(
            ScenarioKind::Covariate,
            "performance drop with a stable concept, so the feature law moved",
            vec![x, s, d, w],
        ),
        _ => fallback(vec![x, s, d]),
    }
}

fn fallback(consulted: Vec<&Fact>) -> Outcome<'_> {
    let mut o = outcome(
        ScenarioKind::General,
        "evidence does not single out a basic scenario",
        consulted,
    );
    o.fallback = true;
    o.caveats.push(
        "Diagnosis defaults to General; run the missing tests or add assertions to narrow it down.".into(),
    );
    o
}

/// [`classify_with`] under default thresholds.
pub fn classify(evidence: &Evidence) -> Result<Diagnosis> {
    classify_with(evidence, &Thresholds::default())
}

/// Deterministic rule evaluation. Tests outrank assertions. Confidence is
/// Determined when every consulted fact is a test verdict, Indicated when
/// at least one is a test or model metric, Assumed otherwise.
pub fn classify_with(evidence: &Evidence, thresholds: &Thresholds) -> Result<Diagnosis> {
    let causality = evidence.causality;
    if causality == Causality::Unknown {
        return Err(Error::CausalResearchRequired);
    }
    let mut notes = Vec::new();
    let facts = gather(evidence, thresholds, &mut notes);
    let o = match causality {
        Causality::YtoX => y_to_x(&facts),
        _ => x_to_y(&facts),
    };
    let confidence = if o.fallback {
        Confidence::Assumed
    } else {
        confidence(&o.consulted)
    };
    let mut rationale: Vec<String> = o
        .consulted
        .iter()
        .map(|f| format!("{} = {:?} [{:?}: {}]", f.claim.key(), f.value, f.source, f.detail))
        .collect();
    rationale.push(format!("rule {causality:?}: {} -> {}", o.rule, o.kind));
    rationale.extend(notes);
    rationale.push(
        "a-posteriori check: apply the recommended procedure and confirm it improves target performance".into(),
    );
    let mut recommendation = recommend(o.kind, facts.well_specified.value);
    recommendation.caveats.extend(o.caveats);
    debug_assert!(o.kind != ScenarioKind::Prior || recommendation.executable_actions.contains(&Action::EmPriorAdjust));
    Ok(Diagnosis {
        scenario: ShiftScenario::new(o.kind, causality)?,
        confidence,
        rationale,
        facts: vec![
            facts.prior_shifted,
            facts.cc_equal,
            facts.concept_stable,
            facts.feature_shifted,
            facts.drop,
            facts.well_specified,
        ],
        recommendation,
    })
}
