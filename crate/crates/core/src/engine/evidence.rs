use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Causality, DomainPair, TriState};
use crate::density::DivergenceEstimate;
use crate::error::{Error, Result};
use crate::learners::{evaluate, train, Hyperparameters, LearnerKind};
use crate::rng::component_rng;
use crate::stats::{feature_shift_screen, FeatureShiftScreen, TestResult};

/// Statements an expert can vouch for when no test settles them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    PriorShifted,
    ClassConditionalsEqual,
    ConceptStable,
    FeatureShifted,
    PerformanceDrop,
    ModelWellSpecified,
}

impl Claim {
    pub const ALL: [Claim; 6] = [
        Claim::PriorShifted,
        Claim::ClassConditionalsEqual,
        Claim::ConceptStable,
        Claim::FeatureShifted,
        Claim::PerformanceDrop,
        Claim::ModelWellSpecified,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Claim::PriorShifted => "prior_shifted",
            Claim::ClassConditionalsEqual => "class_conditionals_equal",
            Claim::ConceptStable => "concept_stable",
            Claim::FeatureShifted => "feature_shifted",
            Claim::PerformanceDrop => "performance_drop",
            Claim::ModelWellSpecified => "model_well_specified",
        }
    }

    /// Prompt put to an expert.
    pub fn question(self) -> &'static str {
        match self {
            Claim::PriorShifted => "Did the class proportions change between source and target?",
            Claim::ClassConditionalsEqual => "Does each class produce the same feature distribution in both domains?",
            Claim::ConceptStable => "Is the relation from features to label the same in both domains?",
            Claim::FeatureShifted => "Did the feature distribution change between the domains?",
            Claim::PerformanceDrop => "Does the source model perform noticeably worse on the target?",
            Claim::ModelWellSpecified => "Can the model class capture the true relation between features and label?",
        }
    }
}

impl std::str::FromStr for Claim {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Claim::ALL
            .into_iter()
            .find(|c| c.key() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown claim `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    pub claim: Claim,
    pub value: TriState,
    #[serde(default)]
    pub justification: String,
}

impl Assertion {
    pub fn new(claim: Claim, value: TriState, justification: impl Into<String>) -> Self {
        Self {
            claim,
            value,
            justification: justification.into(),
        }
    }
}

/// Accuracy of a model fitted on part of the source sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub learner: LearnerKind,
    pub n_train: usize,
    pub n_holdout: usize,
    pub source_train_accuracy: f64,
    pub source_holdout_accuracy: f64,
    /// Present only when the target is labeled.
    pub target_accuracy: Option<f64>,
}

impl ModelFit {
    pub fn generalization_gap(&self) -> f64 {
        self.source_train_accuracy - self.source_holdout_accuracy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScreen {
    pub label: String,
    pub screen: FeatureShiftScreen,
}

/// Per-class feature screens on labeled source and target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConditionalScreen {
    pub level: f64,
    pub per_class: Vec<ClassScreen>,
    /// Classes with fewer than two rows in either domain.
    pub skipped: Vec<String>,
    pub shifted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum TestEvidence {
    FeatureShift(FeatureShiftScreen),
    Mmd(TestResult),
    LabelShift(TestResult),
    ClassConditional(ClassConditionalScreen),
    ModelFit(ModelFit),
}

impl TestEvidence {
    pub fn name(&self) -> &'static str {
        match self {
            TestEvidence::FeatureShift(_) => "feature_shift",
            TestEvidence::Mmd(_) => "mmd",
            TestEvidence::LabelShift(_) => "label_shift",
            TestEvidence::ClassConditional(_) => "class_conditional",
            TestEvidence::ModelFit(_) => "fit_source_model",
        }
    }
}

/// Everything known about a domain pair. Tests accumulate in run order; for
/// each kind of question the most recent applicable entry is the one used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub causality: Causality,
    #[serde(default)]
    pub tests: Vec<TestEvidence>,
    #[serde(default)]
    pub divergence_estimates: Vec<DivergenceEstimate>,
    #[serde(default)]
    pub expert_assertions: Vec<Assertion>,
}

impl Evidence {
    pub fn new(causality: Causality) -> Self {
        Self {
            causality,
            tests: Vec::new(),
            divergence_estimates: Vec::new(),
            expert_assertions: Vec::new(),
        }
    }

    pub fn with_test(mut self, t: TestEvidence) -> Self {
        self.tests.push(t);
        self
    }

    pub fn with_assertion(mut self, claim: Claim, value: TriState, justification: impl Into<String>) -> Self {
        self.expert_assertions.push(Assertion::new(claim, value, justification));
        self
    }

    /// Last feature-law test, KS screen or MMD.
    pub fn feature_test(&self) -> Option<&TestEvidence> {
        self.tests
            .iter()
            .rev()
            .find(|t| matches!(t, TestEvidence::FeatureShift(_) | TestEvidence::Mmd(_)))
    }

    pub fn label_shift(&self) -> Option<&TestResult> {
        self.tests.iter().rev().find_map(|t| match t {
            TestEvidence::LabelShift(r) => Some(r),
            _ => None,
        })
    }

    pub fn class_conditional(&self) -> Option<&ClassConditionalScreen> {
        self.tests.iter().rev().find_map(|t| match t {
            TestEvidence::ClassConditional(r) => Some(r),
            _ => None,
        })
    }

    pub fn model_fit(&self) -> Option<&ModelFit> {
        self.tests.iter().rev().find_map(|t| match t {
            TestEvidence::ModelFit(r) => Some(r),
            _ => None,
        })
    }

    /// Last assertion on `claim` with a known value.
    pub fn assertion(&self, claim: Claim) -> Option<&Assertion> {
        self.expert_assertions
            .iter()
            .rev()
            .find(|a| a.claim == claim && a.value.is_known())
    }
}

/// Fits `learner` on a seeded split of the source, holding out
/// `holdout_fraction` of the rows, and scores the labeled target if any.
pub fn fit_source_model(pair: &DomainPair, learner: LearnerKind, holdout_fraction: f64, seed: u64) -> Result<ModelFit> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction must be in (0, 1), got {holdout_fraction}"
        )));
    }
    let n = pair.source.n();
    if n < 10 {
        return Err(Error::InsufficientSamples { needed: 10, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut component_rng(seed, "engine/holdout"));
    let n_holdout = ((n as f64 * holdout_fraction).round() as usize).clamp(1, n - 2);
    let (hold, fit) = idx.split_at(n_holdout);
    let train_set = pair.source.select(fit);
    let holdout = pair.source.select(hold);
    let model = train(
        &train_set,
        &pair.label_space,
        learner,
        Hyperparameters::for_kind(learner),
        None,
        seed,
    )?;
    let target_accuracy = if pair.target.is_labeled() {
        Some(evaluate(&model, &pair.target)?.accuracy)
    } else {
        None
    };
    Ok(ModelFit {
        learner,
        n_train: fit.len(),
        n_holdout,
        source_train_accuracy: evaluate(&model, &train_set)?.accuracy,
        source_holdout_accuracy: evaluate(&model, &holdout)?.accuracy,
        target_accuracy,
    })
}

/// KS feature screens per class. The class count joins the Bonferroni
/// correction, so each screen runs at `level / k`.
pub fn class_conditional_screen(pair: &DomainPair, level: f64) -> Result<ClassConditionalScreen> {
    let target_labels = pair.target_labels().ok_or(Error::TargetLabelsRequired)??;
    let source_labels = pair.source_labels()?;
    let mut groups = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..pair.label_space.len() {
        let rows = |labels: &[usize]| -> Vec<usize> { (0..labels.len()).filter(|&i| labels[i] == c).collect() };
        let (s, t) = (rows(&source_labels), rows(&target_labels));
        let label = pair.label_space.label(c).to_string();
        if s.len() < 2 || t.len() < 2 {
            skipped.push(label);
        } else {
            groups.push((label, s, t));
        }
    }
    if groups.is_empty() {
        return Err(Error::InsufficientSamples { needed: 2, got: 0 });
    }
    let k = groups.len() as f64;
    let mut per_class = Vec::new();
    for (label, s, t) in groups {
        let sub = DomainPair {
            source: pair.source.select(&s),
            target: pair.target.select(&t),
            label_space: pair.label_space.clone(),
        };
        per_class.push(ClassScreen {
            label,
            screen: feature_shift_screen(&sub, level / k)?,
        });
    }
    Ok(ClassConditionalScreen {
        level,
        shifted: per_class.iter().any(|c| c.screen.shifted),
        per_class,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ScenarioKind;
    use crate::synth::{generate, ScenarioSpec};

    #[test]
    fn class_conditional_screen_separates_prior_from_class_conditional() {
        let prior = generate(&ScenarioSpec::new(ScenarioKind::Prior, 600, 3)).unwrap().pair;
        let cc = generate(&ScenarioSpec::new(ScenarioKind::ClassConditional, 600, 3)).unwrap().pair;
        assert!(!class_conditional_screen(&prior, 0.05).unwrap().shifted);
        assert!(class_conditional_screen(&cc, 0.05).unwrap().shifted);
    }

    #[test]
    fn unlabeled_target_is_rejected() {
        let mut pair = generate(&ScenarioSpec::new(ScenarioKind::Prior, 100, 1)).unwrap().pair;
        pair.target = pair.target.without_labels();
        assert!(matches!(class_conditional_screen(&pair, 0.05), Err(Error::TargetLabelsRequired)));
        let fit = fit_source_model(&pair, LearnerKind::Logistic, 0.3, 1).unwrap();
        assert_eq!(fit.target_accuracy, None);
        assert_eq!(fit.n_holdout, 30);
    }

    #[test]
    fn claim_keys_round_trip() {
        for c in Claim::ALL {
            assert_eq!(c.key().parse::<Claim>().unwrap(), c);
        }
    }
}
