use std::fmt;

use serde::{Deserialize, Serialize};

use super::classify::{classify_with, Diagnosis, Thresholds};
use super::evidence::{class_conditional_screen, fit_source_model, Assertion, Evidence, TestEvidence};
use crate::data::{Causality, DomainPair};
use crate::error::{Error, Result};
use crate::learners::LearnerKind;
use crate::rng::derive_seed;
use crate::stats::{feature_shift_screen, label_shift_test, mmd_permutation_test};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    AwaitCausality,
    AwaitData,
    Testing,
    AwaitExpertAssertions,
    Diagnosed,
}

impl Step {
    /// Input names accepted at this step.
    pub fn allowed_inputs(self) -> &'static [&'static str] {
        match self {
            Step::AwaitCausality => &["causality"],
            Step::AwaitData => &["data"],
            Step::Testing => &["run_test", "done_testing"],
            Step::AwaitExpertAssertions => &["assertions"],
            Step::Diagnosed => &[],
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

fn default_permutations() -> usize {
    500
}

fn default_holdout() -> f64 {
    0.3
}

fn default_learner() -> LearnerKind {
    LearnerKind::Logistic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum TestRequest {
    FeatureShift,
    LabelShift,
    Mmd {
        #[serde(default = "default_permutations")]
        permutations: usize,
    },
    ClassConditional,
    FitSourceModel {
        #[serde(default = "default_learner")]
        learner: LearnerKind,
        #[serde(default = "default_holdout")]
        holdout_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "input", rename_all = "snake_case")]
pub enum SessionInput {
    Causality {
        value: Causality,
    },
    /// Reference to the uploaded pair, or `None` to continue on assertions
    /// alone.
    Data {
        pair_ref: Option<String>,
    },
    RunTest {
        #[serde(flatten)]
        test: TestRequest,
    },
    DoneTesting,
    Assertions {
        assertions: Vec<Assertion>,
    },
}

impl SessionInput {
    pub fn name(&self) -> &'static str {
        match self {
            SessionInput::Causality { .. } => "causality",
            SessionInput::Data { .. } => "data",
            SessionInput::RunTest { .. } => "run_test",
            SessionInput::DoneTesting => "done_testing",
            SessionInput::Assertions { .. } => "assertions",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: Step,
    pub input: String,
    pub to: Step,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    /// Root for the seeds of every stochastic test in the session.
    pub seed: u64,
    pub thresholds: Thresholds,
    pub step: Step,
    pub pair_ref: Option<String>,
    pub evidence: Option<Evidence>,
    pub diagnosis: Option<Diagnosis>,
    /// Terminal message when no diagnosis can be given.
    pub advisory: Option<String>,
    /// Every applied transition, oldest first.
    pub history: Vec<Transition>,
    pub created_at: u64,
    pub updated_at: u64,
}

impl SessionState {
    pub fn new(id: impl Into<String>, seed: u64, now: u64) -> Self {
        Self {
            id: id.into(),
            seed,
            thresholds: Thresholds::default(),
            step: Step::AwaitCausality,
            pair_ref: None,
            evidence: None,
            diagnosis: None,
            advisory: None,
            history: Vec::new(),
            created_at: now,
            updated_at: now,
        }
    }

    pub fn with_thresholds(mut self, t: Thresholds) -> Self {
        self.thresholds = t;
        self
    }

    pub fn is_terminal(&self) -> bool {
        self.step == Step::Diagnosed
    }
}

pub(crate) fn illegal(step: Step, input: &str) -> Error {
    let allowed = step.allowed_inputs();
    Error::IllegalTransition {
        step: step.to_string(),
        input: input.into(),
        allowed: if allowed.is_empty() {
            "none (terminal)".into()
        } else {
            allowed.join(", ")
        },
    }
}

fn run_test(req: &TestRequest, pair: &DomainPair, level: f64, seed: u64) -> Result<TestEvidence> {
    Ok(match req {
        TestRequest::FeatureShift => TestEvidence::FeatureShift(feature_shift_screen(pair, level)?),
        TestRequest::LabelShift => {
            let t = pair.target_labels().ok_or(Error::TargetLabelsRequired)??;
            TestEvidence::LabelShift(label_shift_test(&pair.source_labels()?, &t, pair.label_space.len())?)
        }
        TestRequest::Mmd { permutations } => TestEvidence::Mmd(mmd_permutation_test(
            &pair.source.without_labels(),
            &pair.target.without_labels(),
            *permutations,
            seed,
        )?),
        TestRequest::ClassConditional => TestEvidence::ClassConditional(class_conditional_screen(pair, level)?),
        TestRequest::FitSourceModel {
            learner,
            holdout_fraction,
        } => TestEvidence::ModelFit(fit_source_model(pair, *learner, *holdout_fraction, seed)?),
    })
}

/// Pure transition. `pair` must be the data behind `state.pair_ref` when a
/// test is requested; `now` stamps the transition.
pub fn advance_session(
    state: &SessionState,
    input: &SessionInput,
    pair: Option<&DomainPair>,
    now: u64,
) -> Result<SessionState> {
    let mut next = state.clone();
    match (state.step, input) {
        (Step::AwaitCausality, SessionInput::Causality { value }) => {
            if *value == Causality::Unknown {
                next.step = Step::Diagnosed;
                next.advisory = Some(Error::CausalResearchRequired.to_string());
            } else {
                next.step = Step::AwaitData;
                next.evidence = Some(Evidence::new(*value));
            }
        }
        (Step::AwaitData, SessionInput::Data { pair_ref }) => {
            next.pair_ref = pair_ref.clone();
            next.step = Step::Testing;
        }
        (Step::Testing, SessionInput::RunTest { test }) => {
            if state.pair_ref.is_none() {
                return Err(Error::IllegalTransition {
                    step: state.step.to_string(),
                    input: "run_test".into(),
                    allowed: "done_testing (no datasets attached)".into(),
                });
            }
            let pair = pair.ok_or_else(|| {
                Error::InvalidArgument(format!("dataset pair `{}` not supplied", state.pair_ref.as_deref().unwrap_or("")))
            })?;
            let evidence = next.evidence.as_mut().expect("causality answered before testing");
            let seed = derive_seed(state.seed, &format!("session/test-{}", evidence.tests.len()));
            evidence.tests.push(run_test(test, pair, state.thresholds.level, seed)?);
        }
        (Step::Testing, SessionInput::DoneTesting) => next.step = Step::AwaitExpertAssertions,
        (Step::AwaitExpertAssertions, SessionInput::Assertions { assertions }) => {
            let evidence = next.evidence.as_mut().expect("causality answered before assertions");
            evidence.expert_assertions.extend(assertions.iter().cloned());
            next.diagnosis = Some(classify_with(evidence, &state.thresholds)?);
            next.step = Step::Diagnosed;
        }
        (step, other) => return Err(illegal(step, other.name())),
    }
    next.history.push(Transition {
        from: state.step,
        input: input.name().into(),
        to: next.step,
        at: now,
    });
    next.updated_at = now;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ScenarioKind, TriState};
    use crate::engine::evidence::Claim;
    use crate::synth::{generate, ScenarioSpec};
    use proptest::prelude::*;

    fn causality(c: Causality) -> SessionInput {
        SessionInput::Causality { value: c }
    }

    #[test]
    fn full_flow_reaches_a_diagnosis() {
        let pair = generate(&ScenarioSpec::new(ScenarioKind::Prior, 400, 2)).unwrap().pair;
        let s = SessionState::new("s1", 0, 1);
        let s = advance_session(&s, &causality(Causality::YtoX), None, 2).unwrap();
        assert_eq!(s.step, Step::AwaitData);
        let s = advance_session(&s, &SessionInput::Data { pair_ref: Some("p".into()) }, None, 3).unwrap();
        let s = advance_session(&s, &SessionInput::RunTest { test: TestRequest::LabelShift }, Some(&pair), 4).unwrap();
        assert_eq!(s.step, Step::Testing);
        assert_eq!(s.evidence.as_ref().unwrap().tests.len(), 1);
        let s = advance_session(&s, &SessionInput::DoneTesting, None, 5).unwrap();
        let a = vec![Assertion::new(Claim::ClassConditionalsEqual, TriState::Yes, "same lab")];
        let s = advance_session(&s, &SessionInput::Assertions { assertions: a }, None, 6).unwrap();
        assert_eq!(s.step, Step::Diagnosed);
        assert_eq!(s.diagnosis.unwrap().scenario.kind(), ScenarioKind::Prior);
        assert_eq!(s.history.len(), 5);
        assert_eq!((s.created_at, s.updated_at), (1, 6));
    }

    #[test]
    fn data_upload_before_causality_is_rejected() {
        let s = SessionState::new("s", 0, 0);
        let err = advance_session(&s, &SessionInput::Data { pair_ref: Some("p".into()) }, None, 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("AwaitCausality") && msg.contains("causality"), "{msg}");
    }

    #[test]
    fn unknown_causality_ends_with_advisory() {
        let s = advance_session(&SessionState::new("s", 0, 0), &causality(Causality::Unknown), None, 1).unwrap();
        assert!(s.is_terminal());
        assert!(s.diagnosis.is_none());
        assert!(s.advisory.unwrap().contains("causal research required"));
    }

    #[test]
    fn tests_without_data_are_rejected() {
        let s = advance_session(&SessionState::new("s", 0, 0), &causality(Causality::XtoY), None, 1).unwrap();
        let s = advance_session(&s, &SessionInput::Data { pair_ref: None }, None, 2).unwrap();
        let r = advance_session(&s, &SessionInput::RunTest { test: TestRequest::FeatureShift }, None, 3);
        assert!(matches!(r, Err(Error::IllegalTransition { .. })));
    }

    #[test]
    fn input_json_shape() {
        let i: SessionInput = serde_json::from_str(r#"{"input":"run_test","test":"mmd"}"#).unwrap();
        assert_eq!(i, SessionInput::RunTest { test: TestRequest::Mmd { permutations: 500 } });
        let i: SessionInput = serde_json::from_str(r#"{"input":"causality","value":"YtoX"}"#).unwrap();
        assert_eq!(i, causality(Causality::YtoX));
    }

    fn arb_input() -> impl Strategy<Value = SessionInput> {
        prop_oneof![
            prop::sample::select(Causality::ALL.to_vec()).prop_map(causality),
            any::<bool>().prop_map(|b| SessionInput::Data { pair_ref: b.then(|| "p".to_string()) }),
            Just(SessionInput::RunTest { test: TestRequest::FeatureShift }),
            Just(SessionInput::DoneTesting),
            Just(SessionInput::Assertions { assertions: vec![] }),
        ]
    }

    fn rank(s: Step) -> u8 {
        match s {
            Step::AwaitCausality => 0,
            Step::AwaitData => 1,
            Step::Testing => 2,
            Step::AwaitExpertAssertions => 3,
            Step::Diagnosed => 4,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn transitions_only_move_forward(inputs in prop::collection::vec(arb_input(), 1..12)) {
            let pair = generate(&ScenarioSpec::new(ScenarioKind::Covariate, 60, 1)).unwrap().pair;
            let mut s = SessionState::new("p", 0, 0);
            for (t, input) in inputs.iter().enumerate() {
                match advance_session(&s, input, Some(&pair), t as u64 + 1) {
                    Ok(next) => {
                        prop_assert!(rank(next.step) > rank(s.step) || (s.step == Step::Testing && next.step == Step::Testing));
                        prop_assert_eq!(next.history.len(), s.history.len() + 1);
                        s = next;
                    }
                    Err(e) => {
                        let illegal = matches!(e, Error::IllegalTransition { .. });
                        prop_assert!(illegal, "{}", e);
                        prop_assert!(!s.step.allowed_inputs().contains(&input.name()) || s.pair_ref.is_none());
                    }
                }
            }
            for w in s.history.windows(2) {
                prop_assert_eq!(w[0].to, w[1].from);
            }
        }
    }
}
