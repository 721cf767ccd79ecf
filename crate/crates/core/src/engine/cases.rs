use serde::{Deserialize, Serialize};

use super::classify::Thresholds;
use super::evidence::{Assertion, Claim, Evidence, TestEvidence};
use super::session::SessionInput;
use crate::data::{Causality, ScenarioKind, TriState};
use crate::error::Result;
use crate::rng::derive_seed;
use crate::stats::{feature_shift_screen, label_shift_test};
use crate::synth::{generate, ScenarioParams, ScenarioSpec};

const HEART_N: usize = 300;

/// A case with evidence assembled from tests on synthetic stand-in data and
/// expert assertions, plus the scenario it should classify as.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkedCase {
    pub key: String,
    pub title: String,
    pub evidence: Evidence,
    pub expected: ScenarioKind,
}

/// Heart disease, breast cancer and MNIST/SVHN digit recognition.
pub fn worked_cases(seed: u64) -> Result<Vec<WorkedCase>> {
    let level = Thresholds::default().level;

    let heart_seed = derive_seed(seed, "cases/heart");
    let mut heart_pair = generate(
        &ScenarioSpec::new(ScenarioKind::Covariate, HEART_N, heart_seed)
            .with_params(ScenarioParams::misspecified_covariate()),
    )?
    .pair;
    heart_pair.target = heart_pair.target.without_labels();
    // The stand-in's linear fit clears the holdout thresholds even though the
    // concept is curved, so misspecification enters as the expert's call.
    let heart_ev = Evidence::new(Causality::XtoY)
        .with_test(TestEvidence::FeatureShift(feature_shift_screen(&heart_pair, level)?))
        .with_assertion(
            Claim::ConceptStable,
            TriState::Yes,
            "patients in both clinics share the same physiology",
        )
        .with_assertion(
            Claim::ModelWellSpecified,
            TriState::No,
            "two features and a linear boundary cannot capture heart-disease risk",
        );

    let breast = crate::repro::breast_standin_pair(derive_seed(seed, "cases/breast"))?;
    let target_labels = breast.target_labels().expect("stand-in target is labeled")?;
    let breast_ev = Evidence::new(Causality::YtoX)
        .with_test(TestEvidence::LabelShift(label_shift_test(
            &breast.source_labels()?,
            &target_labels,
            breast.label_space.len(),
        )?))
        .with_assertion(
            Claim::ClassConditionalsEqual,
            TriState::Yes,
            "all slides imaged under the same protocol; only the class mix was resampled",
        );

    let digits_ev = Evidence::new(Causality::YtoX)
        .with_assertion(
            Claim::PriorShifted,
            TriState::Yes,
            "house-number digits are imbalanced towards low values, handwritten digits are balanced",
        )
        .with_assertion(
            Claim::ClassConditionalsEqual,
            TriState::No,
            "grayscale handwriting versus colour street photographs",
        );

    Ok(vec![
        WorkedCase {
            key: "heart".into(),
            title: "Heart disease, Hungarian clinic to Long Beach".into(),
            evidence: heart_ev,
            expected: ScenarioKind::Covariate,
        },
        WorkedCase {
            key: "breast".into(),
            title: "Breast cancer cytology with a resampled class mix".into(),
            evidence: breast_ev,
            expected: ScenarioKind::Prior,
        },
        WorkedCase {
            key: "mnist-svhn".into(),
            title: "Digit recognition, MNIST to SVHN".into(),
            evidence: digits_ev,
            expected: ScenarioKind::General,
        },
    ])
}

/// Text-only case for the wizard: a description plus the answers an expert
/// following the framework would give.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CannedCase {
    pub key: String,
    pub title: String,
    pub description: String,
    pub causality: Causality,
    pub assertions: Vec<Assertion>,
    pub expected: ScenarioKind,
}

impl CannedCase {
    /// Session inputs that replay the case without datasets.
    pub fn session_inputs(&self) -> Vec<SessionInput> {
        vec![
            SessionInput::Causality { value: self.causality },
            SessionInput::Data { pair_ref: None },
            SessionInput::DoneTesting,
            SessionInput::Assertions {
                assertions: self.assertions.clone(),
            },
        ]
    }
}

pub fn canned_cases() -> Vec<CannedCase> {
    vec![
        CannedCase {
            key: "heart-disease".into(),
            title: "Heart Disease".into(),
            description: "A linear model predicts from age and cholesterol whether a patient will develop heart \
                          disease. It is trained on records from a clinic in Budapest and deployed in Long Beach. \
                          The two patient populations differ in age and cholesterol. Target labels are not \
                          available, and the two-feature linear model scores poorly even on held-out source data."
                .into(),
            causality: Causality::XtoY,
            assertions: vec![
                Assertion::new(Claim::FeatureShifted, TriState::Yes, "age and cholesterol distributions differ"),
                Assertion::new(Claim::ConceptStable, TriState::Yes, "the disease mechanism is the same in both cities"),
                Assertion::new(
                    Claim::ModelWellSpecified,
                    TriState::No,
                    "low holdout accuracy; two features and a linear boundary are too simple",
                ),
            ],
            expected: ScenarioKind::Covariate,
        },
        CannedCase {
            key: "spam-detection".into(),
            title: "Spam Detection".into(),
            description: "A spam filter was trained on a mailbox where half of the messages were spam. After a \
                          new upstream filter was introduced, only a small share of incoming mail is spam. The \
                          way spam and legitimate messages are written has not changed."
                .into(),
            causality: Causality::YtoX,
            assertions: vec![
                Assertion::new(Claim::PriorShifted, TriState::Yes, "share of spam dropped after upstream filtering"),
                Assertion::new(
                    Claim::ClassConditionalsEqual,
                    TriState::Yes,
                    "message content per class is unchanged",
                ),
            ],
            expected: ScenarioKind::Prior,
        },
        CannedCase {
            key: "image-recognition".into(),
            title: "Image Recognition".into(),
            description: "A classifier tells cats from dogs. Training photos were taken in daylight with one \
                          camera; deployment photos are taken at night with another. Both domains contain as \
                          many cats as dogs."
                .into(),
            causality: Causality::YtoX,
            assertions: vec![
                Assertion::new(Claim::PriorShifted, TriState::No, "equal share of cats and dogs in both domains"),
                Assertion::new(
                    Claim::ClassConditionalsEqual,
                    TriState::No,
                    "camera and lighting change how each animal looks",
                ),
            ],
            expected: ScenarioKind::ClassConditional,
        },
    ]
}
