//! Scenario engine: the shift matrix of each scenario, rule-based
//! classification of evidence into a scenario, the recommendation catalog
//! and the wizard session state machine.

mod cases;
mod classify;
mod evidence;
mod session;

pub use cases::{canned_cases, worked_cases, CannedCase, WorkedCase};
pub use classify::{classify, classify_with, Confidence, Diagnosis, Fact, FactSource, Thresholds};
pub use evidence::{
    class_conditional_screen, fit_source_model, Assertion, Claim, ClassConditionalScreen, Evidence, ModelFit,
    TestEvidence,
};
pub use session::{advance_session, SessionInput, SessionState, Step, TestRequest, Transition};
pub(crate) use session::illegal;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Causality, ScenarioKind, ShiftCell, ShiftMatrix, ShiftScenario, TriState};
use crate::error::Result;

/// Which of the five distributions move under `kind`, with the cells fixed
/// by the scenario's definition flagged.
pub fn derive_shift_matrix(kind: ScenarioKind, causality: Causality) -> Result<ShiftMatrix> {
    ShiftScenario::new(kind, causality)?;
    let cell = |shifted: bool, definitional: bool| ShiftCell {
        shifted: TriState::from_bool(shifted),
        definitional,
    };
    let yes = cell(true, false);
    // Order: P(y), P(x), P(x|y), P(y|x), joint.
    let cells = match kind {
        ScenarioKind::Prior => [cell(true, true), yes, cell(false, true), yes, yes],
        ScenarioKind::ClassConditional => [cell(false, true), yes, cell(true, true), yes, yes],
        ScenarioKind::Covariate => [yes, cell(true, true), yes, cell(false, true), yes],
        ScenarioKind::Concept => [yes, cell(false, true), yes, cell(true, true), yes],
        ScenarioKind::General => [yes; 5],
    };
    Ok(ShiftMatrix {
        delta_py: cells[0],
        delta_px: cells[1],
        delta_px_given_y: cells[2],
        delta_py_given_x: cells[3],
        delta_joint: cells[4],
    })
}

/// Toolkit operations a recommendation can point at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    EmPriorAdjust,
    KernelMeanMatching,
    /// No reweighting; fit on the union of available labeled samples.
    TrainOnAllSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub kind: ScenarioKind,
    pub causality: String,
    pub procedure: String,
    pub further_reading: String,
    pub caveats: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub kind: ScenarioKind,
    pub procedure: String,
    pub further_reading: String,
    pub executable_actions: Vec<Action>,
    pub caveats: Vec<String>,
}

const NO_FREE_LUNCH: &str =
    "No free lunch: whether a given alignment method learns the transformation cannot be known before trying it.";

fn entry(kind: ScenarioKind) -> CatalogEntry {
    let (causality, procedure, further_reading, caveats): (&str, &str, &str, Vec<&str>) = match kind {
        ScenarioKind::Prior => (
            "YtoX",
            "Perform class-based reweighting. Either set the class weights deliberately when some classes \
             matter more than others, or estimate the target class prior from unlabeled target data with \
             EM over the source model's posteriors and rescale the posteriors to it.",
            "cost-sensitive learning; learning from imbalanced data",
            vec![],
        ),
        ScenarioKind::ClassConditional => (
            "YtoX",
            "Learn a map between the domains under which the source and target feature laws agree, for \
             instance through subspace alignment, domain-invariant representations, feature augmentation \
             or adversarial training.",
            "surveys of unsupervised deep domain adaptation",
            vec![NO_FREE_LUNCH],
        ),
        ScenarioKind::Covariate => (
            "XtoY",
            "If the model is misspecified, reweight source samples towards the target feature law, for \
             instance with kernel mean matching, and retrain. If it is well specified, skip adaptation and \
             train on as many samples as are available.",
            "sample selection bias",
            vec![],
        ),
        ScenarioKind::Concept => (
            "XtoY",
            "No domain adaptation scenario: the features keep their law while the labelling rule moves, so \
             the task itself changed. Collect labeled target data or use concept-drift methods.",
            "concept drift",
            vec![],
        ),
        ScenarioKind::General => (
            "YtoX or XtoY",
            "Apply the procedures of the basic shifts for the stated causality: the class-conditional \
             procedures under YtoX, the concept procedures under XtoY. Results hinge on how large each \
             component shift is and on the chosen method. Feed in every known fact about how the domains \
             relate.",
            "surveys of unsupervised deep domain adaptation; concept drift",
            vec!["There is no performance guarantee.", NO_FREE_LUNCH],
        ),
    };
    CatalogEntry {
        kind,
        causality: causality.into(),
        procedure: procedure.into(),
        further_reading: further_reading.into(),
        caveats: caveats.into_iter().map(String::from).collect(),
    }
}

/// Every catalog row keyed by scenario name.
pub fn recommendation_catalog() -> BTreeMap<String, CatalogEntry> {
    ScenarioKind::ALL.iter().map(|&k| (k.to_string(), entry(k))).collect()
}

/// Catalog row for `kind` with its executable actions. `well_specified` only
/// matters for covariate shift.
pub fn recommend(kind: ScenarioKind, well_specified: TriState) -> Recommendation {
    let e = entry(kind);
    let executable_actions = match kind {
        ScenarioKind::Prior => vec![Action::EmPriorAdjust],
        ScenarioKind::Covariate if well_specified == TriState::Yes => {
            vec![Action::TrainOnAllSamples, Action::KernelMeanMatching]
        }
        ScenarioKind::Covariate => vec![Action::KernelMeanMatching],
        ScenarioKind::Concept | ScenarioKind::ClassConditional | ScenarioKind::General => vec![],
    };
    Recommendation {
        kind,
        procedure: e.procedure,
        further_reading: e.further_reading,
        executable_actions,
        caveats: e.caveats,
    }
}
