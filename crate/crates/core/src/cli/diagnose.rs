use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::data::{Causality, DomainPair, TriState};
use crate::engine::{
    advance_session, Assertion, Claim, Diagnosis, Evidence, SessionInput, SessionState, TestRequest, Thresholds,
};
use crate::error::{Error, Result};
use crate::learners::LearnerKind;

/// Evidence and outcome of a terminal diagnosis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub evidence: Evidence,
    /// Tests that could not run on this data, with the reason.
    pub skipped_tests: Vec<String>,
    pub diagnosis: Diagnosis,
}

pub struct Prompter<'a> {
    pub input: &'a mut dyn BufRead,
    pub prompt: &'a mut dyn Write,
}

impl Prompter<'_> {
    fn ask(&mut self, q: &str) -> Result<Option<String>> {
        write!(self.prompt, "{q} ")?;
        self.prompt.flush()?;
        let mut line = String::new();
        if self.input.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim().to_string()))
    }
}

/// Parses `claim=value` or `claim=value:justification`.
pub fn parse_assertion(s: &str) -> Result<Assertion> {
    let (claim, rest) = s
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("expected claim=value, got `{s}`")))?;
    let (value, why) = rest.split_once(':').unwrap_or((rest, ""));
    Ok(Assertion::new(claim.parse()?, value.parse()?, why.trim()))
}

/// Claims a measurement does not already settle.
fn open_claims(causality: Causality, ev: &Evidence) -> Vec<Claim> {
    let target_accuracy = ev.model_fit().and_then(|m| m.target_accuracy).is_some();
    let mut claims = match causality {
        Causality::YtoX => vec![Claim::PriorShifted, Claim::ClassConditionalsEqual],
        _ => vec![Claim::ConceptStable, Claim::ModelWellSpecified],
    };
    claims.push(Claim::PerformanceDrop);
    claims.retain(|c| match c {
        Claim::PriorShifted => ev.label_shift().is_none(),
        Claim::ClassConditionalsEqual => ev.class_conditional().is_none(),
        Claim::ModelWellSpecified => ev.model_fit().is_none(),
        Claim::PerformanceDrop => !target_accuracy,
        _ => true,
    });
    claims
}

/// Causality, automatic tests, expert assertions, diagnosis. Answers given
/// up front skip the matching prompts.
pub fn run(
    pair: &DomainPair,
    causality: Option<Causality>,
    preset: Vec<Assertion>,
    learner: LearnerKind,
    seed: u64,
    level: f64,
    prompter: &mut Prompter<'_>,
) -> Result<DiagnoseReport> {
    let causality = match causality {
        Some(c) => c,
        None => {
            let answer = prompter
                .ask("Causality: do features cause the label (XtoY), the label the features (YtoX), or Unknown?")?
                .unwrap_or_default();
            answer.parse::<Causality>()?
        }
    };
    let thresholds = Thresholds {
        level,
        ..Thresholds::default()
    };
    let mut s = SessionState::new("cli", seed, 0).with_thresholds(thresholds);
    s = advance_session(&s, &SessionInput::Causality { value: causality }, None, 0)?;
    if s.advisory.is_some() {
        return Err(Error::CausalResearchRequired);
    }
    s = advance_session(&s, &SessionInput::Data { pair_ref: Some("cli".into()) }, None, 0)?;
    let mut tests = vec![TestRequest::FeatureShift];
    if pair.target.is_labeled() {
        tests.push(TestRequest::LabelShift);
        if causality == Causality::YtoX {
            tests.push(TestRequest::ClassConditional);
        }
    }
    tests.push(TestRequest::FitSourceModel {
        learner,
        holdout_fraction: 0.3,
    });
    let mut skipped_tests = Vec::new();
    for test in tests {
        match advance_session(&s, &SessionInput::RunTest { test: test.clone() }, Some(pair), 0) {
            Ok(next) => s = next,
            Err(e) => skipped_tests.push(format!("{test:?}: {e}")),
        }
    }
    s = advance_session(&s, &SessionInput::DoneTesting, None, 0)?;
    let evidence = s.evidence.clone().expect("causality set");
    let mut assertions = preset;
    for claim in open_claims(causality, &evidence) {
        if assertions.iter().any(|a| a.claim == claim) {
            continue;
        }
        let value = match prompter.ask(&format!("{} [yes/no/unknown]", claim.question()))? {
            Some(v) => v.parse::<TriState>()?,
            None => TriState::Unknown,
        };
        let justification = if value.is_known() {
            prompter.ask("  justification:")?.unwrap_or_default()
        } else {
            String::new()
        };
        assertions.push(Assertion::new(claim, value, justification));
    }
    s = advance_session(&s, &SessionInput::Assertions { assertions }, None, 0)?;
    Ok(DiagnoseReport {
        evidence: s.evidence.expect("causality set"),
        skipped_tests,
        diagnosis: s.diagnosis.expect("assertions yield a diagnosis"),
    })
}

pub fn render_text(r: &DiagnoseReport) -> String {
    let d = &r.diagnosis;
    let mut out = format!(
        "Scenario: {} ({:?}), confidence {:?}\n\nRationale:\n",
        d.scenario.kind(),
        d.scenario.causality(),
        d.confidence
    );
    for line in &d.rationale {
        out.push_str(&format!("  - {line}\n"));
    }
    for t in &r.skipped_tests {
        out.push_str(&format!("  - skipped {t}\n"));
    }
    let rec = &d.recommendation;
    out.push_str(&format!("\nRecommendation:\n  {}\n  Further reading: {}\n", rec.procedure, rec.further_reading));
    if !rec.executable_actions.is_empty() {
        let names: Vec<String> = rec
            .executable_actions
            .iter()
            .map(|a| serde_json::to_value(a).map(|v| v.as_str().unwrap_or_default().to_string()).unwrap_or_default())
            .collect();
        out.push_str(&format!("  Actions: {}\n", names.join(", ")));
    }
    for c in &rec.caveats {
        out.push_str(&format!("  Caveat: {c}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ScenarioKind;
    use crate::synth::{generate, ScenarioSpec};

    #[test]
    fn prompts_drive_a_prior_diagnosis() {
        let pair = generate(&ScenarioSpec::new(ScenarioKind::Prior, 400, 4)).unwrap().pair;
        let mut input: &[u8] = b"YtoX\n";
        let mut prompt = Vec::new();
        let mut p = Prompter {
            input: &mut input,
            prompt: &mut prompt,
        };
        let r = run(&pair, None, vec![], LearnerKind::Logistic, 0, 0.05, &mut p).unwrap();
        assert_eq!(r.diagnosis.scenario.kind(), ScenarioKind::Prior);
        // A labeled target lets tests settle every YtoX claim.
        assert!(!String::from_utf8(prompt).unwrap().contains("[yes/no/unknown]"));
    }

    #[test]
    fn assertion_syntax() {
        let a = parse_assertion("concept_stable=yes:same physiology").unwrap();
        assert_eq!((a.claim, a.value, a.justification.as_str()), (Claim::ConceptStable, TriState::Yes, "same physiology"));
        assert!(parse_assertion("concept_stable").is_err());
        assert!(parse_assertion("bogus=yes").is_err());
    }
}
