//! Scenario diagnosis from test evidence and expert assertions, then the
//! same engine driven as a session.
//!
//! `cargo run --release --example diagnose`

use shiftscope::data::{Causality, ScenarioKind, TriState};
use shiftscope::engine::{
    advance_session, class_conditional_screen, Assertion, classify, Claim, Evidence, SessionInput, SessionState, TestEvidence,
};
use shiftscope::stats::{feature_shift_screen, label_shift_test};
use shiftscope::synth::{generate, ScenarioSpec};

fn main() -> shiftscope::Result<()> {
    let pair = generate(&ScenarioSpec::new(ScenarioKind::ClassConditional, 500, 0))?.pair;
    let target = pair.target_labels().expect("synthetic target is labeled")?;
    let evidence = Evidence::new(Causality::YtoX)
        .with_test(TestEvidence::FeatureShift(feature_shift_screen(&pair, 0.05)?))
        .with_test(TestEvidence::LabelShift(label_shift_test(
            &pair.source_labels()?,
            &target,
            pair.label_space.len(),
        )?))
        .with_test(TestEvidence::ClassConditional(class_conditional_screen(&pair, 0.05)?));
    let d = classify(&evidence)?;
    println!("{:?} ({:?})", d.scenario.kind(), d.confidence);
    for line in &d.rationale {
        println!("  {line}");
    }
    println!("next: {}", d.recommendation.procedure);

    // Without data: the expert answers stand in for the tests.
    let mut s = SessionState::new("example", 0, 0);
    for input in [
        SessionInput::Causality { value: Causality::XtoY },
        SessionInput::Data { pair_ref: None },
        SessionInput::DoneTesting,
        SessionInput::Assertions {
            assertions: vec![
                Assertion::new(Claim::FeatureShifted, TriState::Yes, "new clinic"),
                Assertion::new(Claim::ConceptStable, TriState::Yes, "same protocol"),
            ],
        },
    ] {
        let from = s.step;
        s = advance_session(&s, &input, None, 0)?;
        println!("{from} --{}--> {}", input.name(), s.step);
    }
    if let Some(d) = &s.diagnosis {
        println!("session: {:?} ({:?})", d.scenario.kind(), d.confidence);
    }
    Ok(())
}
