//! The three source learners on covariate-shift data with a curved
//! boundary, where the linear models are misspecified.
//!
//! `cargo run --release --example learners`

use shiftscope::data::ScenarioKind;
use shiftscope::learners::{evaluate, train, Hyperparameters, LearnerKind};
use shiftscope::synth::{generate, ScenarioParams, ScenarioSpec};

fn main() -> shiftscope::Result<()> {
    let spec = ScenarioSpec::new(ScenarioKind::Covariate, 400, 0).with_params(ScenarioParams::misspecified_covariate());
    let pair = generate(&spec)?.pair;
    for kind in [LearnerKind::Logistic, LearnerKind::LinearSvm, LearnerKind::RbfSvm] {
        let model = train(&pair.source, &pair.label_space, kind, Hyperparameters::for_kind(kind), None, 0)?;
        let src = evaluate(&model, &pair.source)?;
        let tgt = evaluate(&model, &pair.target)?;
        println!("{kind:?}: source {:.3}, target {:.3}", src.accuracy, tgt.accuracy);
    }
    Ok(())
}
