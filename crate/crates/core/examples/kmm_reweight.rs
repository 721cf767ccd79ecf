//! Kernel mean matching on a covariate-shift pair, then a weighted
//! logistic model compared with the unweighted one on the target.
//!
//! `cargo run --release --example kmm_reweight`

use shiftscope::adapt::{kernel_mean_matching, KmmOptions};
use shiftscope::data::ScenarioKind;
use shiftscope::learners::{evaluate, train, Hyperparameters, LearnerKind};
use shiftscope::synth::{generate, ScenarioParams, ScenarioSpec};

fn main() -> shiftscope::Result<()> {
    let spec = ScenarioSpec::new(ScenarioKind::Covariate, 300, 0).with_params(ScenarioParams::misspecified_covariate());
    let pair = generate(&spec)?.pair;
    let unlabeled = shiftscope::data::DomainPair::new(
        pair.source.clone(),
        pair.target.without_labels(),
        pair.label_space.clone(),
    )?;

    let kmm = kernel_mean_matching(&unlabeled, KmmOptions::default())?;
    let w = kmm.weights.values();
    let max = w.iter().copied().fold(0.0, f64::max);
    println!(
        "kmm: {} iterations, converged {}, objective {:.4} -> {:.4}, max weight {max:.2}",
        kmm.iterations,
        kmm.converged,
        kmm.objective_trajectory[0],
        kmm.objective_trajectory.last().unwrap()
    );

    let hyper = Hyperparameters::for_kind(LearnerKind::Logistic);
    let plain = train(&pair.source, &pair.label_space, LearnerKind::Logistic, hyper, None, 0)?;
    let weighted = train(&pair.source, &pair.label_space, LearnerKind::Logistic, hyper, Some(&kmm.weights), 0)?;
    println!("target accuracy unweighted {:.3}", evaluate(&plain, &pair.target)?.accuracy);
    println!("target accuracy weighted   {:.3}", evaluate(&weighted, &pair.target)?.accuracy);
    Ok(())
}
