//! EM estimate of the target class prior from a source classifier's
//! posteriors, and the adjusted predictions.
//!
//! `cargo run --release --example em_prior`

use shiftscope::adapt::{adjust_posteriors, em_prior_adjust, EmOptions};
use shiftscope::data::{empirical_prior, ScenarioKind};
use shiftscope::learners::{argmax_rows, train, Hyperparameters, LearnerKind};
use shiftscope::synth::{generate, ScenarioSpec};

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

fn main() -> shiftscope::Result<()> {
    let pair = generate(&ScenarioSpec::new(ScenarioKind::Prior, 2000, 0))?.pair;
    let space = &pair.label_space;
    let model = train(
        &pair.source,
        space,
        LearnerKind::Logistic,
        Hyperparameters::for_kind(LearnerKind::Logistic),
        None,
        0,
    )?;
    let source_prior = empirical_prior(&pair.source, space)?;
    let post = model.predict_posterior(&pair.target.without_labels())?;

    let em = em_prior_adjust(post.view(), &source_prior, EmOptions::default())?;
    let truth = pair.target_labels().expect("synthetic target is labeled")?;
    println!("labels        {:?}", space.labels());
    println!("source prior  {source_prior:.3?}");
    println!("true target   {:.3?}", empirical_prior(&pair.target, space)?);
    println!("em estimate   {:.3?} after {} iterations", em.estimated_target_prior, em.iterations);

    let adjusted = adjust_posteriors(post.view(), &source_prior, &em.estimated_target_prior)?;
    println!("accuracy before {:.3}", accuracy(&argmax_rows(post.view()), &truth));
    println!("accuracy after  {:.3}", accuracy(&argmax_rows(adjusted.view()), &truth));
    Ok(())
}
