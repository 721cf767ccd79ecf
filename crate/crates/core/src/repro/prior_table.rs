use serde::{Deserialize, Serialize};

use super::{mean_std, text_table, Report};
use crate::data::{Dataset, ScenarioKind};
use crate::error::Result;
use crate::learners::{evaluate, train, Hyperparameters, LearnerKind};
use crate::rng::derive_seed;
use crate::synth::{generate, ScenarioParams, ScenarioSpec};

const RUNS: usize = 10;
const N_TRAIN: usize = 100;
const N_EVAL: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub mean: f64,
    pub std: f64,
}

impl AccuracyCell {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }
}

/// Accuracies of one run: `[model][domain]`, model 0 trained on the source,
/// model 1 on labeled target data; domain 0 source, 1 target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorRun {
    pub seed: u64,
    pub accuracy: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorTableReport {
    pub seed: u64,
    pub protocol: String,
    pub source_prior: f64,
    pub target_prior: f64,
    pub source_svm_on_source: AccuracyCell,
    pub source_svm_on_target: AccuracyCell,
    pub target_svm_on_source: AccuracyCell,
    pub target_svm_on_target: AccuracyCell,
    pub runs: Vec<PriorRun>,
    /// Mean target-domain accuracy of the source and target models for
    /// other values of `C`.
    pub c_sensitivity: Vec<(f64, f64, f64)>,
}

impl PriorTableReport {
    /// Whether the target-trained model beats the source model on target data
    /// (means over the runs).
    pub fn target_model_wins(&self) -> bool {
        self.target_svm_on_target.mean > self.source_svm_on_target.mean
    }
}

fn draw(kind: ScenarioKind, n: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let g = generate(&ScenarioSpec::new(kind, n, seed).with_params(ScenarioParams::default_for(kind)))?;
    Ok((g.pair.source, g.pair.target))
}

fn runs_with_c(seed: u64, c: f64) -> Result<Vec<PriorRun>> {
    let mut hyper = Hyperparameters::for_kind(LearnerKind::LinearSvm);
    hyper.c = c;
    (0..RUNS)
        .map(|r| {
            let run_seed = derive_seed(seed, &format!("prior-table/run-{r}"));
            let (src_train, tgt_train) = draw(ScenarioKind::Prior, N_TRAIN, derive_seed(run_seed, "train"))?;
            let (src_eval, tgt_eval) = draw(ScenarioKind::Prior, N_EVAL, derive_seed(run_seed, "eval"))?;
            let space = crate::data::LabelSpace::signed_binary();
            let mut accuracy = [[0.0; 2]; 2];
            for (m, train_set) in [&src_train, &tgt_train].into_iter().enumerate() {
                let model = train(
                    train_set,
                    &space,
                    LearnerKind::LinearSvm,
                    hyper,
                    None,
                    derive_seed(run_seed, &format!("svm-{m}")),
                )?;
                accuracy[m][0] = evaluate(&model, &src_eval)?.accuracy;
                accuracy[m][1] = evaluate(&model, &tgt_eval)?.accuracy;
            }
            Ok(PriorRun {
                seed: run_seed,
                accuracy,
            })
        })
        .collect()
}

/// Linear SVMs trained on 100 source and 100 labeled target samples of the
/// prior-shift generator, each evaluated on fresh draws of 1,000 per domain;
/// ten runs.
pub fn repro_prior_table(seed: u64) -> Result<PriorTableReport> {
    let runs = runs_with_c(seed, 1.0)?;
    let cell = |m: usize, d: usize| AccuracyCell::of(&runs.iter().map(|r| r.accuracy[m][d]).collect::<Vec<_>>());
    let mut c_sensitivity = Vec::new();
    for c in [0.1, 10.0] {
        let alt = runs_with_c(seed, c)?;
        let mean = |m: usize| alt.iter().map(|r| r.accuracy[m][1]).sum::<f64>() / alt.len() as f64;
        c_sensitivity.push((c, mean(0), mean(1)));
    }
    let ScenarioParams::Prior {
        source_prior,
        target_prior,
        ..
    } = ScenarioParams::default_for(ScenarioKind::Prior)
    else {
        unreachable!("prior defaults")
    };
    Ok(PriorTableReport {
        seed,
        protocol: format!(
            "linear SVM (C = 1), {RUNS} runs, {N_TRAIN} training samples per domain, evaluation on fresh draws of {N_EVAL} per domain"
        ),
        source_prior,
        target_prior,
        source_svm_on_source: cell(0, 0),
        source_svm_on_target: cell(0, 1),
        target_svm_on_source: cell(1, 0),
        target_svm_on_target: cell(1, 1),
        runs,
        c_sensitivity,
    })
}

impl Report for PriorTableReport {
    fn render_text(&self) -> String {
        let f = |c: &AccuracyCell| format!("{:.3} ± {:.3}", c.mean, c.std);
        let mut out = format!("Prior shift accuracy (seed {})\n{}\n\n", self.seed, self.protocol);
        out.push_str(&text_table(
            &["domain", "P(y=+1)", "SVM (source)", "SVM (target)"],
            &[
                vec![
                    "source".into(),
                    format!("{:.2}", self.source_prior),
                    f(&self.source_svm_on_source),
                    f(&self.target_svm_on_source),
                ],
                vec![
                    "target".into(),
                    format!("{:.2}", self.target_prior),
                    f(&self.source_svm_on_target),
                    f(&self.target_svm_on_target),
                ],
            ],
        ));
        out.push_str("\nC sensitivity (target-domain accuracy)\n");
        let rows: Vec<Vec<String>> = self
            .c_sensitivity
            .iter()
            .map(|(c, s, t)| vec![format!("{c}"), format!("{s:.3}"), format!("{t:.3}")])
            .collect();
        out.push_str(&text_table(&["C", "SVM (source)", "SVM (target)"], &rows));
        out
    }
}
