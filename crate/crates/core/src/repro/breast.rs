use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{mean_std, text_table, Report};
use crate::adapt::{adjust_posteriors, confusion_matrix_prior, em_prior_adjust, EmOptions};
use crate::data::{empirical_prior, read_csv_path, Dataset, DomainPair, LabelSpace};
use crate::error::{Error, Result};
use crate::learners::{argmax_rows, train, Hyperparameters, LearnerKind};
use crate::rng::{component_rng, derive_seed};

pub const BREAST_FILE: &str = "breast/breast.csv";
/// Positive class first.
pub const BREAST_LABELS: [&str; 2] = ["malignant", "benign"];
/// Malignant share of every target sample.
pub const BREAST_TARGET_PRIOR: f64 = 0.20;
const RUNS: usize = 10;
const SOURCE_PER_CLASS: usize = 120;
const STANDIN_DIM: usize = 9;
const STANDIN_SEPARATION: f64 = 0.9;
const STANDIN_TARGET_N: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreastDataSource {
    Uci,
    SyntheticStandIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreastRun {
    pub seed: u64,
    pub n_source: usize,
    pub n_target: usize,
    pub true_prior: f64,
    pub em_prior: f64,
    pub confusion_prior: f64,
    pub em_iterations: usize,
    pub accuracy_unadjusted: f64,
    pub accuracy_em: f64,
    pub accuracy_confusion: f64,
    pub accuracy_true_prior: f64,
}

impl BreastRun {
    pub fn em_closer_than_confusion(&self) -> bool {
        (self.em_prior - self.true_prior).abs() < (self.confusion_prior - self.true_prior).abs()
    }

    /// `true-prior >= EM >= unadjusted - 0.005`.
    pub fn ordering_holds(&self) -> bool {
        self.accuracy_true_prior >= self.accuracy_em && self.accuracy_em >= self.accuracy_unadjusted - 0.005
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreastReport {
    pub seed: u64,
    pub data_source: BreastDataSource,
    /// Set when UCI data was requested but could not be read.
    pub unavailable_reason: Option<String>,
    pub classifier: String,
    pub runs: Vec<BreastRun>,
    pub mean_em_prior: f64,
    pub mean_confusion_prior: f64,
    pub mean_accuracy_unadjusted: f64,
    pub mean_accuracy_em: f64,
    pub mean_accuracy_confusion: f64,
    pub mean_accuracy_true_prior: f64,
    pub em_closer_count: usize,
}

impl BreastReport {
    /// Ordering on the run means.
    pub fn ordering_holds(&self) -> bool {
        self.mean_accuracy_true_prior >= self.mean_accuracy_em
            && self.mean_accuracy_em >= self.mean_accuracy_unadjusted - 0.005
    }
}

/// Class-indexed row pools, malignant first.
type Pools = [Vec<Vec<f64>>; 2];

fn load_uci(dir: &Path) -> Result<Pools> {
    let path = dir.join(BREAST_FILE);
    if !path.exists() {
        return Err(Error::DatasetUnavailable(format!(
            "{} not found; run `shiftscope ingest breast` first",
            path.display()
        )));
    }
    let ds = read_csv_path(&path)?;
    let space = LabelSpace::new(BREAST_LABELS)?;
    let y = ds.encoded_labels(&space)?;
    let mut pools: Pools = [Vec::new(), Vec::new()];
    for (i, &c) in y.iter().enumerate() {
        pools[c].push(ds.row(i).to_vec());
    }
    Ok(pools)
}

fn standin_rows(n: usize, class: usize, rng: &mut impl rand::Rng) -> Vec<Vec<f64>> {
    let shift = if class == 0 { STANDIN_SEPARATION } else { 0.0 };
    (0..n)
        .map(|_| {
            (0..STANDIN_DIM)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    shift + z
                })
                .collect::<Vec<f64>>()
        })
        .collect()
}

fn labeled(name: &str, parts: [Vec<Vec<f64>>; 2]) -> Result<Dataset> {
    let labels: Vec<String> = parts
        .iter()
        .enumerate()
        .flat_map(|(c, rows)| std::iter::repeat_n(BREAST_LABELS[c].to_string(), rows.len()))
        .collect();
    let rows: Vec<Vec<f64>> = parts.into_iter().flatten().collect();
    Dataset::from_rows(name, &rows, Some(labels))
}

/// Balanced source plus a target at the fixed malignant share.
fn split(pools: Option<&Pools>, run_seed: u64) -> Result<(Dataset, Dataset)> {
    let mut rng = component_rng(run_seed, "breast/split");
    let (src, tgt) = match pools {
        Some(p) => {
            let mut shuffled = p.clone();
            for pool in &mut shuffled {
                pool.shuffle(&mut rng);
            }
            let per_class = SOURCE_PER_CLASS.min(shuffled[0].len() / 2).min(shuffled[1].len() / 2);
            if per_class < 10 {
                return Err(Error::InvalidDataset("too few rows per class in breast data".into()));
            }
            let [mut m, mut b] = shuffled;
            let m_rest = m.split_off(per_class);
            let b_rest = b.split_off(per_class);
            let ratio = BREAST_TARGET_PRIOR / (1.0 - BREAST_TARGET_PRIOR);
            let n_m = m_rest.len().min((b_rest.len() as f64 * ratio).floor() as usize);
            let n_b = (n_m as f64 / ratio).round() as usize;
            (
                [m, b],
                [m_rest.into_iter().take(n_m).collect(), b_rest.into_iter().take(n_b).collect()],
            )
        }
        None => {
            let n_m = (STANDIN_TARGET_N as f64 * BREAST_TARGET_PRIOR).round() as usize;
            (
                [
                    standin_rows(SOURCE_PER_CLASS, 0, &mut rng),
                    standin_rows(SOURCE_PER_CLASS, 1, &mut rng),
                ],
                [
                    standin_rows(n_m, 0, &mut rng),
                    standin_rows(STANDIN_TARGET_N - n_m, 1, &mut rng),
                ],
            )
        }
    };
    Ok((labeled("breast-source", src)?, labeled("breast-target", tgt)?))
}

/// Synthetic stand-in split as a labeled domain pair.
pub(crate) fn standin_pair(seed: u64) -> Result<DomainPair> {
    let (source, target) = split(None, seed)?;
    DomainPair::new(source, target, LabelSpace::new(BREAST_LABELS)?)
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

fn one_run(pools: Option<&Pools>, run_seed: u64) -> Result<BreastRun> {
    let space = LabelSpace::new(BREAST_LABELS)?;
    let (source, target) = split(pools, run_seed)?;
    let model = train(
        &source,
        &space,
        LearnerKind::Logistic,
        Hyperparameters::for_kind(LearnerKind::Logistic),
        None,
        derive_seed(run_seed, "breast/logistic"),
    )?;
    let src_prior = empirical_prior(&source, &space)?;
    let truth = target.encoded_labels(&space)?;
    let true_prior = empirical_prior(&target, &space)?;
    let post = model.predict_posterior(&target.without_labels())?;
    let em = em_prior_adjust(post.view(), &src_prior, EmOptions::default())?;
    let src_pred = model.predict_indices(&source)?;
    let tgt_pred = argmax_rows(post.view());
    let cm = confusion_matrix_prior(&source.encoded_labels(&space)?, &src_pred, &tgt_pred, space.len())?;
    let acc_with = |prior: &[f64]| -> Result<f64> {
        let adjusted = adjust_posteriors(post.view(), &src_prior, prior)?;
        Ok(accuracy(&argmax_rows(adjusted.view()), &truth))
    };
    Ok(BreastRun {
        seed: run_seed,
        n_source: source.n(),
        n_target: target.n(),
        true_prior: true_prior[0],
        em_prior: em.estimated_target_prior[0],
        confusion_prior: cm[0],
        em_iterations: em.iterations,
        accuracy_unadjusted: accuracy(&tgt_pred, &truth),
        accuracy_em: acc_with(&em.estimated_target_prior)?,
        accuracy_confusion: acc_with(&cm)?,
        accuracy_true_prior: acc_with(&true_prior)?,
    })
}

/// Prior adjustment of a logistic classifier trained on a balanced breast
/// cancer sample and applied to targets with 20% malignant cases. Uses the
/// ingested UCI file when `data_dir` holds one, else a 9-dimensional
/// Gaussian stand-in.
pub fn repro_breast(data_dir: Option<&Path>, seed: u64) -> Result<BreastReport> {
    let (pools, unavailable_reason) = match data_dir.map(load_uci) {
        Some(Ok(p)) => (Some(p), None),
        Some(Err(Error::DatasetUnavailable(reason))) => (None, Some(reason)),
        Some(Err(e)) => return Err(e),
        None => (None, None),
    };
    let runs = (0..RUNS)
        .map(|r| one_run(pools.as_ref(), derive_seed(seed, &format!("breast/run-{r}"))))
        .collect::<Result<Vec<_>>>()?;
    let mean = |f: fn(&BreastRun) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>()).0;
    Ok(BreastReport {
        seed,
        data_source: if pools.is_some() {
            BreastDataSource::Uci
        } else {
            BreastDataSource::SyntheticStandIn
        },
        unavailable_reason,
        classifier: "L2-regularized logistic regression".into(),
        mean_em_prior: mean(|r| r.em_prior),
        mean_confusion_prior: mean(|r| r.confusion_prior),
        mean_accuracy_unadjusted: mean(|r| r.accuracy_unadjusted),
        mean_accuracy_em: mean(|r| r.accuracy_em),
        mean_accuracy_confusion: mean(|r| r.accuracy_confusion),
        mean_accuracy_true_prior: mean(|r| r.accuracy_true_prior),
        em_closer_count: runs.iter().filter(|r| r.em_closer_than_confusion()).count(),
        runs,
    })
}

impl Report for BreastReport {
    fn render_text(&self) -> String {
        let data = match self.data_source {
            BreastDataSource::Uci => "UCI breast cancer data".to_string(),
            BreastDataSource::SyntheticStandIn => match &self.unavailable_reason {
                Some(r) => format!("synthetic stand-in (dataset unavailable: {r})"),
                None => "synthetic stand-in".to_string(),
            },
        };
        let mut out = format!(
            "Breast cancer prior adjustment (seed {}, {}, {})\ntrue target prior P(malignant) = {:.2}\n\n",
            self.seed, data, self.classifier, BREAST_TARGET_PRIOR
        );
        out.push_str(&text_table(
            &["", "no adjustment", "EM", "confusion matrix", "true prior"],
            &[
                vec![
                    "accuracy".into(),
                    format!("{:.3}", self.mean_accuracy_unadjusted),
                    format!("{:.3}", self.mean_accuracy_em),
                    format!("{:.3}", self.mean_accuracy_confusion),
                    format!("{:.3}", self.mean_accuracy_true_prior),
                ],
                vec![
                    "P(malignant)".into(),
                    "-".into(),
                    format!("{:.3}", self.mean_em_prior),
                    format!("{:.3}", self.mean_confusion_prior),
                    format!("{:.3}", BREAST_TARGET_PRIOR),
                ],
            ],
        ));
        out.push_str(&format!(
            "EM closer to the true prior than the confusion matrix in {}/{} runs\n",
            self.em_closer_count,
            self.runs.len()
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standin_split_has_requested_priors() {
        let (s, t) = split(None, 3).unwrap();
        let space = LabelSpace::new(BREAST_LABELS).unwrap();
        assert_eq!(empirical_prior(&s, &space).unwrap(), vec![0.5, 0.5]);
        assert!((empirical_prior(&t, &space).unwrap()[0] - BREAST_TARGET_PRIOR).abs() < 1e-12);
        assert_eq!(s.d(), 9);
    }

    #[test]
    fn uci_split_keeps_target_ratio() {
        let rows: Vec<Vec<f64>> = (0..300).map(|i| vec![(i % 10) as f64 + 1.0; 9]).collect();
        let pools: Pools = [rows[..100].to_vec(), rows[100..].to_vec()];
        let (s, t) = split(Some(&pools), 1).unwrap();
        let space = LabelSpace::new(BREAST_LABELS).unwrap();
        assert_eq!(s.n(), 100);
        let p = empirical_prior(&t, &space).unwrap();
        assert!((p[0] - 0.2).abs() < 0.01, "{p:?}");
    }

    #[test]
    fn missing_file_falls_back_to_standin() {
        let dir = tempfile::tempdir().unwrap();
        let r = repro_breast(Some(dir.path()), 0).unwrap();
        assert_eq!(r.data_source, BreastDataSource::SyntheticStandIn);
        assert!(r.unavailable_reason.is_some());
        assert_eq!(r.runs.len(), RUNS);
        assert!(r.runs.iter().all(|x| (0.0..=1.0).contains(&x.em_prior)));
    }
}
