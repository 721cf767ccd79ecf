//! Weighted supervised learners: softmax logistic regression, a Pegasos
//! linear SVM and an SMO-trained RBF SVM, plus evaluation.
//!
//! Every learner standardizes features with the (weighted) training mean and
//! variance and stores the transform in the model. For SVMs label index 0 is
//! the positive class; more than two classes are handled one-vs-rest.

mod linear_svm;
mod logistic;
mod rbf_svm;

pub use logistic::logistic_objective;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelSpace, WeightKind, WeightVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Logistic,
    LinearSvm,
    RbfSvm,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 3] = [LearnerKind::Logistic, LearnerKind::LinearSvm, LearnerKind::RbfSvm];
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::Logistic => "logistic",
            LearnerKind::LinearSvm => "linear-svm",
            LearnerKind::RbfSvm => "rbf-svm",
        })
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "logistic" => Ok(LearnerKind::Logistic),
            "linear-svm" => Ok(LearnerKind::LinearSvm),
            "rbf-svm" => Ok(LearnerKind::RbfSvm),
            other => Err(Error::InvalidArgument(format!("unknown learner kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// L2 penalty for logistic regression.
    pub l2: f64,
    /// SVM box constraint.
    pub c: f64,
    /// Pegasos epochs.
    pub epochs: usize,
    /// RBF width; median heuristic on the standardized training data when absent.
    pub gamma: Option<f64>,
    /// Gradient-norm tolerance (logistic) or KKT tolerance (SMO).
    pub tol: f64,
    pub max_iter: usize,
}

impl Hyperparameters {
    pub fn for_kind(kind: LearnerKind) -> Self {
        let tol = match kind {
            LearnerKind::Logistic => 1e-6,
            _ => 1e-3,
        };
        let max_iter = match kind {
            LearnerKind::Logistic => 20_000,
            _ => 200_000,
        };
        Self {
            l2: 1e-4,
            c: 1.0,
            epochs: 200,
            gamma: None,
            tol,
            max_iter,
        }
    }
}

/// Affine map applied to raw features before any learner sees them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Weighted per-dimension mean and standard deviation. Zero-variance
    /// columns keep scale 1.
    pub fn fit(x: &Array2<f64>, weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let d = x.ncols();
        let mut mean = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in 0..d {
            let col = x.column(j);
            let m = col.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
            let var = col.iter().zip(weights).map(|(v, w)| w * (v - m) * (v - m)).sum::<f64>() / total;
            mean[j] = m;
            if var > 0.0 && var.is_finite() {
                scale[j] = var.sqrt();
            }
        }
        Self { mean, scale }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }
}

/// Two-class kernel or linear machine, `f(x) = sum_i coef_i k(sv_i, x) + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMachine {
    /// `alpha_i * y_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub support_vectors: Vec<Vec<f64>>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Parameters {
    /// One weight row and bias per class (softmax).
    Softmax { weights: Vec<Vec<f64>>, bias: Vec<f64> },
    /// One machine per positive class: a single machine for two labels,
    /// otherwise one-vs-rest.
    Linear { weights: Vec<Vec<f64>>, bias: Vec<f64> },
    Kernel { gamma: f64, machines: Vec<KernelMachine> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub iterations: usize,
    pub converged: bool,
    pub n_train: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: LearnerKind,
    pub hyperparameters: Hyperparameters,
    pub standardizer: Standardizer,
    pub label_space: LabelSpace,
    pub parameters: Parameters,
    pub seed: u64,
    pub training: TrainingInfo,
}

fn sample_weights(ds: &Dataset, weights: Option<&WeightVector>, labels: &[usize]) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0; ds.n()]),
        Some(w) => {
            let expanded = match w.kind() {
                WeightKind::PerSample => w.clone(),
                WeightKind::PerClass => w.expand(labels)?,
            };
            if expanded.len() != ds.n() {
                return Err(Error::DimensionMismatch(expanded.len(), ds.n()));
            }
            Ok(expanded.values().to_vec())
        }
    }
}

/// Fits a learner of the given kind on a labeled dataset.
pub fn train(
    ds: &Dataset,
    space: &LabelSpace,
    kind: LearnerKind,
    hyper: Hyperparameters,
    weights: Option<&WeightVector>,
    seed: u64,
) -> Result<TrainedModel> {
    let labels = ds.encoded_labels(space)?;
    let w = sample_weights(ds, weights, &labels)?;
    let mut present = vec![false; space.len()];
    for (l, wi) in labels.iter().zip(&w) {
        if *wi > 0.0 {
            present[*l] = true;
        }
    }
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(Error::DegenerateLabels);
    }
    let standardizer = Standardizer::fit(ds.features(), &w);
    let x = standardizer.apply(ds.features());
    let (parameters, training) = match kind {
        LearnerKind::Logistic => logistic::fit(&x, &labels, &w, space.len(), &hyper)?,
        LearnerKind::LinearSvm => linear_svm::fit(&x, &labels, &w, space.len(), &hyper, seed)?,
        LearnerKind::RbfSvm => rbf_svm::fit(&x, &labels, &w, space.len(), &hyper)?,
    };
    Ok(TrainedModel {
        kind,
        hyperparameters: hyper,
        standardizer,
        label_space: space.clone(),
        parameters,
        seed,
        training,
    })
}

impl TrainedModel {
    pub fn dim(&self) -> usize {
        self.standardizer.mean.len()
    }

    fn prepare(&self, ds: &Dataset) -> Result<Array2<f64>> {
        if ds.d() != self.dim() {
            return Err(Error::DimensionMismatch(ds.d(), self.dim()));
        }
        Ok(self.standardizer.apply(ds.features()))
    }

    /// Raw scores: class logits for logistic models, one column per machine
    /// for SVMs.
    pub fn decision_function(&self, ds: &Dataset) -> Result<Array2<f64>> {
        let x = self.prepare(ds)?;
        Ok(match &self.parameters {
            Parameters::Softmax { weights, bias } | Parameters::Linear { weights, bias } => {
                linear_scores(&x, weights, bias)
            }
            Parameters::Kernel { gamma, machines } => rbf_svm::scores(&x, *gamma, machines),
        })
    }

    /// Class posteriors; logistic models only.
    pub fn predict_posterior(&self, ds: &Dataset) -> Result<Array2<f64>> {
        if self.kind != LearnerKind::Logistic {
            return Err(Error::InvalidArgument(format!(
                "posteriors are only available for logistic models, not {}",
                self.kind
            )));
        }
        let mut z = self.decision_function(ds)?;
        for mut row in z.rows_mut() {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        Ok(z)
    }

    /// Predicted label indices into the model's label space.
    pub fn predict_indices(&self, ds: &Dataset) -> Result<Vec<usize>> {
        let scores = self.decision_function(ds)?;
        Ok(scores
            .rows()
            .into_iter()
            .map(|row| {
                if row.len() == 1 {
                    if row[0] >= 0.0 {
                        0
                    } else {
                        1
                    }
                } else {
                    argmax(row.iter().copied())
                }
            })
            .collect())
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<String>> {
        Ok(self
            .predict_indices(ds)?
            .into_iter()
            .map(|i| self.label_space.label(i).to_string())
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Index of the largest value, ties to the lowest index.
/// Row-wise argmax, ties to the lowest index.
pub fn argmax_rows(scores: ArrayView2<'_, f64>) -> Vec<usize> {
    scores.rows().into_iter().map(|r| argmax(r.iter().copied())).collect()
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

fn linear_scores(x: &Array2<f64>, weights: &[Vec<f64>], bias: &[f64]) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), weights.len()));
    for (i, row) in x.rows().into_iter().enumerate() {
        for (c, (w, b)) in weights.iter().zip(bias).enumerate() {
            out[[i, c]] = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        }
    }
    out
}

/// Binary targets `+1` for `positive`, `-1` otherwise.
pub(crate) fn signed_targets(labels: &[usize], positive: usize) -> Vec<f64> {
    labels.iter().map(|&l| if l == positive { 1.0 } else { -1.0 }).collect()
}

/// Positive classes of the machines to train: just label 0 for two classes.
pub(crate) fn machine_classes(k: usize) -> Vec<usize> {
    if k == 2 {
        vec![0]
    } else {
        (0..k).collect()
    }
}

/// Weights rescaled to mean 1 so `C` keeps its unweighted meaning.
pub(crate) fn unit_mean(w: &[f64]) -> Vec<f64> {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    w.iter().map(|v| v / mean).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `None` for classes absent from the evaluation set.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// Rows are true labels, columns predictions.
    pub confusion: Vec<Vec<usize>>,
    pub n_eval: usize,
    pub labels: Vec<String>,
}

impl EvalReport {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], space: &LabelSpace) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch(truth.len(), predicted.len()));
        }
        if truth.is_empty() {
            return Err(Error::EmptySample);
        }
        let k = space.len();
        let mut confusion = vec![vec![0usize; k]; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let total: usize = row.iter().sum();
                (total > 0).then(|| row[c] as f64 / total as f64)
            })
            .collect();
        Ok(Self {
            accuracy: correct as f64 / truth.len() as f64,
            per_class_accuracy,
            confusion,
            n_eval: truth.len(),
            labels: space.labels().to_vec(),
        })
    }
}

pub fn evaluate(model: &TrainedModel, ds: &Dataset) -> Result<EvalReport> {
    if !ds.is_labeled() {
        return Err(Error::UnlabeledDataset);
    }
    let truth = ds.encoded_labels(&model.label_space)?;
    let predicted = model.predict_indices(ds)?;
    EvalReport::from_predictions(&truth, &predicted, &model.label_space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn separable() -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.1;
            rows.push(vec![2.0 + t, 1.0 - t]);
            labels.push("+1".to_string());
            rows.push(vec![-2.0 - t, -1.0 + 0.5 * t]);
            labels.push("-1".to_string());
        }
        Dataset::from_rows("sep", &rows, Some(labels)).unwrap()
    }

    fn gaussian_pair(seed: u64, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = Normal::new(-1.0, 1.5).unwrap();
        let q = Normal::new(1.0, 1.5).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            if i % 2 == 0 {
                rows.push(vec![p.sample(&mut rng)]);
                labels.push("+1".into());
            } else {
                rows.push(vec![q.sample(&mut rng)]);
                labels.push("-1".into());
            }
        }
        Dataset::from_rows("g", &rows, Some(labels)).unwrap()
    }

    #[test]
    fn separable_data_is_fit_by_every_kind() {
        let ds = separable();
        let space = LabelSpace::signed_binary();
        for kind in LearnerKind::ALL {
            let m = train(&ds, &space, kind, Hyperparameters::for_kind(kind), None, 1).unwrap();
            assert_eq!(evaluate(&m, &ds).unwrap().accuracy, 1.0, "{kind}");
        }
    }

    #[test]
    fn unit_weights_match_unweighted() {
        let ds = gaussian_pair(3, 80);
        let space = LabelSpace::signed_binary();
        let ones = WeightVector::per_sample(vec![1.0; ds.n()]).unwrap();
        for kind in [LearnerKind::Logistic, LearnerKind::LinearSvm] {
            let h = Hyperparameters::for_kind(kind);
            let a = train(&ds, &space, kind, h, None, 5).unwrap();
            let b = train(&ds, &space, kind, h, Some(&ones), 5).unwrap();
            assert_eq!(a.parameters, b.parameters);
        }
        let h = Hyperparameters::for_kind(LearnerKind::RbfSvm);
        let a = train(&ds, &space, LearnerKind::RbfSvm, h, None, 5).unwrap();
        let b = train(&ds, &space, LearnerKind::RbfSvm, h, Some(&ones), 5).unwrap();
        let grid: Vec<Vec<f64>> = (0..200).map(|i| vec![-5.0 + 0.05 * i as f64]).collect();
        let grid = Dataset::from_rows("grid", &grid, None).unwrap();
        assert_eq!(a.predict(&grid).unwrap(), b.predict(&grid).unwrap());
    }

    #[test]
    fn single_class_rejected() {
        let ds = Dataset::from_rows("x", &[vec![1.0], vec![2.0]], Some(vec!["+1".into(), "+1".into()])).unwrap();
        let space = LabelSpace::signed_binary();
        let r = train(&ds, &space, LearnerKind::Logistic, Hyperparameters::for_kind(LearnerKind::Logistic), None, 0);
        assert!(matches!(r, Err(Error::DegenerateLabels)));
    }

    #[test]
    fn zero_logistic_model_is_uninformative() {
        let ds = separable();
        let space = LabelSpace::signed_binary();
        let mut m = train(&ds, &space, LearnerKind::Logistic, Hyperparameters::for_kind(LearnerKind::Logistic), None, 0)
            .unwrap();
        m.parameters = Parameters::Softmax {
            weights: vec![vec![0.0; 2]; 2],
            bias: vec![0.0; 2],
        };
        let post = m.predict_posterior(&ds).unwrap();
        assert!(post.iter().all(|p| *p == 0.5));
        // ties break toward the first label
        assert!(m.predict_indices(&ds).unwrap().iter().all(|&i| i == 0));
    }

    #[test]
    fn predict_matches_posterior_argmax() {
        let ds = gaussian_pair(9, 200);
        let space = LabelSpace::signed_binary();
        let m = train(&ds, &space, LearnerKind::Logistic, Hyperparameters::for_kind(LearnerKind::Logistic), None, 0)
            .unwrap();
        let probe = gaussian_pair(10, 1000);
        let post = m.predict_posterior(&probe).unwrap();
        let pred = m.predict_indices(&probe).unwrap();
        for (row, p) in post.rows().into_iter().zip(pred) {
            assert_eq!(argmax(row.iter().copied()), p);
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn model_json_round_trip() {
        let ds = gaussian_pair(2, 60);
        let space = LabelSpace::signed_binary();
        for kind in LearnerKind::ALL {
            let m = train(&ds, &space, kind, Hyperparameters::for_kind(kind), None, 4).unwrap();
            let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(m, back);
        }
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let ds = separable();
        let space = LabelSpace::signed_binary();
        let m = train(&ds, &space, LearnerKind::Logistic, Hyperparameters::for_kind(LearnerKind::Logistic), None, 0)
            .unwrap();
        let other = Dataset::from_rows("o", &[vec![1.0]], None).unwrap();
        assert!(matches!(m.predict(&other), Err(Error::DimensionMismatch(1, 2))));
    }

    #[test]
    fn evaluation_counts() {
        let space = LabelSpace::new(["A", "B"]).unwrap();
        let r = EvalReport::from_predictions(&[0, 0, 0], &[0, 0, 0], &space).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.per_class_accuracy, vec![Some(1.0), None]);
        let r = EvalReport::from_predictions(&[0, 1, 1, 0], &[1, 1, 0, 0], &space).unwrap();
        assert_eq!(r.confusion, vec![vec![1, 1], vec![1, 1]]);
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn three_class_one_vs_rest() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            let t = (i as f64) * 0.05;
            rows.push(vec![t, 5.0]);
            labels.push("a".to_string());
            rows.push(vec![5.0 + t, 0.0]);
            labels.push("b".to_string());
            rows.push(vec![-5.0 - t, 0.0]);
            labels.push("c".to_string());
        }
        let ds = Dataset::from_rows("three", &rows, Some(labels)).unwrap();
        let space = LabelSpace::new(["a", "b", "c"]).unwrap();
        for kind in LearnerKind::ALL {
            let m = train(&ds, &space, kind, Hyperparameters::for_kind(kind), None, 0).unwrap();
            assert_eq!(evaluate(&m, &ds).unwrap().accuracy, 1.0, "{kind}");
        }
    }
}
