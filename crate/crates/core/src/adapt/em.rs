use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{WeightKind, WeightVector};
use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmPriorResult {
    pub estimated_target_prior: Vec<f64>,
    pub iterations: usize,
    /// Prior estimate after each iteration, starting with the source prior.
    pub trajectory: Vec<Vec<f64>>,
    /// Target log-likelihood at each trajectory entry.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    pub class_weights: WeightVector,
    pub warnings: Vec<String>,
}

fn check_prior(prior: &[f64], what: &str) -> Result<()> {
    if prior.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidArgument(format!("{what} has negative or non-finite entries")));
    }
    let s: f64 = prior.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidArgument(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

fn check_posteriors(post: ArrayView2<'_, f64>, k: usize) -> Result<()> {
    if post.ncols() != k {
        return Err(Error::DimensionMismatch(post.ncols(), k));
    }
    if post.nrows() == 0 {
        return Err(Error::EmptySample);
    }
    for (i, row) in post.rows().into_iter().enumerate() {
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(format!("posterior row {i} is not a probability vector")));
        }
        let s = row.sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!("posterior row {i} sums to {s}, not 1")));
        }
    }
    Ok(())
}

/// Classes the source prior gives no mass. Posterior mass on such a class is
/// an error; a class empty under both is pinned.
fn pinned_classes(post: ArrayView2<'_, f64>, source_prior: &[f64]) -> Result<Vec<bool>> {
    source_prior
        .iter()
        .enumerate()
        .map(|(c, &p)| {
            if p > 0.0 {
                Ok(false)
            } else if post.column(c).iter().all(|&v| v == 0.0) {
                Ok(true)
            } else {
                Err(Error::InvalidArgument(format!(
                    "class {c} has zero source prior but nonzero posterior mass"
                )))
            }
        })
        .collect()
}

fn ratio(p: &[f64], source_prior: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(source_prior)
        .map(|(a, s)| if *s > 0.0 { a / s } else { 0.0 })
        .collect()
}

fn log_likelihood(post: ArrayView2<'_, f64>, r: &[f64]) -> f64 {
    post.rows()
        .into_iter()
        .map(|row| row.iter().zip(r).map(|(a, b)| a * b).sum::<f64>().max(f64::MIN_POSITIVE).ln())
        .sum()
}

/// Estimates the target class prior from source-classifier posteriors on
/// target samples by expectation maximization, starting at the source prior.
pub fn em_prior_adjust(
    source_posteriors: ArrayView2<'_, f64>,
    source_prior: &[f64],
    options: EmOptions,
) -> Result<EmPriorResult> {
    let k = source_prior.len();
    check_prior(source_prior, "source prior")?;
    check_posteriors(source_posteriors, k)?;
    if !(options.tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let pinned = pinned_classes(source_posteriors, source_prior)?;
    let mut warnings: Vec<String> = pinned
        .iter()
        .enumerate()
        .filter(|(_, p)| **p)
        .map(|(c, _)| format!("class {c} has no source or posterior mass; weight pinned to 1"))
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }

    let n = source_posteriors.nrows() as f64;
    let mut p = source_prior.to_vec();
    let mut trajectory = vec![p.clone()];
    let mut ll = vec![log_likelihood(source_posteriors, &ratio(&p, source_prior))];
    let mut converged = false;
    let mut iterations = 0;
    let mut q = vec![0.0; k];
    while iterations < options.max_iter {
        let r = ratio(&p, source_prior);
        let mut next = vec![0.0; k];
        for row in source_posteriors.rows() {
            let mut s = 0.0;
            for c in 0..k {
                q[c] = row[c] * r[c];
                s += q[c];
            }
            if s > 0.0 {
                for c in 0..k {
                    next[c] += q[c] / s;
                }
            }
        }
        let total: f64 = next.iter().sum();
        for v in &mut next {
            *v /= if total > 0.0 { total } else { n };
        }
        let change = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        iterations += 1;
        ll.push(log_likelihood(source_posteriors, &ratio(&p, source_prior)));
        trajectory.push(p.clone());
        if change < options.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!("EM did not converge within {} iterations", options.max_iter));
    }
    let weights = p
        .iter()
        .zip(source_prior)
        .zip(&pinned)
        .map(|((a, s), pin)| if *pin { 1.0 } else { a / s })
        .collect();
    Ok(EmPriorResult {
        estimated_target_prior: p,
        iterations,
        trajectory,
        log_likelihood: ll,
        converged,
        class_weights: WeightVector::new(WeightKind::PerClass, weights)?,
        warnings,
    })
}

/// Rescales each posterior row by `target_prior / source_prior` and
/// renormalizes.
pub fn adjust_posteriors(
    posteriors: ArrayView2<'_, f64>,
    source_prior: &[f64],
    target_prior: &[f64],
) -> Result<Array2<f64>> {
    let k = source_prior.len();
    if target_prior.len() != k {
        return Err(Error::DimensionMismatch(target_prior.len(), k));
    }
    check_prior(source_prior, "source prior")?;
    check_prior(target_prior, "target prior")?;
    check_posteriors(posteriors, k)?;
    pinned_classes(posteriors, source_prior)?;
    let r = ratio(target_prior, source_prior);
    let mut out = posteriors.to_owned();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        for c in 0..k {
            row[c] *= r[c];
        }
        let s = row.sum();
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "row {i} has no mass under the target prior"
            )));
        }
        row.mapv_inplace(|v| v / s);
    }
    Ok(out)
}

/// Baseline prior estimate from the source confusion matrix: solves
/// `C p = q`, where `C[i][j] = P(pred = i | true = j)` on the source and `q`
/// is the predicted label distribution on the target. The solution is
/// clipped to the simplex.
pub fn confusion_matrix_prior(
    source_true: &[usize],
    source_pred: &[usize],
    target_pred: &[usize],
    k: usize,
) -> Result<Vec<f64>> {
    if source_true.len() != source_pred.len() {
        return Err(Error::DimensionMismatch(source_true.len(), source_pred.len()));
    }
    if source_true.is_empty() || target_pred.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut counts = vec![vec![0.0; k]; k];
    let mut per_class = vec![0.0; k];
    for (&t, &p) in source_true.iter().zip(source_pred) {
        if t >= k || p >= k {
            return Err(Error::InvalidArgument(format!("label index outside 0..{k}")));
        }
        counts[p][t] += 1.0;
        per_class[t] += 1.0;
    }
    let mut a = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = if per_class[j] > 0.0 {
                counts[i][j] / per_class[j]
            } else {
                (i == j) as u8 as f64
            };
        }
    }
    let mut q = vec![0.0; k];
    for &p in target_pred {
        if p >= k {
            return Err(Error::InvalidArgument(format!("label index outside 0..{k}")));
        }
        q[p] += 1.0 / target_pred.len() as f64;
    }
    let x = solve(a, q).ok_or_else(|| Error::InvalidArgument("singular confusion matrix".into()))?;
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    if !(s > 0.0) {
        return Err(Error::InvalidArgument("confusion-matrix estimate has no positive mass".into()));
    }
    Ok(clipped.into_iter().map(|v| v / s).collect())
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn fixed_point_when_consistent() {
        let post = array![[0.9, 0.1], [0.1, 0.9], [0.6, 0.4], [0.4, 0.6]];
        let r = em_prior_adjust(post.view(), &[0.5, 0.5], EmOptions::default()).unwrap();
        assert!(r.converged);
        for (p, w) in r.estimated_target_prior.iter().zip(r.class_weights.values()) {
            assert!((p - 0.5).abs() < 1e-6);
            assert!((w - 1.0).abs() < 1e-5);
        }
    }

    /// Bayes posteriors for N(-1, 1.5) (class 0) vs N(1, 1.5) (class 1) under
    /// equal priors.
    fn bayes_posterior(x: f64) -> [f64; 2] {
        let s2 = 1.5f64 * 1.5;
        let l0 = -(x + 1.0).powi(2) / (2.0 * s2);
        let l1 = -(x - 1.0).powi(2) / (2.0 * s2);
        let p0 = 1.0 / (1.0 + (l1 - l0).exp());
        [p0, 1.0 - p0]
    }

    #[test]
    fn recovers_shifted_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let c0 = Normal::new(-1.0, 1.5).unwrap();
        let c1 = Normal::new(1.0, 1.5).unwrap();
        let n = 1000;
        let mut post = Array2::zeros((n, 2));
        for i in 0..n {
            let x = if rng.random_bool(0.75) { c0.sample(&mut rng) } else { c1.sample(&mut rng) };
            let p = bayes_posterior(x);
            post[[i, 0]] = p[0];
            post[[i, 1]] = p[1];
        }
        let r = em_prior_adjust(post.view(), &[0.5, 0.5], EmOptions::default()).unwrap();
        assert!((r.estimated_target_prior[0] - 0.75).abs() < 0.05, "{:?}", r.estimated_target_prior);
        for w in r.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        for p in &r.trajectory {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn zero_prior_class_pinned() {
        let post = array![[0.7, 0.3, 0.0], [0.2, 0.8, 0.0]];
        let r = em_prior_adjust(post.view(), &[0.5, 0.5, 0.0], EmOptions::default()).unwrap();
        assert_eq!(r.class_weights.values()[2], 1.0);
        assert_eq!(r.warnings.len(), 1);
        let bad = array![[0.7, 0.2, 0.1]];
        assert!(em_prior_adjust(bad.view(), &[0.5, 0.5, 0.0], EmOptions::default()).is_err());
    }

    #[test]
    fn rejects_non_simplex_rows() {
        let post = array![[0.7, 0.7]];
        assert!(em_prior_adjust(post.view(), &[0.5, 0.5], EmOptions::default()).is_err());
        assert!(adjust_posteriors(post.view(), &[0.5, 0.5], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn adjust_examples() {
        let post = array![[0.5, 0.5], [0.2, 0.8]];
        let same = adjust_posteriors(post.view(), &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(same, post);
        let out = adjust_posteriors(post.view(), &[0.5, 0.5], &[0.75, 0.25]).unwrap();
        assert!((out[[0, 0]] - 0.75).abs() < 1e-15);
        assert!((out[[0, 1]] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn confusion_baseline_inverts_known_matrix() {
        // classifier: 80% correct on class 0, 90% on class 1
        let src_true = [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1];
        let src_pred = [0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0];
        // true target prior (0.5, 0.5) -> predicted share of 0: 0.5*0.8 + 0.5*0.1 = 0.45
        let tgt_pred: Vec<usize> = (0..100).map(|i| usize::from(i >= 45)).collect();
        let p = confusion_matrix_prior(&src_true, &src_pred, &tgt_pred, 2).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
    }
}
