use ndarray::Array2;

use super::{Hyperparameters, Parameters, TrainingInfo};
use crate::error::Result;

const ARMIJO: f64 = 1e-4;

/// Weighted softmax cross-entropy plus `l2 / 2 * ||W||^2` (biases
/// unpenalized), with sample weights normalized to sum to one.
///
/// `theta` holds, per class, `d` weights followed by the bias. Returns the
/// objective and its gradient.
pub fn logistic_objective(
    theta: &[f64],
    x: &Array2<f64>,
    labels: &[usize],
    weights: &[f64],
    k: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let d = x.ncols();
    let stride = d + 1;
    let total: f64 = weights.iter().sum();
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    let mut z = vec![0.0; k];
    for (i, row) in x.rows().into_iter().enumerate() {
        let wi = weights[i] / total;
        if wi == 0.0 {
            continue;
        }
        for (c, zc) in z.iter_mut().enumerate() {
            let p = &theta[c * stride..(c + 1) * stride];
            *zc = row.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() + p[d];
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = z.iter().map(|v| (v - m).exp()).sum();
        let lse = m + s.ln();
        loss += wi * (lse - z[labels[i]]);
        for c in 0..k {
            let r = (z[c] - lse).exp() - if c == labels[i] { 1.0 } else { 0.0 };
            let g = &mut grad[c * stride..(c + 1) * stride];
            for (gj, xj) in g.iter_mut().zip(row.iter()) {
                *gj += wi * r * xj;
            }
            g[d] += wi * r;
        }
    }
    for c in 0..k {
        for j in 0..d {
            let t = theta[c * stride + j];
            loss += 0.5 * l2 * t * t;
            grad[c * stride + j] += l2 * t;
        }
    }
    (loss, grad)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Full-batch gradient descent with Barzilai-Borwein steps and Armijo
/// backtracking, from the zero model.
pub(super) fn fit(
    x: &Array2<f64>,
    labels: &[usize],
    weights: &[f64],
    k: usize,
    hyper: &Hyperparameters,
) -> Result<(Parameters, TrainingInfo)> {
    let d = x.ncols();
    let mut theta = vec![0.0; k * (d + 1)];
    let (mut f, mut g) = logistic_objective(&theta, x, labels, weights, k, hyper.l2);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < hyper.max_iter {
        let gn = norm(&g);
        if gn <= hyper.tol {
            converged = true;
            break;
        }
        let gg = gn * gn;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            let (fc, gc) = logistic_objective(&cand, x, labels, weights, k, hyper.l2);
            if fc <= f - ARMIJO * t * gg {
                accepted = Some((cand, fc, gc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            break;
        };
        let s: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gc.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        step = if sy > 0.0 { (s.iter().map(|a| a * a).sum::<f64>() / sy).clamp(1e-10, 1e10) } else { 1.0 };
        theta = cand;
        f = fc;
        g = gc;
        iterations += 1;
    }
    if !converged {
        log::warn!("logistic regression stopped after {iterations} iterations, gradient norm {}", norm(&g));
    }
    let stride = d + 1;
    let weights_out = (0..k).map(|c| theta[c * stride..c * stride + d].to_vec()).collect();
    let bias = (0..k).map(|c| theta[c * stride + d]).collect();
    Ok((
        Parameters::Softmax {
            weights: weights_out,
            bias,
        },
        TrainingInfo {
            iterations,
            converged,
            n_train: labels.len(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gradient_matches_finite_differences() {
        let x = array![[0.5, -1.0], [1.5, 0.2], [-0.3, 0.8], [2.0, -0.7]];
        let labels = [0, 1, 2, 1];
        let w = [1.0, 0.5, 2.0, 1.0];
        let theta: Vec<f64> = (0..9).map(|i| 0.1 * i as f64 - 0.4).collect();
        let (_, g) = logistic_objective(&theta, &x, &labels, &w, 3, 0.1);
        for j in 0..theta.len() {
            let h = 1e-6;
            let mut a = theta.clone();
            let mut b = theta.clone();
            a[j] += h;
            b[j] -= h;
            let fd = (logistic_objective(&a, &x, &labels, &w, 3, 0.1).0
                - logistic_objective(&b, &x, &labels, &w, 3, 0.1).0)
                / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-4 * fd.abs().max(1e-3), "{j}: {fd} vs {}", g[j]);
        }
    }
}
