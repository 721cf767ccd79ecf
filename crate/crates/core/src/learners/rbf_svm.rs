use ndarray::Array2;

use super::{machine_classes, signed_targets, unit_mean, Hyperparameters, KernelMachine, Parameters, TrainingInfo};
use crate::density::{median_heuristic_gamma, rbf_gram, sq_dist};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

struct Solution {
    alpha: Vec<f64>,
    bias: f64,
    iterations: usize,
    converged: bool,
}

/// SMO on the dual `min 0.5 a'Qa - 1'a` subject to `0 <= a_i <= c_i`,
/// `y'a = 0`, picking the maximal violating pair each step. Scans run in
/// index order with strict comparisons, so ties go to the lowest index.
fn smo(kernel: &Array2<f64>, y: &[f64], c: &[f64], tol: f64, max_iter: usize) -> Solution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[[i, j]];
    let in_up = |a: &[f64], t: usize| (y[t] > 0.0 && a[t] < c[t]) || (y[t] < 0.0 && a[t] > 0.0);
    let in_low = |a: &[f64], t: usize| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < c[t]);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(&alpha, t) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(&alpha, t) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (ci, cj) = (c[i], c[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else {
        0.0
    };
    Solution {
        alpha,
        bias: -rho,
        iterations,
        converged,
    }
}

pub(super) fn fit(
    x: &Array2<f64>,
    labels: &[usize],
    weights: &[f64],
    k: usize,
    hyper: &Hyperparameters,
) -> Result<(Parameters, TrainingInfo)> {
    if !(hyper.c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {}", hyper.c)));
    }
    let gamma = match hyper.gamma {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => return Err(Error::InvalidArgument(format!("gamma must be positive, got {g}"))),
        None => median_heuristic_gamma(x.view(), Array2::<f64>::zeros((0, x.ncols())).view()),
    };
    let kernel = rbf_gram(x.view(), x.view(), gamma);
    let c: Vec<f64> = unit_mean(weights).iter().map(|w| hyper.c * w).collect();
    let mut machines = Vec::new();
    let mut iterations = 0;
    let mut converged = true;
    for positive in machine_classes(k) {
        let y = signed_targets(labels, positive);
        let sol = smo(&kernel, &y, &c, hyper.tol, hyper.max_iter);
        iterations += sol.iterations;
        converged &= sol.converged;
        let support: Vec<usize> = (0..y.len()).filter(|&t| sol.alpha[t] > 0.0).collect();
        machines.push(KernelMachine {
            coefficients: support.iter().map(|&t| sol.alpha[t] * y[t]).collect(),
            support_vectors: support.iter().map(|&t| x.row(t).to_vec()).collect(),
            bias: sol.bias,
        });
    }
    if !converged {
        log::warn!("SMO hit the iteration cap before meeting the KKT tolerance");
    }
    Ok((
        Parameters::Kernel { gamma, machines },
        TrainingInfo {
            iterations,
            converged,
            n_train: labels.len(),
        },
    ))
}

pub(super) fn scores(x: &Array2<f64>, gamma: f64, machines: &[KernelMachine]) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), machines.len()));
    for (i, row) in x.rows().into_iter().enumerate() {
        let row = row.to_slice().expect("standard layout");
        for (m, machine) in machines.iter().enumerate() {
            out[[i, m]] = machine
                .coefficients
                .iter()
                .zip(&machine.support_vectors)
                .map(|(a, sv)| a * (-gamma * sq_dist(sv, row)).exp())
                .sum::<f64>()
                + machine.bias;
        }
    }
    out
}
