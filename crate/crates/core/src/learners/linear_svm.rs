use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{machine_classes, signed_targets, unit_mean, Hyperparameters, Parameters, TrainingInfo};
use crate::error::{Error, Result};

/// Pegasos stochastic subgradient descent on the weighted hinge loss with
/// `lambda = 1 / (C n)`. The bias is learned as the weight of a constant
/// feature. Each epoch visits the samples in a fresh seeded permutation.
pub(super) fn fit(
    x: &Array2<f64>,
    labels: &[usize],
    weights: &[f64],
    k: usize,
    hyper: &Hyperparameters,
    seed: u64,
) -> Result<(Parameters, TrainingInfo)> {
    if !(hyper.c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {}", hyper.c)));
    }
    let (n, d) = (x.nrows(), x.ncols());
    let w = unit_mean(weights);
    let lambda = 1.0 / (hyper.c * n as f64);
    let radius = (w.iter().copied().fold(1.0, f64::max) / lambda).sqrt();
    let mut all_w = Vec::new();
    let mut all_b = Vec::new();
    let mut steps = 0;
    for (m, positive) in machine_classes(k).into_iter().enumerate() {
        let y = signed_targets(labels, positive);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(m as u64));
        let mut order: Vec<usize> = (0..n).collect();
        let mut theta = vec![0.0; d + 1];
        let mut t = 0usize;
        for _ in 0..hyper.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let row = x.row(i);
                let margin = y[i] * (row.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() + theta[d]);
                let shrink = 1.0 - eta * lambda;
                for v in theta.iter_mut() {
                    *v *= shrink;
                }
                if margin < 1.0 && w[i] > 0.0 {
                    let s = eta * w[i] * y[i];
                    for (v, xj) in theta.iter_mut().zip(row.iter()) {
                        *v += s * xj;
                    }
                    theta[d] += s;
                }
                let nrm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nrm > radius {
                    let f = radius / nrm;
                    for v in theta.iter_mut() {
                        *v *= f;
                    }
                }
            }
        }
        steps += t;
        all_b.push(theta[d]);
        theta.truncate(d);
        all_w.push(theta);
    }
    Ok((
        Parameters::Linear {
            weights: all_w,
            bias: all_b,
        },
        TrainingInfo {
            iterations: steps,
            converged: true,
            n_train: n,
        },
    ))
}
