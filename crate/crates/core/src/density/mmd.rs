use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

use super::{DivergenceEstimate, Measure, Method};

/// Pooled samples beyond this size are strided down before taking the median
/// pairwise distance.
const MEDIAN_SAMPLE_CAP: usize = 3000;

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `1 / median(||a - b||^2)` over distinct pooled pairs, the median floored
/// at 1e-12.
pub fn median_heuristic_gamma(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> f64 {
    let pooled: Vec<&[f64]> = x
        .rows()
        .into_iter()
        .chain(y.rows())
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    let stride = pooled.len().div_ceil(MEDIAN_SAMPLE_CAP).max(1);
    let pts: Vec<&[f64]> = pooled.into_iter().step_by(stride).collect();
    let mut d2 = Vec::with_capacity(pts.len() * pts.len().saturating_sub(1) / 2);
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            d2.push(sq_dist(pts[i], pts[j]));
        }
    }
    if d2.is_empty() {
        return 1.0 / 1e-12;
    }
    1.0 / median(&mut d2).max(1e-12)
}

fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Gram matrix `K[i, j] = exp(-gamma ||a_i - b_j||^2)`.
pub fn rbf_gram(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, gamma: f64) -> Array2<f64> {
    let mut k = Array2::zeros((a.nrows(), b.nrows()));
    for (i, ra) in a.rows().into_iter().enumerate() {
        let ra = ra.to_slice().expect("standard layout");
        for (j, rb) in b.rows().into_iter().enumerate() {
            k[[i, j]] = (-gamma * sq_dist(ra, rb.to_slice().expect("standard layout"))).exp();
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdStatistic {
    pub gamma: f64,
    /// Squared MMD over full Gram blocks.
    pub biased: f64,
    /// Squared MMD with within-domain diagonals removed; needs two samples
    /// per domain.
    pub unbiased: Option<f64>,
    pub n_x: usize,
    pub n_y: usize,
}

impl MmdStatistic {
    pub fn estimates(&self, from: &str, to: &str) -> Vec<DivergenceEstimate> {
        let mut out = vec![DivergenceEstimate {
            measure: Measure::MmdBiased,
            value: self.biased,
            direction: (from.into(), to.into()),
            method: Method::KernelStatistic,
        }];
        if let Some(u) = self.unbiased {
            out.push(DivergenceEstimate {
                measure: Measure::MmdUnbiased,
                value: u,
                direction: (from.into(), to.into()),
                method: Method::KernelStatistic,
            });
        }
        out
    }
}

/// Squared maximum mean discrepancy under a Gaussian kernel; `gamma` defaults
/// to the median heuristic.
pub fn mmd(x: &Dataset, y: &Dataset, gamma: Option<f64>) -> Result<MmdStatistic> {
    if x.d() != y.d() {
        return Err(Error::DimensionMismatch(x.d(), y.d()));
    }
    let gamma = match gamma {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => return Err(Error::InvalidArgument(format!("gamma must be positive, got {g}"))),
        None => median_heuristic_gamma(x.features().view(), y.features().view()),
    };
    let block = |a: &Dataset, b: &Dataset, same: bool| {
        let mut full = 0.0;
        let mut diag = 0.0;
        for i in 0..a.n() {
            for j in 0..b.n() {
                let k = (-gamma * sq_dist(a.row(i), b.row(j))).exp();
                full += k;
                if same && i == j {
                    diag += k;
                }
            }
        }
        (full, diag)
    };
    let (nx, ny) = (x.n() as f64, y.n() as f64);
    let (sxx, dxx) = block(x, x, true);
    let (syy, dyy) = block(y, y, true);
    let (sxy, _) = block(x, y, false);
    let biased = (sxx / (nx * nx) + syy / (ny * ny) - 2.0 * sxy / (nx * ny)).max(0.0);
    let unbiased = (x.n() >= 2 && y.n() >= 2).then(|| {
        (sxx - dxx) / (nx * (nx - 1.0)) + (syy - dyy) / (ny * (ny - 1.0)) - 2.0 * sxy / (nx * ny)
    });
    Ok(MmdStatistic {
        gamma,
        biased,
        unbiased,
        n_x: x.n(),
        n_y: y.n(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_samples_have_zero_biased_mmd() {
        let x = Dataset::new("x", array![[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]], None).unwrap();
        let m = mmd(&x, &x, None).unwrap();
        assert!(m.biased.abs() < 1e-12);
    }

    #[test]
    fn two_points_by_hand() {
        let x = Dataset::new("x", array![[0.0]], None).unwrap();
        let y = Dataset::new("y", array![[1.0]], None).unwrap();
        let m = mmd(&x, &y, Some(1.0)).unwrap();
        assert!((m.biased - (2.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-15);
        assert!(m.unbiased.is_none());
    }

    #[test]
    fn median_heuristic_by_hand() {
        // squared distances 1, 4, 1 -> median 1
        let x = array![[0.0], [1.0]];
        let y = array![[2.0]];
        assert_eq!(median_heuristic_gamma(x.view(), y.view()), 1.0);
        // sorted squared distances 1, 1, 1, 4, 4, 9 -> median 2.5
        let x = array![[0.0], [1.0]];
        let y = array![[2.0], [3.0]];
        assert_eq!(median_heuristic_gamma(x.view(), y.view()), 1.0 / 2.5);
    }

    #[test]
    fn dimension_mismatch() {
        let x = Dataset::new("x", array![[0.0]], None).unwrap();
        let y = Dataset::new("y", array![[1.0, 2.0]], None).unwrap();
        assert!(matches!(mmd(&x, &y, None), Err(Error::DimensionMismatch(1, 2))));
    }
}
