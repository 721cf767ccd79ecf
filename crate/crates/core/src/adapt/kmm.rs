use serde::{Deserialize, Serialize};

use crate::data::{DomainPair, WeightVector};
use crate::density::{median_heuristic_gamma, rbf_gram};
use crate::error::{Error, Result};

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const STEP_MIN: f64 = 1e-12;
const STEP_MAX: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmmOptions {
    /// RBF width; median heuristic on the pooled sample when absent.
    pub gamma: Option<f64>,
    pub upper_bound: f64,
    /// Slack on `|mean(w) - 1|`; `(sqrt(n_s) - 1) / sqrt(n_s)` when absent.
    pub epsilon: Option<f64>,
    pub max_iter: usize,
    /// First-order tolerance on the projected gradient step, max-norm.
    pub tol: f64,
}

impl Default for KmmOptions {
    fn default() -> Self {
        Self {
            gamma: None,
            upper_bound: 1000.0,
            epsilon: None,
            max_iter: 2000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmmResult {
    pub weights: WeightVector,
    /// Objective `0.5 w'Kw - kappa'w` at the start and after every accepted step.
    pub objective_trajectory: Vec<f64>,
    pub constraint_slack: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gamma: f64,
    pub upper_bound: f64,
    pub epsilon: f64,
}

/// Euclidean projection onto `{0 <= w_i <= upper, lo_sum <= sum(w) <= hi_sum}`.
///
/// The projection is `clip(v - tau, 0, upper)` for the scalar `tau` that puts
/// the sum inside the band; `tau` is found by bisection over the sorted
/// breakpoints of the piecewise-linear sum and then interpolated.
pub fn project_box_band(v: &[f64], upper: f64, lo_sum: f64, hi_sum: f64) -> Vec<f64> {
    let clip = |tau: f64| -> Vec<f64> { v.iter().map(|x| (x - tau).clamp(0.0, upper)).collect() };
    let sum_at = |tau: f64| -> f64 { v.iter().map(|x| (x - tau).clamp(0.0, upper)).sum() };
    let s0 = sum_at(0.0);
    if s0 >= lo_sum && s0 <= hi_sum {
        return clip(0.0);
    }
    let target = if s0 > hi_sum { hi_sum } else { lo_sum };
    let mut bps: Vec<f64> = v.iter().flat_map(|x| [*x, x - upper]).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    // sum_at is non-increasing in tau: nB at bps[0], 0 at the last breakpoint.
    let (mut lo, mut hi) = (0usize, bps.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if sum_at(bps[mid]) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (ga, gb) = (sum_at(bps[lo]), sum_at(bps[hi]));
    let tau = if ga > gb {
        bps[lo] + (ga - target) / (ga - gb) * (bps[hi] - bps[lo])
    } else {
        bps[lo]
    };
    clip(tau)
}

fn matvec(k: &ndarray::Array2<f64>, x: &[f64]) -> Vec<f64> {
    k.rows()
        .into_iter()
        .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Kernel mean matching: importance weights on the source sample whose
/// kernel mean matches the target's, by spectral projected gradient with a
/// monotone Armijo backtracking line search from `w = 1`.
pub fn kernel_mean_matching(pair: &DomainPair, options: KmmOptions) -> Result<KmmResult> {
    let (xs, xt) = (pair.source.features(), pair.target.features());
    let (ns, nt) = (xs.nrows(), xt.nrows());
    if ns < 2 || nt < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: ns.min(nt),
        });
    }
    if xs.ncols() != xt.ncols() {
        return Err(Error::DimensionMismatch(xs.ncols(), xt.ncols()));
    }
    let upper = options.upper_bound;
    if !(upper >= 1.0) || !upper.is_finite() {
        return Err(Error::InvalidArgument(format!("upper bound must be >= 1, got {upper}")));
    }
    let eps = options.epsilon.unwrap_or_else(|| {
        let r = (ns as f64).sqrt();
        (r - 1.0) / r
    });
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {eps}")));
    }
    let gamma = match options.gamma {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => return Err(Error::InvalidArgument(format!("gamma must be positive, got {g}"))),
        None => median_heuristic_gamma(xs.view(), xt.view()),
    };
    let k = rbf_gram(xs.view(), xs.view(), gamma);
    let kst = rbf_gram(xs.view(), xt.view(), gamma);
    let scale = ns as f64 / nt as f64;
    let kappa: Vec<f64> = kst.rows().into_iter().map(|r| scale * r.sum()).collect();
    if k.iter().chain(&kappa).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Gram matrix".into()));
    }

    let n = ns as f64;
    // Tiny inward margin so rounding in the projected sum cannot leave the band.
    let band = eps * (1.0 - 1e-12);
    let (lo_sum, hi_sum) = (n * (1.0 - band), n * (1.0 + band));
    let project = |v: &[f64]| project_box_band(v, upper, lo_sum, hi_sum);
    let objective = |w: &[f64], kw: &[f64]| 0.5 * dot(w, kw) - dot(&kappa, w);

    let mut w = vec![1.0; ns];
    let mut kw = matvec(&k, &w);
    let mut f = objective(&w, &kw);
    let mut trajectory = vec![f];
    let mut step = 1.0 / k.rows().into_iter().map(|r| r.sum()).fold(0.0, f64::max);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        let g: Vec<f64> = kw.iter().zip(&kappa).map(|(a, b)| a - b).collect();
        let unit: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - b).collect();
        let first_order = project(&unit)
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if first_order <= options.tol {
            converged = true;
            break;
        }
        let trial: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        let d: Vec<f64> = project(&trial).iter().zip(&w).map(|(a, b)| a - b).collect();
        let gd = dot(&g, &d);
        if !(gd < 0.0) {
            converged = true;
            break;
        }
        let kd = matvec(&k, &d);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let wn: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a + lambda * b).collect();
            let kwn: Vec<f64> = kw.iter().zip(&kd).map(|(a, b)| a + lambda * b).collect();
            let fnew = objective(&wn, &kwn);
            if fnew <= f + ARMIJO * lambda * gd {
                accepted = Some((wn, kwn, fnew));
                break;
            }
            lambda *= 0.5;
        }
        let Some((wn, kwn, fnew)) = accepted else {
            break;
        };
        iterations += 1;
        let sts = lambda * lambda * dot(&d, &d);
        let sty = lambda * lambda * dot(&d, &kd);
        step = if sty > 0.0 { (sts / sty).clamp(STEP_MIN, STEP_MAX) } else { STEP_MAX };
        w = wn;
        kw = kwn;
        f = fnew;
        trajectory.push(f);
    }
    if !converged {
        log::warn!("kernel mean matching stopped after {iterations} iterations without meeting tolerance");
    }
    let slack = (w.iter().sum::<f64>() / n - 1.0).abs();
    Ok(KmmResult {
        weights: WeightVector::per_sample(w)?,
        objective_trajectory: trajectory,
        constraint_slack: slack,
        converged,
        iterations,
        gamma,
        upper_bound: upper,
        epsilon: eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, LabelSpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn pair_1d(seed: u64, n: usize, shift: f64) -> DomainPair {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Normal::new(0.0, 1.0).unwrap();
        let src: Vec<Vec<f64>> = (0..n).map(|_| vec![z.sample(&mut rng)]).collect();
        let tgt: Vec<Vec<f64>> = (0..n).map(|_| vec![z.sample(&mut rng) + shift]).collect();
        let labels: Vec<String> = (0..n).map(|i| if i % 2 == 0 { "+1" } else { "-1" }.into()).collect();
        DomainPair::new(
            Dataset::from_rows("s", &src, Some(labels)).unwrap(),
            Dataset::from_rows("t", &tgt, None).unwrap(),
            LabelSpace::signed_binary(),
        )
        .unwrap()
    }

    #[test]
    fn projection_by_hand() {
        // inside the band: plain clipping
        assert_eq!(project_box_band(&[-1.0, 0.5, 3.0], 2.0, 0.0, 10.0), vec![0.0, 0.5, 2.0]);
        // sum 6 must drop to 3: tau = 1 on (2, 2, 2)
        let p = project_box_band(&[2.0, 2.0, 2.0], 10.0, 0.0, 3.0);
        for v in p {
            assert!((v - 1.0).abs() < 1e-12);
        }
        // raise sum to 4 from (0, 0): tau = -2
        let p = project_box_band(&[0.0, 0.0], 3.0, 4.0, 5.0);
        assert!((p[0] - 2.0).abs() < 1e-12 && (p[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn projection_is_nearest_feasible_point() {
        let v = [3.0, -2.0, 0.7, 5.0, 1.1];
        let p = project_box_band(&v, 2.0, 1.0, 3.0);
        let dist = |w: &[f64]| v.iter().zip(w).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let best = dist(&p);
        let s: f64 = p.iter().sum();
        assert!((1.0 - 1e-9..=3.0 + 1e-9).contains(&s));
        // compare against feasible perturbations that keep the sum fixed
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    continue;
                }
                let mut q = p.clone();
                q[i] += 0.01;
                q[j] -= 0.01;
                if q.iter().all(|x| (0.0..=2.0).contains(x)) {
                    assert!(dist(&q) >= best - 1e-12);
                }
            }
        }
    }

    #[test]
    fn null_case_keeps_unit_weights() {
        let p = pair_1d(3, 100, 0.0);
        let same = DomainPair::new(p.source.clone(), p.source.without_labels(), p.label_space.clone()).unwrap();
        let r = kernel_mean_matching(&same, KmmOptions::default()).unwrap();
        let ones_obj = r.objective_trajectory[0];
        let last = *r.objective_trajectory.last().unwrap();
        assert!((ones_obj - last).abs() < 1e-6);
    }

    #[test]
    fn shifted_target_reaches_reference_optimum() {
        let p = pair_1d(17, 500, 1.0);
        let r = kernel_mean_matching(&p, KmmOptions::default()).unwrap();
        let w = r.weights.values();
        assert!(w.iter().all(|v| (0.0..=1000.0).contains(v)));
        assert!(r.constraint_slack <= r.epsilon);
        for pair in r.objective_trajectory.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9);
        }
        // optimum of the same QP from an interior-point solver on this sample
        let reference = -59_702.148_094_348_29;
        let last = *r.objective_trajectory.last().unwrap();
        assert!(((last - reference) / reference).abs() < 2e-5, "{last}");
        // the reweighted source mean moves onto the target mean
        let xs = p.source.column(0);
        let mean_w = xs.iter().zip(w).map(|(x, v)| x * v).sum::<f64>() / w.iter().sum::<f64>();
        let mean_t = p.target.column(0).mean().unwrap();
        assert!((mean_w - mean_t).abs() < 0.1, "{mean_w} vs {mean_t}");
    }

    #[test]
    fn null_case_weights_stay_near_one() {
        for seed in [17, 1, 2] {
            let p = pair_1d(seed, 500, 0.0);
            let r = kernel_mean_matching(&p, KmmOptions::default()).unwrap();
            let w = r.weights.values();
            let inside = w.iter().filter(|v| (0.5..=2.0).contains(*v)).count();
            assert!(inside as f64 >= 0.95 * w.len() as f64, "seed {seed}: {inside}");
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            assert!((mean - 1.0).abs() <= r.epsilon);
        }
    }

    #[test]
    fn rejects_tiny_samples() {
        let p = pair_1d(1, 1, 0.0);
        assert!(matches!(
            kernel_mean_matching(&p, KmmOptions::default()),
            Err(Error::InsufficientSamples { .. })
        ));
    }
}
