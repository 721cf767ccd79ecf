//! Two-sample hypothesis tests used to decide whether a distribution moved
//! between source and target: Kolmogorov-Smirnov per feature, chi-squared on
//! label counts, and an MMD permutation test for the joint feature law.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DomainPair};
use crate::density::{median_heuristic_gamma, sq_dist};
use crate::error::{Error, Result};

/// Levels at which every [`TestResult`] records a decision.
pub const LEVELS: [f64; 3] = [0.10, 0.05, 0.01];

pub const DEFAULT_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub level: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub reject_at: Vec<Decision>,
    pub n_source: usize,
    pub n_target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees_of_freedom: Option<usize>,
}

impl TestResult {
    fn new(test_name: &str, statistic: f64, p_value: f64, n_source: usize, n_target: usize) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            test_name: test_name.into(),
            statistic,
            p_value,
            reject_at: LEVELS
                .iter()
                .map(|&level| Decision {
                    level,
                    reject: p_value < level,
                })
                .collect(),
            n_source,
            n_target,
            degrees_of_freedom: None,
        }
    }

    /// Whether the null is rejected at `level`.
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Asymptotic Kolmogorov survival function `Q(lambda)`. Returns 1 when the
/// alternating series does not settle within 100 terms (small `lambda`).
fn kolmogorov_q(lambda: f64) -> f64 {
    let a2 = -2.0 * lambda * lambda;
    let mut fac = 2.0;
    let mut sum = 0.0;
    let mut prev = 0.0f64;
    for j in 1..=100 {
        let j = j as f64;
        let term = fac * (a2 * j * j).exp();
        sum += term;
        if term.abs() <= 1e-3 * prev || term.abs() <= 1e-8 * sum {
            return sum.clamp(0.0, 1.0);
        }
        fac = -fac;
        prev = term.abs();
    }
    1.0
}

/// Largest gap between the two empirical CDFs.
pub fn ks_statistic(x: &[f64], y: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// `Q((sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) * D)`, `ne = nx ny / (nx + ny)`.
/// Approximate below `ne` of about 35.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = ks_statistic(x, y);
    let ne = (x.len() * y.len()) as f64 / (x.len() + y.len()) as f64;
    let sq = ne.sqrt();
    let p = kolmogorov_q((sq + 0.12 + 0.11 / sq) * d);
    Ok(TestResult::new("ks_two_sample", d, p, x.len(), y.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureShiftScreen {
    pub level: f64,
    /// Bonferroni-corrected per-dimension level `level / d`.
    pub corrected_level: f64,
    pub per_dimension: Vec<TestResult>,
    pub shifted: bool,
    pub verdict: String,
}

/// KS test on every feature; `P(x)` counts as shifted if any dimension
/// rejects at `level / d`.
pub fn feature_shift_screen(pair: &DomainPair, level: f64) -> Result<FeatureShiftScreen> {
    check_level(level)?;
    if pair.source.d() != pair.target.d() {
        return Err(Error::DimensionMismatch(pair.source.d(), pair.target.d()));
    }
    let d = pair.source.d();
    let corrected = level / d as f64;
    let per_dimension = (0..d)
        .map(|j| {
            let xs = pair.source.column(j).to_vec();
            let ys = pair.target.column(j).to_vec();
            ks_two_sample(&xs, &ys)
        })
        .collect::<Result<Vec<_>>>()?;
    let shifted = per_dimension.iter().any(|r| r.rejects(corrected));
    Ok(FeatureShiftScreen {
        level,
        corrected_level: corrected,
        per_dimension,
        shifted,
        verdict: if shifted { "P(x) shifted" } else { "no shift detected" }.into(),
    })
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("significance level must be in (0, 1), got {level}")))
    }
}

/// Chi-squared homogeneity test on the `2 x k` table of label counts.
/// Labels absent from both samples are dropped from the table.
pub fn label_shift_test(source: &[usize], target: &[usize], k: usize) -> Result<TestResult> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptySample);
    }
    let count = |labels: &[usize]| -> Result<Vec<f64>> {
        let mut c = vec![0.0; k];
        for &l in labels {
            *c.get_mut(l)
                .ok_or_else(|| Error::InvalidArgument(format!("label index {l} outside 0..{k}")))? += 1.0;
        }
        Ok(c)
    };
    let (cs, ct) = (count(source)?, count(target)?);
    let (ns, nt) = (source.len() as f64, target.len() as f64);
    let total = ns + nt;
    let mut stat = 0.0;
    let mut cells = 0usize;
    for c in 0..k {
        let pooled = cs[c] + ct[c];
        if pooled == 0.0 {
            continue;
        }
        cells += 1;
        let es = ns * pooled / total;
        let et = nt * pooled / total;
        stat += (cs[c] - es).powi(2) / es + (ct[c] - et).powi(2) / et;
    }
    if cells < 2 {
        return Err(Error::DegenerateTable);
    }
    let df = cells - 1;
    let p = chi_squared_sf(stat, df);
    let mut r = TestResult::new("label_shift_chi2", stat, p, source.len(), target.len());
    r.degrees_of_freedom = Some(df);
    Ok(r)
}

/// Chi-squared survival function via the regularized upper incomplete gamma.
pub fn chi_squared_sf(stat: f64, df: usize) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(df as f64 / 2.0, stat / 2.0)
}

/// Permutation test on the unbiased squared MMD. The kernel width is the
/// median heuristic on the pooled sample, fixed across permutations.
pub fn mmd_permutation_test(x: &Dataset, y: &Dataset, permutations: usize, seed: u64) -> Result<TestResult> {
    if permutations < 100 {
        return Err(Error::InsufficientPermutations(permutations));
    }
    if x.d() != y.d() {
        return Err(Error::DimensionMismatch(x.d(), y.d()));
    }
    let (nx, ny) = (x.n(), y.n());
    if nx < 2 || ny < 2 || nx + ny < 10 {
        return Err(Error::InsufficientSamples {
            needed: 10,
            got: nx + ny,
        });
    }
    let gamma = median_heuristic_gamma(x.features().view(), y.features().view());
    let rows: Vec<&[f64]> = (0..nx).map(|i| x.row(i)).chain((0..ny).map(|i| y.row(i))).collect();
    let n = rows.len();
    let mut gram = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        gram[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let k = (-gamma * sq_dist(rows[i], rows[j])).exp();
            gram[[i, j]] = k;
            gram[[j, i]] = k;
        }
    }
    let stat = |order: &[usize]| -> f64 {
        let (xs, ys) = order.split_at(nx);
        let within = |idx: &[usize]| -> f64 {
            let mut s = 0.0;
            for (a, &i) in idx.iter().enumerate() {
                for &j in &idx[a + 1..] {
                    s += gram[[i, j]];
                }
            }
            2.0 * s
        };
        let mut cross = 0.0;
        for &i in xs {
            for &j in ys {
                cross += gram[[i, j]];
            }
        }
        let (fx, fy) = (nx as f64, ny as f64);
        within(xs) / (fx * (fx - 1.0)) + within(ys) / (fy * (fy - 1.0)) - 2.0 * cross / (fx * fy)
    };
    let mut order: Vec<usize> = (0..n).collect();
    let observed = stat(&order);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        order.shuffle(&mut rng);
        if stat(&order) >= observed {
            exceed += 1;
        }
    }
    let p = (1 + exceed) as f64 / (1 + permutations) as f64;
    Ok(TestResult::new("mmd_permutation", observed, p, nx, ny))
}
