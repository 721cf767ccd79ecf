use std::f64::consts::LOG2_E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Density1d, Gaussian};

/// Floor applied to densities inside logarithms.
pub const DENSITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Measure {
    Kl,
    Js,
    Renyi { alpha: f64 },
    MmdBiased,
    MmdUnbiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedFormGaussian,
    KdeGrid,
    /// Grid integration of parametric densities without a closed form.
    NumericGrid,
    KernelStatistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub measure: Measure,
    pub value: f64,
    /// `(from, to)`; KL and Rényi are read as `D(from || to)`.
    pub direction: (String, String),
    pub method: Method,
}

/// Integration grid: `points` equally spaced nodes spanning both supports,
/// each widened by `pad` bandwidths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
    pub pad: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            points: 2048,
            pad: 8.0,
        }
    }
}

impl Grid {
    fn nodes(&self, p: &dyn Density1d, q: &dyn Density1d) -> (Vec<f64>, f64) {
        let (a_lo, a_hi) = p.support(self.pad);
        let (b_lo, b_hi) = q.support(self.pad);
        let lo = a_lo.min(b_lo);
        let hi = a_hi.max(b_hi);
        let m = self.points.max(2);
        let dx = (hi - lo) / (m - 1) as f64;
        ((0..m).map(|i| lo + i as f64 * dx).collect(), dx)
    }
}

fn trapezoid(values: impl ExactSizeIterator<Item = f64>, dx: f64) -> f64 {
    let last = values.len() - 1;
    values
        .enumerate()
        .map(|(i, v)| if i == 0 || i == last { 0.5 * v } else { v })
        .sum::<f64>()
        * dx
}

fn check_pair(p: &dyn Density1d, q: &dyn Density1d) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(p.dim(), q.dim()));
    }
    if p.dim() > 1 {
        return Err(Error::Multivariate(p.dim()));
    }
    Ok(())
}

fn grid_method(p: &dyn Density1d, q: &dyn Density1d) -> Method {
    if p.is_kde() || q.is_kde() {
        Method::KdeGrid
    } else {
        Method::NumericGrid
    }
}

fn estimate(measure: Measure, value: f64, p: &dyn Density1d, q: &dyn Density1d, method: Method) -> DivergenceEstimate {
    DivergenceEstimate {
        measure,
        value,
        direction: (p.name(), q.name()),
        method,
    }
}

/// Kullback-Leibler divergence `D(p || q)` in nats.
pub fn kl_divergence(p: &dyn Density1d, q: &dyn Density1d) -> Result<DivergenceEstimate> {
    kl_divergence_with(p, q, &Grid::default())
}

pub fn kl_divergence_with(p: &dyn Density1d, q: &dyn Density1d, grid: &Grid) -> Result<DivergenceEstimate> {
    check_pair(p, q)?;
    if let (Some(a), Some(b)) = (p.gaussian(), q.gaussian()) {
        let v = gaussian_kl(a, b);
        return Ok(estimate(Measure::Kl, v, p, q, Method::ClosedFormGaussian));
    }
    let (xs, dx) = grid.nodes(p, q);
    let integrand = xs.iter().map(|&x| {
        let pv = p.pdf(x);
        if pv <= 0.0 {
            0.0
        } else {
            pv * (pv.max(DENSITY_FLOOR) / q.pdf(x).max(DENSITY_FLOOR)).ln()
        }
    });
    let v = trapezoid(integrand.collect::<Vec<_>>().into_iter(), dx).max(0.0);
    Ok(estimate(Measure::Kl, v, p, q, grid_method(p, q)))
}

fn gaussian_kl(a: Gaussian, b: Gaussian) -> f64 {
    let delta = a.mean - b.mean;
    if a.std == b.std {
        delta * delta / (2.0 * a.std * a.std)
    } else {
        ((b.std / a.std).ln() + (a.std * a.std + delta * delta) / (2.0 * b.std * b.std) - 0.5).max(0.0)
    }
}

/// Jensen-Shannon divergence in bits, in `[0, 1]`; symmetric bit-for-bit.
pub fn js_divergence(p: &dyn Density1d, q: &dyn Density1d) -> Result<DivergenceEstimate> {
    js_divergence_with(p, q, &Grid::default())
}

pub fn js_divergence_with(p: &dyn Density1d, q: &dyn Density1d, grid: &Grid) -> Result<DivergenceEstimate> {
    check_pair(p, q)?;
    let (xs, dx) = grid.nodes(p, q);
    let term = |a: f64, m: f64| {
        if a <= 0.0 {
            0.0
        } else {
            a * (a.max(DENSITY_FLOOR) / m.max(DENSITY_FLOOR)).log2()
        }
    };
    let integrand: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let pv = p.pdf(x);
            let qv = q.pdf(x);
            let m = 0.5 * (pv + qv);
            0.5 * (term(pv, m) + term(qv, m))
        })
        .collect();
    let v = trapezoid(integrand.into_iter(), dx).clamp(0.0, 1.0);
    Ok(estimate(Measure::Js, v, p, q, grid_method(p, q)))
}

/// Rényi divergence of order `alpha` (bits). `alpha == 1` is the KL limit
/// and must go through [`kl_divergence`].
pub fn renyi_divergence(p: &dyn Density1d, q: &dyn Density1d, alpha: f64) -> Result<DivergenceEstimate> {
    renyi_divergence_with(p, q, alpha, &Grid::default())
}

pub fn renyi_divergence_with(
    p: &dyn Density1d,
    q: &dyn Density1d,
    alpha: f64,
    grid: &Grid,
) -> Result<DivergenceEstimate> {
    if !(alpha > 0.0 && alpha.is_finite()) || alpha == 1.0 {
        return Err(Error::InvalidOrder(alpha));
    }
    check_pair(p, q)?;
    let measure = Measure::Renyi { alpha };
    if let (Some(a), Some(b)) = (p.gaussian(), q.gaussian()) {
        if let Some(v) = gaussian_renyi_bits(a, b, alpha) {
            return Ok(estimate(measure, v, p, q, Method::ClosedFormGaussian));
        }
    }
    let (xs, dx) = grid.nodes(p, q);
    let integrand: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let pv = p.pdf(x);
            if pv <= 0.0 {
                return 0.0;
            }
            let qv = if alpha > 1.0 { q.pdf(x).max(DENSITY_FLOOR) } else { q.pdf(x) };
            pv.powf(alpha) * qv.powf(1.0 - alpha)
        })
        .collect();
    let integral = trapezoid(integrand.into_iter(), dx);
    let v = (integral.log2() / (alpha - 1.0)).max(0.0);
    Ok(estimate(measure, v, p, q, grid_method(p, q)))
}

/// Closed form for two normals; `None` when the order makes the integral
/// diverge (`alpha * var_q + (1 - alpha) * var_p <= 0`).
fn gaussian_renyi_bits(a: Gaussian, b: Gaussian, alpha: f64) -> Option<f64> {
    let delta = a.mean - b.mean;
    if a.std == b.std {
        return Some(alpha * delta * delta / (2.0 * a.std * a.std) * LOG2_E);
    }
    let (va, vb) = (a.std * a.std, b.std * b.std);
    let mixed = alpha * vb + (1.0 - alpha) * va;
    if mixed <= 0.0 {
        return None;
    }
    let nats = alpha * delta * delta / (2.0 * mixed)
        + ((mixed.sqrt()) / (a.std.powf(1.0 - alpha) * b.std.powf(alpha))).ln() / (1.0 - alpha);
    Some((nats * LOG2_E).max(0.0))
}
