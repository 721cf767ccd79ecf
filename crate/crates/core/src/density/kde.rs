use ndarray::Array2;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};

use super::Density1d;

/// Lower bound on any fitted bandwidth.
pub const BANDWIDTH_FLOOR: f64 = 1e-6;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Kernels further than this many bandwidths away contribute < 1e-17 and
/// are skipped on the sorted 1-D path.
const CUTOFF_BANDWIDTHS: f64 = 9.0;

/// Gaussian product-kernel density estimate.
#[derive(Debug, Clone, Serialize)]
pub struct Kde {
    name: String,
    #[serde(skip)]
    samples: Array2<f64>,
    bandwidth: Vec<f64>,
    /// Dimensions whose sample variance was zero (bandwidth floored).
    zero_variance: Vec<usize>,
    #[serde(skip)]
    sorted: Option<Vec<f64>>,
}

/// Silverman's rule of thumb: `1.06 * sd * n^(-1/5)`.
pub fn silverman_bandwidth(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    1.06 * var.sqrt() * n.powf(-0.2)
}

/// Fits a Gaussian KDE. With `bandwidth == None` each dimension gets its own
/// Silverman bandwidth; zero-variance dimensions get [`BANDWIDTH_FLOOR`].
pub fn fit_kde(ds: &Dataset, bandwidth: Option<f64>) -> Result<Kde> {
    if ds.n() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: ds.n(),
        });
    }
    if let Some(h) = bandwidth {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
        }
    }
    let mut zero_variance = Vec::new();
    let bw: Vec<f64> = (0..ds.d())
        .map(|j| {
            let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(ds.column(j).iter().copied()));
            if h < BANDWIDTH_FLOOR {
                zero_variance.push(j);
                BANDWIDTH_FLOOR
            } else {
                h
            }
        })
        .collect();
    if !zero_variance.is_empty() {
        log::warn!(
            "kde `{}`: zero variance in dimension(s) {:?}, bandwidth floored at {BANDWIDTH_FLOOR}",
            ds.name(),
            zero_variance
        );
    }
    Ok(Kde::build(ds, bw, zero_variance))
}

impl Kde {
    fn build(ds: &Dataset, bandwidth: Vec<f64>, zero_variance: Vec<usize>) -> Self {
        let sorted = (ds.d() == 1).then(|| {
            let mut v = ds.column(0).to_vec();
            v.sort_by(f64::total_cmp);
            v
        });
        Kde {
            name: ds.name().to_string(),
            samples: ds.features().clone(),
            bandwidth,
            zero_variance,
            sorted,
        }
    }

    /// KDE with one fixed bandwidth per dimension.
    pub fn with_bandwidths(ds: &Dataset, bandwidth: &[f64]) -> Result<Self> {
        if bandwidth.len() != ds.d() {
            return Err(Error::DimensionMismatch(bandwidth.len(), ds.d()));
        }
        if let Some(h) = bandwidth.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
        }
        if ds.n() == 0 {
            return Err(Error::EmptySample);
        }
        Ok(Kde::build(ds, bandwidth.to_vec(), Vec::new()))
    }

    /// Convenience constructor for a 1-D sample.
    pub fn from_slice(name: &str, values: &[f64], bandwidth: Option<f64>) -> Result<Self> {
        let features = Array2::from_shape_vec((values.len(), 1), values.to_vec())
            .map_err(|e| Error::InvalidDataset(e.to_string()))?;
        fit_kde(&Dataset::new(name, features, None)?, bandwidth)
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn zero_variance_warning(&self) -> bool {
        !self.zero_variance.is_empty()
    }

    pub fn n(&self) -> usize {
        self.samples.nrows()
    }

    pub fn d(&self) -> usize {
        self.samples.ncols()
    }

    /// Density at `x` (length `d`).
    pub fn density(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.d(), "query dimension");
        if let Some(sorted) = &self.sorted {
            return self.density_1d(sorted, x[0]);
        }
        let norm: f64 = self.bandwidth.iter().map(|h| INV_SQRT_2PI / h).product();
        let sum: f64 = self
            .samples
            .rows()
            .into_iter()
            .map(|s| {
                let q: f64 = s
                    .iter()
                    .zip(x)
                    .zip(&self.bandwidth)
                    .map(|((si, xi), h)| ((xi - si) / h).powi(2))
                    .sum();
                (-0.5 * q).exp()
            })
            .sum();
        norm * sum / self.n() as f64
    }

    fn density_1d(&self, sorted: &[f64], x: f64) -> f64 {
        let h = self.bandwidth[0];
        let lo = sorted.partition_point(|&s| s < x - CUTOFF_BANDWIDTHS * h);
        let hi = sorted.partition_point(|&s| s <= x + CUTOFF_BANDWIDTHS * h);
        let sum: f64 = sorted[lo..hi]
            .iter()
            .map(|s| (-0.5 * ((x - s) / h).powi(2)).exp())
            .sum();
        INV_SQRT_2PI / h * sum / self.n() as f64
    }

    /// Densities at many 1-D points.
    pub fn density_grid(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.density(&[x])).collect()
    }
}

impl Density1d for Kde {
    fn pdf(&self, x: f64) -> f64 {
        self.density(&[x])
    }

    fn support(&self, pad: f64) -> (f64, f64) {
        let col = self.samples.column(0);
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        (lo - pad * self.bandwidth[0], hi + pad * self.bandwidth[0])
    }

    fn dim(&self) -> usize {
        self.d()
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn is_kde(&self) -> bool {
        true
    }
}
