//! Neighborhood cooperativity functions and per-sample bandwidths.
//!
//! Kernels take a distance that is already squared (for the squared
//! Euclidean spec) and map it into (0, 1]. The ordering-space kernel `h`
//! may be Gaussian, Student-t or Cauchy-Lorentz; the exploration-space
//! kernel `g` used by the learning rules is Gaussian.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::{Dataset, DistanceSpec};
use crate::error::{Result, XimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
    StudentT,
    CauchyLorentz,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::StudentT => "student_t",
            KernelFamily::CauchyLorentz => "cauchy_lorentz",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = XimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "student_t" | "t" => Ok(KernelFamily::StudentT),
            "cauchy_lorentz" | "cauchy" => Ok(KernelFamily::CauchyLorentz),
            other => Err(XimError::config(format!("unknown kernel family {other:?}"))),
        }
    }
}

/// A kernel family with its bandwidth (sigma for h, gamma for g).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(XimError::config(format!(
                "kernel bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(KernelSpec { family, bandwidth })
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        Self::new(self.family, bandwidth)
    }

    /// Kernel value at a nonnegative distance.
    pub fn eval(&self, dist: f64) -> Result<f64> {
        if !(dist >= 0.0) {
            return Err(XimError::domain(format!(
                "kernel distance must be nonnegative, got {dist}"
            )));
        }
        Ok(self.value(dist))
    }

    /// Unchecked evaluation for hot loops; `dist` must be >= 0.
    #[inline]
    pub fn value(&self, dist: f64) -> f64 {
        let b = self.bandwidth;
        match self.family {
            KernelFamily::Gaussian => (-dist / (2.0 * b * b)).exp(),
            KernelFamily::StudentT => (1.0 + dist / b).powf(-(b + 1.0) / 2.0),
            KernelFamily::CauchyLorentz => 1.0 / (1.0 + dist / (b * b)),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family, self.bandwidth)
    }
}

pub fn kernel_eval(spec: &KernelSpec, dist: f64) -> Result<f64> {
    spec.eval(dist)
}

/// Lower bound applied to per-sample bandwidths (duplicate points).
pub const BANDWIDTH_FLOOR: f64 = 1e-12;

/// The exploration-space kernel, either shared by every sample or with a
/// bandwidth attached to each data sample.
#[derive(Debug, Clone, PartialEq)]
pub enum ExplorationKernel {
    Shared(KernelSpec),
    PerSample {
        family: KernelFamily,
        bandwidths: Vec<f64>,
    },
}

impl ExplorationKernel {
    pub fn per_sample(family: KernelFamily, bandwidths: Vec<f64>) -> Result<Self> {
        if let Some(b) = bandwidths.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
            return Err(XimError::config(format!(
                "per-sample bandwidths must be positive, got {b}"
            )));
        }
        Ok(ExplorationKernel::PerSample { family, bandwidths })
    }

    /// Kernel for data sample `i`.
    pub fn for_sample(&self, i: usize) -> KernelSpec {
        match self {
            ExplorationKernel::Shared(k) => *k,
            ExplorationKernel::PerSample { family, bandwidths } => KernelSpec {
                family: *family,
                bandwidth: bandwidths[i],
            },
        }
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            ExplorationKernel::Shared(k) => k.family,
            ExplorationKernel::PerSample { family, .. } => *family,
        }
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        match self {
            ExplorationKernel::PerSample { bandwidths, .. } => {
                crate::error::check_shape("per-sample bandwidth count", n, bandwidths.len())
            }
            ExplorationKernel::Shared(_) => Ok(()),
        }
    }
}

/// How per-sample bandwidths gamma_i are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthPolicy {
    /// One annealed gamma shared by all samples.
    Global,
    /// gamma_i from the distance to the k-th nearest neighbor; k is
    /// annealed from `k_start` to `k_end`.
    KnnBall { k_start: f64, k_end: f64 },
    /// gamma_i calibrated to a target perplexity.
    Perplexity(f64),
}

/// Sorted distances from each item to all others (self excluded).
pub fn sorted_neighbor_distances(data: &Dataset, dist: &DistanceSpec) -> Result<Array2<f64>> {
    let pairwise = dist.pairwise(data)?;
    let n = data.len();
    let mut out = Array2::zeros((n, n.saturating_sub(1)));
    for i in 0..n {
        let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| pairwise[[i, j]]).collect();
        row.sort_by(f64::total_cmp);
        for (k, v) in row.into_iter().enumerate() {
            out[[i, k]] = v;
        }
    }
    Ok(out)
}

/// gamma_i = distance from x_i to its k-th nearest other item, floored at
/// [`BANDWIDTH_FLOOR`].
pub fn bandwidths_knn(data: &Dataset, dist: &DistanceSpec, k: usize) -> Result<Vec<f64>> {
    let n = data.len();
    if k == 0 || k + 1 > n {
        return Err(XimError::config(format!(
            "k must lie in [1, {}], got {k}",
            n.saturating_sub(1)
        )));
    }
    let sorted = sorted_neighbor_distances(data, dist)?;
    Ok(knn_from_sorted(&sorted, k))
}

pub(crate) fn knn_from_sorted(sorted: &Array2<f64>, k: usize) -> Vec<f64> {
    sorted
        .rows()
        .into_iter()
        .map(|r| r[k - 1].max(BANDWIDTH_FLOOR))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerplexityBandwidths {
    pub gamma: Vec<f64>,
    /// false where the bisection ran out of steps before reaching tolerance.
    pub converged: Vec<bool>,
}

pub const PERPLEXITY_TOLERANCE: f64 = 1e-4;
pub const PERPLEXITY_MAX_STEPS: usize = 64;

/// Shannon entropy in bits of p(j) proportional to exp(-beta d_j).
fn entropy_bits(dists: &[f64], beta: f64) -> f64 {
    let d_min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = dists.iter().map(|d| (-(d - d_min) * beta).exp()).collect();
    let z: f64 = weights.iter().sum();
    let h_nats: f64 = weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| {
            let p = w / z;
            -p * p.ln()
        })
        .sum();
    h_nats / std::f64::consts::LN_2
}

/// Bisection on beta = 1 / (2 gamma^2) so that 2^H matches `perplexity`.
fn calibrate_one(dists: &[f64], perplexity: f64) -> (f64, bool) {
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    let mut beta = if mean > 0.0 { 1.0 / mean } else { 1.0 };
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut converged = false;
    for _ in 0..PERPLEXITY_MAX_STEPS {
        let perp = entropy_bits(dists, beta).exp2();
        if (perp - perplexity).abs() <= PERPLEXITY_TOLERANCE {
            converged = true;
            break;
        }
        if perp > perplexity {
            // too flat: sharpen
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    let gamma = (1.0 / (2.0 * beta)).sqrt().max(BANDWIDTH_FLOOR);
    (gamma, converged)
}

/// Per-sample gamma_i for a target perplexity over the Gaussian affinities
/// p(j|i) proportional to exp(-d(x_i, x_j) / 2 gamma_i^2).
pub fn bandwidths_perplexity(
    data: &Dataset,
    dist: &DistanceSpec,
    perplexity: f64,
) -> Result<PerplexityBandwidths> {
    let n = data.len();
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(XimError::config(format!(
            "perplexity must lie in (1, {n}), got {perplexity}"
        )));
    }
    let pairwise = dist.pairwise(data)?;
    let results: Vec<(f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| pairwise[[i, j]]).collect();
            calibrate_one(&row, perplexity)
        })
        .collect();
    let (gamma, converged) = results.into_iter().unzip();
    Ok(PerplexityBandwidths { gamma, converged })
}

/// 2^H of the affinities implied by `gamma` for the distances `dists`.
pub fn perplexity_of(dists: &[f64], gamma: f64) -> f64 {
    entropy_bits(dists, 1.0 / (2.0 * gamma * gamma)).exp2()
}
