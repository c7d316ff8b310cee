//! Training configuration shared by the online and batch trainers.

use std::fmt;
use std::str::FromStr;

use crate::assignment::BestMatchRule;
use crate::data::{Dataset, DistanceSpec};
use crate::error::{Result, XimError};
use crate::kernels::{sorted_neighbor_distances, BandwidthPolicy, KernelFamily, BANDWIDTH_FLOOR};
use crate::lattice::Lattice;
use crate::prototypes::InitPolicy;

/// Embedding method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Gaussian h.
    Xim,
    /// Student-t h.
    TXim,
    /// Cauchy-Lorentz h.
    CXim,
    Som,
    BatchXim,
    MedianXim,
    Pca,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Xim,
        Method::TXim,
        Method::CXim,
        Method::Som,
        Method::BatchXim,
        Method::MedianXim,
        Method::Pca,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Xim => "xim",
            Method::TXim => "t-xim",
            Method::CXim => "c-xim",
            Method::Som => "som",
            Method::BatchXim => "batch-xim",
            Method::MedianXim => "median-xim",
            Method::Pca => "pca",
        }
    }

    /// Whether this method is trained by the online loop.
    pub fn is_online(&self) -> bool {
        matches!(self, Method::Xim | Method::TXim | Method::CXim | Method::Som)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = XimError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| XimError::config(format!("unknown method {s:?}")))
    }
}

/// Start and end value of an annealed parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub start: f64,
    pub end: f64,
}

impl Schedule {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        let s = Schedule { start, end };
        s.validate("schedule")?;
        Ok(s)
    }

    pub fn constant(v: f64) -> Self {
        Schedule { start: v, end: v }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        for v in [self.start, self.end] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(XimError::config(format!(
                    "{what} endpoints must be positive and finite, got {} -> {}",
                    self.start, self.end
                )));
            }
        }
        Ok(())
    }
}

/// How the prototype update weighs attraction (h) against repulsion (g).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// (1 - eta) h against eta g.
    #[default]
    Eta,
    /// h against g with unit weights.
    Unweighted,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Eta => "eta",
            Weighting::Unweighted => "unweighted",
        })
    }
}

impl FromStr for Weighting {
    type Err = XimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eta" => Ok(Weighting::Eta),
            "unweighted" => Ok(Weighting::Unweighted),
            other => Err(XimError::config(format!("unknown weighting {other:?}"))),
        }
    }
}

pub const DEFAULT_ETA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub t_max: usize,
    pub epsilon: Schedule,
    /// None: derived from the lattice.
    pub sigma: Option<Schedule>,
    /// None: derived from the data. Ignored unless the bandwidth policy is global.
    pub gamma: Option<Schedule>,
    pub bandwidth: BandwidthPolicy,
    pub eta: f64,
    pub weighting: Weighting,
    /// Keep the 1/gamma^2 factor of the squared-Euclidean learning rule.
    pub retain_prefactor: bool,
    pub best_match: BestMatchRule,
    pub seed: u64,
    pub init: InitPolicy,
    /// Log every `log_stride`-th iteration (and the last).
    pub log_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::CXim,
            t_max: 20_000,
            epsilon: Schedule {
                start: 0.9,
                end: 0.01,
            },
            sigma: None,
            gamma: None,
            bandwidth: BandwidthPolicy::Global,
            eta: DEFAULT_ETA,
            weighting: Weighting::Eta,
            retain_prefactor: false,
            best_match: BestMatchRule::MinDistance,
            seed: 0,
            init: InitPolicy::Samples,
            log_stride: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max < 1 {
            return Err(XimError::config("t_max must be at least 1"));
        }
        self.epsilon.validate("epsilon")?;
        if let Some(s) = &self.sigma {
            s.validate("sigma")?;
        }
        if let Some(s) = &self.gamma {
            s.validate("gamma")?;
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(XimError::config(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        match self.bandwidth {
            BandwidthPolicy::Global => {}
            BandwidthPolicy::KnnBall { k_start, k_end } => {
                if !(k_start >= 1.0 && k_end >= 1.0) {
                    return Err(XimError::config("knn bandwidth k must be at least 1"));
                }
            }
            BandwidthPolicy::Perplexity(p) => {
                if !(p > 1.0) {
                    return Err(XimError::config("perplexity must exceed 1"));
                }
            }
        }
        if self.log_stride == 0 {
            return Err(XimError::config("log_stride must be at least 1"));
        }
        Ok(())
    }

    /// Family of the ordering-space kernel h selected by the method tag.
    pub fn ordering_family(&self) -> KernelFamily {
        match self.method {
            Method::TXim => KernelFamily::StudentT,
            Method::CXim => KernelFamily::CauchyLorentz,
            _ => KernelFamily::Gaussian,
        }
    }

    /// Fills in data- and lattice-derived schedule defaults.
    pub fn resolve(&self, data: &Dataset, lattice: &Lattice) -> Result<ResolvedSchedules> {
        self.validate()?;
        let sigma = self.sigma.unwrap_or_else(|| default_sigma(lattice));
        let gamma = match self.gamma {
            Some(g) => g,
            None => default_gamma(data)?,
        };
        Ok(ResolvedSchedules {
            epsilon: self.epsilon,
            sigma,
            gamma,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedSchedules {
    pub epsilon: Schedule,
    pub sigma: Schedule,
    pub gamma: Schedule,
}

/// sigma from half the largest lattice extent down to 0.5.
pub fn default_sigma(lattice: &Lattice) -> Schedule {
    Schedule {
        start: (lattice.max_extent() / 2.0).max(0.5),
        end: 0.5,
    }
}

/// gamma with gamma^2 = diameter^2 / 8 at the start, ending at the median
/// Euclidean 1-NN distance.
pub fn default_gamma(data: &Dataset) -> Result<Schedule> {
    if data.len() < 2 {
        return Ok(Schedule::constant(1.0));
    }
    let sorted = sorted_neighbor_distances(data, &DistanceSpec::SquaredEuclidean)?;
    let diameter_sq = sorted
        .rows()
        .into_iter()
        .map(|r| r[r.len() - 1])
        .fold(0.0, f64::max);
    let mut nn: Vec<f64> = sorted.column(0).iter().map(|d| d.sqrt()).collect();
    nn.sort_by(f64::total_cmp);
    let median_nn = if nn.len() % 2 == 1 {
        nn[nn.len() / 2]
    } else {
        0.5 * (nn[nn.len() / 2 - 1] + nn[nn.len() / 2])
    };
    Ok(Schedule {
        start: (diameter_sq / 8.0).sqrt().max(BANDWIDTH_FLOOR),
        end: median_nn.max(BANDWIDTH_FLOOR),
    })
}
