//! Repeated-subsample evaluation: each run draws a subsample, trains a
//! method on it, embeds the subsample and scores the embedding.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::index::sample;
use rayon::prelude::*;

use crate::analysis::metrics::{
    max_neighbors, pairwise_distances, sammon_error, spearman_rho, trust_continuity_range,
};
use crate::analysis::pca::pca_embed;
use crate::batch::{batch_xim_train, median_xim_train, BatchOptions, MedianOptions};
use crate::config::{Method, TrainConfig};
use crate::data::{Dataset, DissimilarityMatrix, DistanceSpec};
use crate::error::{Result, XimError};
use crate::kernels::KernelSpec;
use crate::lattice::{Lattice, Topology};
use crate::mapping::{embed_dataset, embed_dissimilarities, ReferencePairs, ShepardOptions};
use crate::online::train;
use crate::rng::{stream, Stream};

/// Rectangular or hexagonal grid shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub topology: Topology,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rows: 10,
            cols: 10,
            topology: Topology::Rectangular,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Lattice> {
        Lattice::grid(self.rows, self.cols, self.topology)
    }
}

/// Everything needed to train one method and embed the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    /// Row label in reports.
    pub name: String,
    pub train: TrainConfig,
    pub grid: GridSpec,
    pub batch: BatchOptions,
    pub median: MedianOptions,
    pub shepard: ShepardOptions,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        MethodSpec {
            name: method.to_string(),
            train: TrainConfig {
                method,
                ..Default::default()
            },
            grid: GridSpec::default(),
            batch: BatchOptions::default(),
            median: MedianOptions::default(),
            shepard: ShepardOptions::default(),
        }
    }

    pub fn method(&self) -> Method {
        self.train.method
    }
}

/// Trains `spec` on `data` with the given seed and returns the embedding
/// of `data`.
pub fn fit_embed(data: &Dataset, spec: &MethodSpec, seed: u64) -> Result<Array2<f64>> {
    let config = TrainConfig {
        seed,
        ..spec.train.clone()
    };
    let method = config.method;
    if method == Method::Pca {
        let d = 2.min(data.dim()).min(data.len().saturating_sub(1));
        return Ok(pca_embed(data, d)?.coords);
    }
    let lattice = spec.grid.build()?;
    let dist = DistanceSpec::SquaredEuclidean;
    let protos = match method {
        Method::BatchXim => batch_xim_train(data, &lattice, &config, &spec.batch)?.prototypes,
        Method::MedianXim => {
            let diss = DissimilarityMatrix::squared_euclidean(data);
            let schedules = config.resolve(data, &lattice)?;
            let h = KernelSpec::new(config.ordering_family(), schedules.sigma.end)?;
            let g = KernelSpec::gaussian(schedules.gamma.end)?;
            let opts = MedianOptions { seed, ..spec.median };
            let state = median_xim_train(&diss, &lattice, &h, &g, &opts)?;
            return embed_dissimilarities(diss.values(), &state.medians, lattice.nodes(), &spec.shepard);
        }
        _ => train(data, &lattice, &config)?.prototypes,
    };
    let pairs = ReferencePairs::from_model(&protos, &lattice)?;
    embed_dataset(data, &pairs, &spec.shepard, &dist)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Sammon,
    Spearman,
    Trustworthiness,
    Continuity,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Sammon, Metric::Spearman, Metric::Trustworthiness, Metric::Continuity];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Sammon => "sammon",
            Metric::Spearman => "spearman",
            Metric::Trustworthiness => "trustworthiness",
            Metric::Continuity => "continuity",
        }
    }

    /// Sammon stress is minimized; the rest are maximized.
    pub fn higher_is_better(&self) -> bool {
        !matches!(self, Metric::Sammon)
    }
}

/// The four measures of one embedding, T and C averaged over the k range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunScores {
    pub sammon: f64,
    pub spearman: f64,
    pub trustworthiness: f64,
    pub continuity: f64,
}

impl RunScores {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Sammon => self.sammon,
            Metric::Spearman => self.spearman,
            Metric::Trustworthiness => self.trustworthiness,
            Metric::Continuity => self.continuity,
        }
    }
}

/// Scores an embedding of `data`. `k_hi` must already be valid for N.
pub fn score_embedding(data: &Dataset, coords: &Array2<f64>, k_lo: usize, k_hi: usize) -> Result<RunScores> {
    let high = pairwise_distances(data.points());
    let low = pairwise_distances(coords.view());
    let tc = trust_continuity_range(data.points(), coords.view(), k_lo..=k_hi)?;
    let count = tc.len() as f64;
    Ok(RunScores {
        sammon: sammon_error(&high, &low)?,
        spearman: spearman_rho(&high, &low)?,
        trustworthiness: tc.iter().map(|r| r.1).sum::<f64>() / count,
        continuity: tc.iter().map(|r| r.2).sum::<f64>() / count,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOptions {
    pub runs: usize,
    pub fraction: f64,
    pub k_lo: usize,
    pub k_hi: usize,
    pub seed: u64,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions {
            runs: 10,
            fraction: 0.95,
            k_lo: 1,
            k_hi: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation (divisor = runs).
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub method: String,
    pub runs: Vec<RunScores>,
    pub subsample_size: usize,
    pub fraction: f64,
    /// k range actually used, after clipping.
    pub k_lo: usize,
    pub k_hi: usize,
    pub warnings: Vec<String>,
}

impl QualityReport {
    pub fn summary(&self, m: Metric) -> Summary {
        let v: Vec<f64> = self.runs.iter().map(|r| r.get(m)).collect();
        Summary::of(&v)
    }
}

pub fn subsample_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n)
}

/// Sorted subsample indices for run `run`.
pub fn subsample_indices(n: usize, fraction: f64, seed: u64, run: usize) -> Vec<usize> {
    let size = subsample_size(n, fraction);
    if size == n {
        return (0..n).collect();
    }
    let mut rng = stream(seed.wrapping_add(run as u64), Stream::Subsample);
    let mut idx = sample(&mut rng, n, size).into_vec();
    idx.sort_unstable();
    idx
}

/// Runs are independent and evaluated in parallel; run r uses seed + r for
/// both the subsample and the training.
pub fn evaluate_protocol(data: &Dataset, spec: &MethodSpec, options: &ProtocolOptions) -> Result<QualityReport> {
    if options.runs < 1 {
        return Err(XimError::config("runs must be at least 1"));
    }
    if !(options.fraction > 0.0 && options.fraction <= 1.0) {
        return Err(XimError::config(format!("subsample fraction must lie in (0, 1], got {}", options.fraction)));
    }
    if options.k_lo < 1 || options.k_lo > options.k_hi {
        return Err(XimError::config(format!("invalid neighbor range {}..{}", options.k_lo, options.k_hi)));
    }
    let size = subsample_size(data.len(), options.fraction);
    let limit = max_neighbors(size);
    let mut warnings = Vec::new();
    let k_hi = if options.k_hi > limit {
        warnings.push(format!("k range clipped to {}..{} for subsamples of {size}", options.k_lo, limit));
        limit
    } else {
        options.k_hi
    };
    if options.k_lo > k_hi {
        return Err(XimError::config(format!("subsample of {size} points too small for k >= {}", options.k_lo)));
    }
    let runs: Vec<RunScores> = (0..options.runs)
        .into_par_iter()
        .map(|r| {
            let sub = data.select(&subsample_indices(data.len(), options.fraction, options.seed, r));
            let coords = fit_embed(&sub, spec, options.seed.wrapping_add(r as u64))?;
            score_embedding(&sub, &coords, options.k_lo, k_hi)
        })
        .collect::<Result<_>>()?;
    Ok(QualityReport {
        method: spec.name.clone(),
        runs,
        subsample_size: size,
        fraction: options.fraction,
        k_lo: options.k_lo,
        k_hi,
        warnings,
    })
}

/// For each metric, the index of the report with the best mean.
pub fn best_per_metric(reports: &[QualityReport]) -> Vec<(Metric, usize)> {
    Metric::ALL
        .iter()
        .filter_map(|&m| {
            let key = |r: &QualityReport| {
                let v = r.summary(m).mean;
                if m.higher_is_better() { v } else { -v }
            };
            (0..reports.len())
                .max_by(|&a, &b| key(&reports[a]).total_cmp(&key(&reports[b])).then(b.cmp(&a)))
                .map(|i| (m, i))
        })
        .collect()
}

/// Human-readable table, one row per method, cells "mean (std)".
pub fn format_report_table(reports: &[QualityReport]) -> String {
    let mut out = String::new();
    if let Some(first) = reports.first() {
        let _ = writeln!(
            out,
            "# runs={} subsample={} fraction={} k={}..{} std=population",
            first.runs.len(),
            first.subsample_size,
            first.fraction,
            first.k_lo,
            first.k_hi
        );
    }
    let width = reports.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let _ = write!(out, "{:<width$}", "method");
    for m in Metric::ALL {
        let _ = write!(out, "  {:>19}", m.as_str());
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<width$}", r.method);
        for m in Metric::ALL {
            let s = r.summary(m);
            let _ = write!(out, "  {:>19}", format!("{:.4} ({:.4})", s.mean, s.std));
        }
        out.push('\n');
    }
    for r in reports {
        for w in &r.warnings {
            let _ = writeln!(out, "# warning ({}): {w}", r.method);
        }
    }
    out
}

/// One `method.metric.mean=value` / `.std=value` line per cell, full precision.
pub fn format_report_machine(reports: &[QualityReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(out, "{}.runs={}", r.method, r.runs.len());
        let _ = writeln!(out, "{}.subsample={}", r.method, r.subsample_size);
        let _ = writeln!(out, "{}.k_lo={}", r.method, r.k_lo);
        let _ = writeln!(out, "{}.k_hi={}", r.method, r.k_hi);
        for m in Metric::ALL {
            let s = r.summary(m);
            let _ = writeln!(out, "{}.{}.mean={}", r.method, m.as_str(), s.mean);
            let _ = writeln!(out, "{}.{}.std={}", r.method, m.as_str(), s.std);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Schedule;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        Dataset::new(Array2::from_shape_fn((n, 5), |(i, c)| {
            (if c == 0 { (i % 2) as f64 * 5.0 } else { 0.0 }) + rng.random_range(-1.0..1.0)
        }))
        .unwrap()
    }

    fn quick(method: Method) -> MethodSpec {
        let mut s = MethodSpec::new(method);
        s.grid = GridSpec { rows: 4, cols: 4, topology: Topology::Rectangular };
        s.train.t_max = 400;
        s.batch.max_iters = 30;
        s.median.max_iters = 10;
        s
    }

    #[test]
    fn single_run_has_zero_std() {
        let data = toy(30);
        let opts = ProtocolOptions { runs: 1, k_hi: 10, ..Default::default() };
        for m in [Method::Som, Method::CXim, Method::Pca] {
            let r = evaluate_protocol(&data, &quick(m), &opts).unwrap();
            for metric in Metric::ALL {
                assert_eq!(r.summary(metric).std, 0.0);
            }
        }
    }

    #[test]
    fn deterministic_method_on_full_data_has_zero_std() {
        let data = toy(30);
        let opts = ProtocolOptions { runs: 3, fraction: 1.0, k_hi: 10, ..Default::default() };
        let r = evaluate_protocol(&data, &quick(Method::Pca), &opts).unwrap();
        for metric in Metric::ALL {
            assert_eq!(r.summary(metric).std, 0.0);
        }
    }

    #[test]
    fn k_range_is_clipped_with_warning() {
        let data = toy(30);
        let opts = ProtocolOptions { runs: 2, ..Default::default() };
        let r = evaluate_protocol(&data, &quick(Method::Pca), &opts).unwrap();
        assert_eq!(r.subsample_size, 29);
        assert_eq!(r.k_hi, 14);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn every_method_evaluates() {
        let data = toy(24);
        let opts = ProtocolOptions { runs: 2, k_hi: 5, ..Default::default() };
        let mut reports = Vec::new();
        for m in Method::ALL {
            let mut spec = quick(m);
            if m == Method::BatchXim {
                spec.train.epsilon = Schedule::constant(0.5);
            }
            reports.push(evaluate_protocol(&data, &spec, &opts).unwrap());
        }
        let table = format_report_table(&reports);
        assert_eq!(table.lines().count(), 2 + Method::ALL.len());
        let machine = format_report_machine(&reports);
        assert_eq!(machine.lines().count(), Method::ALL.len() * 12);
        assert_eq!(best_per_metric(&reports).len(), 4);
    }

    #[test]
    fn population_std() {
        let s = Summary::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }

    #[test]
    fn subsamples_are_seeded() {
        assert_eq!(subsample_size(147, 0.95), 140);
        let a = subsample_indices(147, 0.95, 7, 2);
        assert_eq!(a, subsample_indices(147, 0.95, 7, 2));
        assert_ne!(a, subsample_indices(147, 0.95, 7, 3));
        assert_eq!(a, subsample_indices(147, 0.95, 8, 1));
    }
}
