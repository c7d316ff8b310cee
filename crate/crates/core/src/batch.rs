//! Batch training: the fixed-point iteration for vectorial data, its
//! Voronoi-aggregated form, and median XIM for dissimilarity data.
//!
//! With f_ij = (1 - eta) h(d_O(r*(x_i), r_j)) - eta g(d_E(x_i, w_j)) the
//! stationary state of the online rule satisfies sum_i f_ij (x_i - w_j) = 0,
//! i.e. w_j is the f-weighted mean of the data.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::Rng;

use crate::assignment::{argmin, gkl_from_g, winner_from_distances, BestMatchRule};
use crate::config::TrainConfig;
use crate::data::{squared_euclidean, Dataset, DissimilarityMatrix};
use crate::error::{check_shape, Result, XimError};
use crate::kernels::{ExplorationKernel, KernelSpec};
use crate::lattice::Lattice;
use crate::online::{AnnealSchedule, GammaSource};
use crate::prototypes::{initialize, PrototypeSet};
use crate::rng::{stream, Stream};

/// |sum_i f_ij| below this leaves w_j in place.
pub const DENOMINATOR_GUARD: f64 = 1e-9;
pub const DEFAULT_DAMPING: f64 = 0.5;
pub const DEFAULT_MEDIAN_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchState {
    pub prototypes: PrototypeSet,
    pub iteration: usize,
    /// max_j ||w_j(new) - w_j(old)|| of the last (damped) update.
    pub residual: f64,
    /// max_j ||target_j - w_j(old)||, the undamped move.
    pub target_gap: f64,
    /// sum_i f_ij per node.
    pub denominators: Vec<f64>,
    /// Nodes left unchanged by the denominator guard.
    pub degenerate: Vec<bool>,
    pub winners: Vec<usize>,
}

impl BatchState {
    pub fn new(prototypes: PrototypeSet) -> Self {
        let m = prototypes.len();
        BatchState {
            prototypes,
            iteration: 0,
            residual: f64::INFINITY,
            target_gap: f64::INFINITY,
            denominators: vec![0.0; m],
            degenerate: vec![false; m],
            winners: Vec::new(),
        }
    }
}

/// Kernels and weights of one batch iteration.
#[derive(Debug, Clone)]
pub struct BatchKernels<'a> {
    pub h: KernelSpec,
    pub g: &'a ExplorationKernel,
    pub eta: f64,
    pub rule: BestMatchRule,
    /// Fraction of the move toward the weighted mean applied, in (0, 1].
    pub damping: f64,
}

fn check_batch_inputs(data: &Dataset, protos: &PrototypeSet, lattice: &Lattice, k: &BatchKernels<'_>) -> Result<()> {
    check_shape("data dimension", protos.dim(), data.dim())?;
    protos.check_lattice(lattice)?;
    k.g.check_len(data.len())?;
    if !(k.damping > 0.0 && k.damping <= 1.0) {
        return Err(XimError::config(format!("damping must lie in (0, 1], got {}", k.damping)));
    }
    if !(0.0..=1.0).contains(&k.eta) {
        return Err(XimError::config(format!("eta must lie in [0, 1], got {}", k.eta)));
    }
    Ok(())
}

/// N x M squared distances and the winner of every sample.
fn distances_and_winners(
    data: &Dataset,
    protos: &PrototypeSet,
    lattice: &Lattice,
    k: &BatchKernels<'_>,
) -> Result<(Array2<f64>, Vec<usize>)> {
    let (n, m) = (data.len(), protos.len());
    let mut d_e = Array2::zeros((n, m));
    let mut winners = Vec::with_capacity(n);
    for i in 0..n {
        let x = data.row(i);
        let mut row = d_e.row_mut(i);
        for j in 0..m {
            row[j] = squared_euclidean(x, protos.row(j));
        }
        let g = k.g.for_sample(i);
        winners.push(winner_from_distances(k.rule, row.as_slice().expect("row-major"), lattice, &k.h, &g)?);
    }
    Ok((d_e, winners))
}

/// f_ij = (1 - eta) h*j - eta g_j.
pub fn cooperativity(
    data: &Dataset,
    protos: &PrototypeSet,
    lattice: &Lattice,
    k: &BatchKernels<'_>,
) -> Result<(Array2<f64>, Vec<usize>)> {
    check_batch_inputs(data, protos, lattice, k)?;
    let (d_e, winners) = distances_and_winners(data, protos, lattice, k)?;
    let f = Array2::from_shape_fn(d_e.dim(), |(i, j)| {
        (1.0 - k.eta) * k.h.value(lattice.distance(winners[i], j)) - k.eta * k.g.for_sample(i).value(d_e[[i, j]])
    });
    Ok((f, winners))
}

/// Applies guarded, damped weighted-mean targets to the state.
fn apply_targets(
    state: &BatchState,
    numerators: Array2<f64>,
    denominators: Vec<f64>,
    winners: Vec<usize>,
    damping: f64,
) -> Result<BatchState> {
    let mut protos = state.prototypes.clone();
    let mut degenerate = vec![false; protos.len()];
    let (mut residual, mut gap) = (0.0f64, 0.0f64);
    for j in 0..protos.len() {
        let den = denominators[j];
        if den.abs() < DENOMINATOR_GUARD {
            degenerate[j] = true;
            continue;
        }
        let mut w = protos.row_mut(j);
        let (mut moved, mut target_dist) = (0.0, 0.0);
        for (c, wc) in w.iter_mut().enumerate() {
            let target = numerators[[j, c]] / den;
            let delta = target - *wc;
            let new = *wc + damping * delta;
            moved += (new - *wc) * (new - *wc);
            target_dist += delta * delta;
            *wc = new;
        }
        residual = residual.max(moved.sqrt());
        gap = gap.max(target_dist.sqrt());
    }
    if !protos.is_finite() {
        return Err(XimError::Degenerate("batch update produced non-finite prototypes".into()));
    }
    Ok(BatchState {
        prototypes: protos,
        iteration: state.iteration + 1,
        residual,
        target_gap: gap,
        denominators,
        degenerate,
        winners,
    })
}

/// One damped fixed-point iteration w_j <- sum_i f_ij x_i / sum_i f_ij.
pub fn batch_xim_iterate(
    data: &Dataset,
    state: &BatchState,
    lattice: &Lattice,
    k: &BatchKernels<'_>,
) -> Result<BatchState> {
    let (f, winners) = cooperativity(data, &state.prototypes, lattice, k)?;
    let numerators = f.t().dot(&data.points());
    let denominators = f.sum_axis(ndarray::Axis(0)).to_vec();
    apply_targets(state, numerators, denominators, winners, k.damping)
}

/// Same update as [`batch_xim_iterate`], with the h part of the sums
/// aggregated per Voronoi cell: sum_i h(r*(x_i), r_j) x_i equals
/// sum_k h(r_k, r_j) S_k where S_k sums the samples won by node k.
pub fn voronoi_batch_step(
    data: &Dataset,
    state: &BatchState,
    lattice: &Lattice,
    k: &BatchKernels<'_>,
) -> Result<BatchState> {
    check_batch_inputs(data, &state.prototypes, lattice, k)?;
    let protos = &state.prototypes;
    let (d_e, winners) = distances_and_winners(data, protos, lattice, k)?;
    let (n, m, dim) = (data.len(), protos.len(), data.dim());
    let mut cell_sum = Array2::<f64>::zeros((m, dim));
    let mut cell_count = vec![0usize; m];
    for (i, &w) in winners.iter().enumerate() {
        cell_count[w] += 1;
        cell_sum.row_mut(w).scaled_add(1.0, &data.row(i));
    }
    let occupied: Vec<usize> = (0..m).filter(|&c| cell_count[c] > 0).collect();
    let mut numerators = Array2::<f64>::zeros((m, dim));
    let mut denominators = vec![0.0; m];
    for j in 0..m {
        let mut num = numerators.row_mut(j);
        let mut den = 0.0;
        for &c in &occupied {
            let hv = (1.0 - k.eta) * k.h.value(lattice.distance(c, j));
            num.scaled_add(hv, &cell_sum.row(c));
            den += hv * cell_count[c] as f64;
        }
        for i in 0..n {
            let gv = k.eta * k.g.for_sample(i).value(d_e[[i, j]]);
            num.scaled_add(-gv, &data.row(i));
            den -= gv;
        }
        denominators[j] = den;
    }
    apply_targets(state, numerators, denominators, winners, k.damping)
}

/// Empirical stationarity residual max_j ||sum_i f_ij (x_i - w_j)|| / N.
pub fn stationarity_residual(
    data: &Dataset,
    protos: &PrototypeSet,
    lattice: &Lattice,
    k: &BatchKernels<'_>,
) -> Result<f64> {
    let (f, _) = cooperativity(data, protos, lattice, k)?;
    let n = data.len() as f64;
    let mut worst = 0.0f64;
    for j in 0..protos.len() {
        let w = protos.row(j);
        let mut acc = Array1::<f64>::zeros(data.dim());
        for i in 0..data.len() {
            let fij = f[[i, j]];
            for (c, a) in acc.iter_mut().enumerate() {
                *a += fij * (data.row(i)[c] - w[c]);
            }
        }
        worst = worst.max(acc.dot(&acc).sqrt() / n);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchOptions {
    pub damping: f64,
    /// Converged once the undamped move falls below `tol` after annealing.
    pub tol: f64,
    pub max_iters: usize,
    /// Iterations over which sigma and gamma decay; default max_iters / 2.
    pub anneal_iters: Option<usize>,
    pub voronoi: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            damping: DEFAULT_DAMPING,
            tol: 1e-9,
            max_iters: 500,
            anneal_iters: None,
            voronoi: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub target_gap: f64,
    pub stationarity: f64,
    pub final_sigma: f64,
    pub final_g: ExplorationKernel,
    pub degenerate_nodes: usize,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub prototypes: PrototypeSet,
    pub report: BatchReport,
}

pub fn batch_xim_train(
    data: &Dataset,
    lattice: &Lattice,
    config: &TrainConfig,
    options: &BatchOptions,
) -> Result<BatchOutcome> {
    let protos = initialize(data, lattice, config.init, config.seed)?;
    batch_xim_train_from(data, lattice, config, options, protos)
}

pub fn batch_xim_train_from(
    data: &Dataset,
    lattice: &Lattice,
    config: &TrainConfig,
    options: &BatchOptions,
    protos: PrototypeSet,
) -> Result<BatchOutcome> {
    if !(options.tol > 0.0) {
        return Err(XimError::config("tolerance must be positive"));
    }
    check_shape("prototype dimension", data.dim(), protos.dim())?;
    protos.check_lattice(lattice)?;
    let schedules = config.resolve(data, lattice)?;
    let anneal_iters = options
        .anneal_iters
        .unwrap_or(options.max_iters / 2)
        .min(options.max_iters.saturating_sub(1))
        .max(1);
    let sigma_s = AnnealSchedule::new(schedules.sigma, anneal_iters);
    let gamma_s = AnnealSchedule::new(schedules.gamma, anneal_iters);
    let constant = schedules.sigma.start == schedules.sigma.end
        && schedules.gamma.start == schedules.gamma.end
        && !matches!(config.bandwidth, crate::kernels::BandwidthPolicy::KnnBall { .. });
    let source = GammaSource::new(config, data, anneal_iters)?;
    let n = data.len();
    let family = config.ordering_family();

    let mut state = BatchState::new(protos);
    let mut converged = false;
    let mut h = KernelSpec::new(family, sigma_s.at(0))?;
    let mut g = source.kernel_at(0, gamma_s.at(0), n.max(2))?;
    for t in 0..options.max_iters {
        h = KernelSpec::new(family, sigma_s.at(t))?;
        g = source.kernel_at(t, gamma_s.at(t), n.max(2))?;
        let k = BatchKernels {
            h,
            g: &g,
            eta: config.eta,
            rule: config.best_match,
            damping: options.damping,
        };
        state = if options.voronoi {
            voronoi_batch_step(data, &state, lattice, &k)?
        } else {
            batch_xim_iterate(data, &state, lattice, &k)?
        };
        if (constant || t >= anneal_iters) && state.target_gap < options.tol {
            converged = true;
            break;
        }
    }
    let k = BatchKernels {
        h,
        g: &g,
        eta: config.eta,
        rule: config.best_match,
        damping: options.damping,
    };
    let stationarity = stationarity_residual(data, &state.prototypes, lattice, &k)?;
    Ok(BatchOutcome {
        report: BatchReport {
            converged,
            iterations: state.iteration,
            residual: if state.iteration == 0 { 0.0 } else { state.residual },
            target_gap: state.target_gap,
            stationarity,
            final_sigma: h.bandwidth(),
            final_g: g,
            degenerate_nodes: state.degenerate.iter().filter(|d| **d).count(),
        },
        prototypes: state.prototypes,
    })
}

/// Which items may become the median of node j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Candidates {
    /// Every data item.
    #[default]
    All,
    /// Only items currently won by node j; an empty cell keeps its median.
    Voronoi,
}

impl fmt::Display for Candidates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Candidates::All => "all",
            Candidates::Voronoi => "voronoi",
        })
    }
}

impl FromStr for Candidates {
    type Err = XimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Candidates::All),
            "voronoi" => Ok(Candidates::Voronoi),
            other => Err(XimError::config(format!("unknown candidate set {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianOptions {
    /// Gkl or MinDistance on the dissimilarities to the current medians.
    pub rule: BestMatchRule,
    /// 0.5 gives f proportional to h - g.
    pub eta: f64,
    pub max_iters: usize,
    pub candidates: Candidates,
    pub seed: u64,
}

impl Default for MedianOptions {
    fn default() -> Self {
        MedianOptions {
            rule: BestMatchRule::Gkl,
            eta: 0.5,
            max_iters: DEFAULT_MEDIAN_MAX_ITERS,
            candidates: Candidates::All,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedianState {
    /// Data item chosen as the generalized median of each node.
    pub medians: Vec<usize>,
    /// sum_i f(i, j) diss[i][median_j] per node.
    pub costs: Vec<f64>,
    /// Winners used in the last median update.
    pub winners: Vec<usize>,
    /// Medians whose g values entered the last update.
    pub prev_medians: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

/// Winner of every item given the current medians.
pub fn median_winners(
    diss: &DissimilarityMatrix,
    medians: &[usize],
    lattice: &Lattice,
    h: &KernelSpec,
    g: &KernelSpec,
    rule: BestMatchRule,
) -> Result<Vec<usize>> {
    (0..diss.len())
        .map(|i| {
            let d: Vec<f64> = medians.iter().map(|&c| diss.get(i, c)).collect();
            match rule {
                BestMatchRule::MinDistance => Ok(argmin(&d)),
                BestMatchRule::Gkl => {
                    let gv: Vec<f64> = d.iter().map(|v| g.value(*v)).collect();
                    Ok(gkl_from_g(&gv, lattice, h)?.winner)
                }
                BestMatchRule::Heskes => Err(XimError::Unsupported(
                    "median XIM assigns by gkl or min_distance".into(),
                )),
            }
        })
        .collect()
}

/// f(i, j) = (1 - eta) h(d_O(r*(i), r_j)) - eta g(diss[i][median_j]).
pub fn median_weights(
    diss: &DissimilarityMatrix,
    medians: &[usize],
    winners: &[usize],
    lattice: &Lattice,
    h: &KernelSpec,
    g: &KernelSpec,
    eta: f64,
) -> Array2<f64> {
    Array2::from_shape_fn((diss.len(), medians.len()), |(i, j)| {
        (1.0 - eta) * h.value(lattice.distance(winners[i], j)) - eta * g.value(diss.get(i, medians[j]))
    })
}

/// argmin over candidates c of sum_i f(i, j) diss[i][c]; returns (item, cost).
fn weighted_median(diss: &DissimilarityMatrix, f: &Array2<f64>, j: usize, candidates: &[usize]) -> (usize, f64) {
    let mut best = (candidates[0], f64::INFINITY);
    for &c in candidates {
        let cost: f64 = (0..diss.len()).map(|i| f[[i, j]] * diss.get(i, c)).sum();
        if cost < best.1 {
            best = (c, cost);
        }
    }
    best
}

pub fn median_xim_train(
    diss: &DissimilarityMatrix,
    lattice: &Lattice,
    h: &KernelSpec,
    g: &KernelSpec,
    options: &MedianOptions,
) -> Result<MedianState> {
    let n = diss.len();
    if n == 0 {
        return Err(XimError::config("empty dissimilarity matrix"));
    }
    if !(0.0..=1.0).contains(&options.eta) {
        return Err(XimError::config("eta must lie in [0, 1]"));
    }
    let m = lattice.len();
    let mut rng = stream(options.seed, Stream::Medians);
    let mut medians: Vec<usize> = if n >= m {
        sample(&mut rng, n, m).into_vec()
    } else {
        (0..m).map(|_| rng.random_range(0..n)).collect()
    };
    let all: Vec<usize> = (0..n).collect();
    let mut state = MedianState {
        costs: vec![0.0; m],
        winners: Vec::new(),
        prev_medians: medians.clone(),
        medians: medians.clone(),
        iterations: 0,
        converged: false,
    };
    let mut last_winners: Option<Vec<usize>> = None;
    for _ in 0..options.max_iters {
        let winners = median_winners(diss, &medians, lattice, h, g, options.rule)?;
        if last_winners.as_ref() == Some(&winners) {
            state.converged = true;
            break;
        }
        let f = median_weights(diss, &medians, &winners, lattice, h, g, options.eta);
        let mut next = medians.clone();
        let mut costs = vec![0.0; m];
        for j in 0..m {
            let cell: Vec<usize>;
            let cands: &[usize] = match options.candidates {
                Candidates::All => &all,
                Candidates::Voronoi => {
                    cell = (0..n).filter(|&i| winners[i] == j).collect();
                    if cell.is_empty() {
                        costs[j] = (0..n).map(|i| f[[i, j]] * diss.get(i, medians[j])).sum();
                        continue;
                    }
                    &cell
                }
            };
            let (c, cost) = weighted_median(diss, &f, j, cands);
            next[j] = c;
            costs[j] = cost;
        }
        state.prev_medians = std::mem::replace(&mut medians, next);
        state.medians = medians.clone();
        state.costs = costs;
        state.winners = winners.clone();
        state.iterations += 1;
        last_winners = Some(winners);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Schedule;
    use crate::kernels::KernelFamily;
    use crate::lattice::Topology;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kernels(g: &ExplorationKernel, eta: f64, damping: f64) -> BatchKernels<'_> {
        BatchKernels {
            h: KernelSpec::gaussian(1.0).unwrap(),
            g,
            eta,
            rule: BestMatchRule::MinDistance,
            damping,
        }
    }

    fn shared(gamma: f64) -> ExplorationKernel {
        ExplorationKernel::Shared(KernelSpec::gaussian(gamma).unwrap())
    }

    #[test]
    fn weighted_mean_examples() {
        let lattice = Lattice::explicit(array![[0.0], [100.0]]).unwrap();
        let g = shared(1.0);
        // node 1 never wins and sits far away: only node 0 matters
        let data = Dataset::new(array![[3.0, -1.0]]).unwrap();
        let s = BatchState::new(PrototypeSet::new(array![[0.0, 0.0], [50.0, 50.0]]).unwrap());
        let out = batch_xim_iterate(&data, &s, &lattice, &kernels(&g, 0.0, 1.0)).unwrap();
        assert_eq!(out.prototypes.row(0).to_vec(), vec![3.0, -1.0]);

        let data = Dataset::new(array![[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let s = BatchState::new(PrototypeSet::new(array![[1.0, 5.0], [50.0, 50.0]]).unwrap());
        let out = batch_xim_iterate(&data, &s, &lattice, &kernels(&g, 0.0, 1.0)).unwrap();
        assert_eq!(out.prototypes.row(0).to_vec(), vec![1.0, 0.0]);
        // node 1: h = 0 for both samples, f = 0, guarded
        assert!(out.degenerate[1]);
        assert_eq!(out.prototypes.row(1).to_vec(), vec![50.0, 50.0]);
    }

    #[test]
    fn cancelling_weights_are_guarded() {
        // x on w_0: h*0 = 1, g_0 = 1, eta = 0.5 -> f = 0
        let lattice = Lattice::explicit(array![[0.0], [100.0]]).unwrap();
        let g = shared(1.0);
        let data = Dataset::new(array![[1.0]]).unwrap();
        let s = BatchState::new(PrototypeSet::new(array![[1.0], [1e3]]).unwrap());
        let out = batch_xim_iterate(&data, &s, &lattice, &kernels(&g, 0.5, 0.5)).unwrap();
        assert!(out.degenerate[0]);
        assert_eq!(out.prototypes.row(0)[0], 1.0);
    }

    fn two_clusters(seed: u64, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset::new(Array2::from_shape_fn((n, 2), |(i, c)| {
            let centre = if i < n / 2 { -2.0 } else { 2.0 };
            (if c == 0 { centre } else { 0.0 }) + rng.random_range(-0.5..0.5)
        }))
        .unwrap()
    }

    #[test]
    fn voronoi_matches_plain_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for inst in 0..10 {
            let data = two_clusters(inst, 15 + inst as usize);
            let lattice = Lattice::grid(2, 3, Topology::Rectangular).unwrap();
            let p = PrototypeSet::new(Array2::from_shape_fn((6, 2), |_| rng.random_range(-3.0..3.0))).unwrap();
            let g = shared(rng.random_range(0.3..2.0));
            let k = BatchKernels { h: KernelSpec::new(KernelFamily::CauchyLorentz, 0.8).unwrap(), g: &g, eta: 0.3, rule: BestMatchRule::Gkl, damping: 0.5 };
            let s = BatchState::new(p);
            let a = batch_xim_iterate(&data, &s, &lattice, &k).unwrap();
            let b = voronoi_batch_step(&data, &s, &lattice, &k).unwrap();
            for (x, y) in a.prototypes.matrix().iter().zip(b.prototypes.matrix()) {
                assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
            }
            assert_eq!(a.degenerate, b.degenerate);
        }
        // all samples in one cell
        let data = Dataset::new(array![[0.0], [0.1], [0.2]]).unwrap();
        let lattice = Lattice::grid(1, 3, Topology::Rectangular).unwrap();
        let g = shared(0.5);
        let k = kernels(&g, 0.3, 1.0);
        let s = BatchState::new(PrototypeSet::new(array![[0.1], [5.0], [9.0]]).unwrap());
        let a = batch_xim_iterate(&data, &s, &lattice, &k).unwrap();
        let b = voronoi_batch_step(&data, &s, &lattice, &k).unwrap();
        for (x, y) in a.prototypes.matrix().iter().zip(b.prototypes.matrix()) {
            assert!((x - y).abs() <= 1e-10);
        }
    }

    fn toy_config() -> TrainConfig {
        TrainConfig {
            method: crate::config::Method::BatchXim,
            sigma: Some(Schedule::constant(0.7)),
            gamma: Some(Schedule::constant(1.0)),
            eta: 0.3,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn converges_to_stationary_point() {
        let data = two_clusters(7, 20);
        let lattice = Lattice::grid(2, 2, Topology::Rectangular).unwrap();
        let opts = BatchOptions { max_iters: 2000, ..Default::default() };
        let out = batch_xim_train(&data, &lattice, &toy_config(), &opts).unwrap();
        assert!(out.report.converged, "{:?}", out.report);
        assert!(out.report.stationarity < 1e-6);

        let g = shared(1.0);
        let k = BatchKernels { h: KernelSpec::gaussian(0.7).unwrap(), g: &g, eta: 0.3, rule: BestMatchRule::MinDistance, damping: 1.0 };
        // one undamped step moves nothing by more than tol
        let s = batch_xim_iterate(&data, &BatchState::new(out.prototypes.clone()), &lattice, &k).unwrap();
        assert!(s.residual < opts.tol);
        let direct = stationarity_residual(&data, &out.prototypes, &lattice, &k).unwrap();
        assert_eq!(direct, out.report.stationarity);

        // random prototypes are far from stationary
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let random = PrototypeSet::new(Array2::from_shape_fn((4, 2), |_| rng.random_range(-3.0..3.0))).unwrap();
        assert!(stationarity_residual(&data, &random, &lattice, &k).unwrap() > 1e3 * 1e-6);

        // restarting at the fixed point stops after one iteration
        let again = batch_xim_train_from(&data, &lattice, &toy_config(), &opts, out.prototypes.clone()).unwrap();
        assert!(again.report.converged);
        assert_eq!(again.report.iterations, 1);
    }

    #[test]
    fn zero_iterations_returns_initial() {
        let data = two_clusters(7, 10);
        let lattice = Lattice::grid(2, 2, Topology::Rectangular).unwrap();
        let opts = BatchOptions { max_iters: 0, ..Default::default() };
        let out = batch_xim_train(&data, &lattice, &toy_config(), &opts).unwrap();
        assert!(!out.report.converged);
        assert_eq!(out.prototypes, initialize(&data, &lattice, Default::default(), 3).unwrap());
    }

    #[test]
    fn median_examples() {
        let lattice = Lattice::grid(1, 2, Topology::Rectangular).unwrap();
        let h = KernelSpec::gaussian(1.0).unwrap();
        let g = KernelSpec::gaussian(1.0).unwrap();
        let diss = DissimilarityMatrix::new(array![[0.0]]).unwrap();
        let s = median_xim_train(&diss, &lattice, &h, &g, &MedianOptions::default()).unwrap();
        assert_eq!(s.medians, vec![0, 0]);

        // all f = 1: column sums (5, 3, 6) pick item 1
        let diss = DissimilarityMatrix::new(array![[0.0, 1.0, 2.0], [2.0, 0.0, 4.0], [3.0, 2.0, 0.0]]).unwrap();
        let f = Array2::from_elem((3, 1), 1.0);
        assert_eq!(weighted_median(&diss, &f, 0, &[0, 1, 2]), (1, 3.0));
    }

    #[test]
    fn medians_are_brute_force_argmins() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for inst in 0..10u64 {
            let n = rng.random_range(5..=30);
            let data = Dataset::new(Array2::from_shape_fn((n, 3), |_| rng.random_range(-2.0..2.0))).unwrap();
            let diss = DissimilarityMatrix::squared_euclidean(&data);
            let lattice = Lattice::grid(2, 2, Topology::Rectangular).unwrap();
            let h = KernelSpec::new(KernelFamily::CauchyLorentz, 1.0).unwrap();
            let g = KernelSpec::gaussian(1.5).unwrap();
            let opts = MedianOptions { seed: inst, ..Default::default() };
            let s = median_xim_train(&diss, &lattice, &h, &g, &opts).unwrap();
            for j in 0..4 {
                let mut best = (0, f64::INFINITY);
                for c in 0..n {
                    let mut cost = 0.0;
                    for i in 0..n {
                        let hv = h.value(lattice.distance(s.winners[i], j));
                        let gv = g.value(diss.get(i, s.prev_medians[j]));
                        cost += (hv - gv) * diss.get(i, c);
                    }
                    if cost < best.1 {
                        best = (c, cost);
                    }
                }
                assert_eq!(s.medians[j], best.0, "instance {inst} node {j}");
            }
        }
    }

    #[test]
    fn voronoi_candidates_stay_in_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = Dataset::new(Array2::from_shape_fn((20, 2), |_| rng.random_range(-2.0..2.0))).unwrap();
        let diss = DissimilarityMatrix::squared_euclidean(&data);
        let lattice = Lattice::grid(2, 2, Topology::Rectangular).unwrap();
        let h = KernelSpec::gaussian(1.0).unwrap();
        let opts = MedianOptions { candidates: Candidates::Voronoi, rule: BestMatchRule::MinDistance, ..Default::default() };
        let s = median_xim_train(&diss, &lattice, &h, &h, &opts).unwrap();
        for j in 0..4 {
            if s.medians[j] != s.prev_medians[j] {
                assert_eq!(s.winners[s.medians[j]], j);
            }
        }
    }
}
