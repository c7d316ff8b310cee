//! Online training: one randomly drawn sample per iteration.
//!
//! The XIM step moves every prototype along (x - w_j) with coefficient
//! (attract * h - repel * g): prototypes whose node is close to the winner
//! on the lattice are pulled toward x, prototypes that are close to x in
//! the data space but far on the lattice are pushed away.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::assignment::winner_from_distances;
use crate::config::{ResolvedSchedules, Schedule, TrainConfig, Weighting};
use crate::data::{squared_euclidean, Dataset, DistanceSpec};
use crate::error::{check_shape, Result, XimError};
use crate::kernels::{
    bandwidths_perplexity, knn_from_sorted, sorted_neighbor_distances, BandwidthPolicy,
    ExplorationKernel, KernelFamily, KernelSpec, BANDWIDTH_FLOOR,
};
use crate::lattice::Lattice;
use crate::prototypes::{initialize, PrototypeSet};
use crate::rng::{stream, Stream};

/// Exponential decay from `start` at t = 0 to `end` at t = `t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub start: f64,
    pub end: f64,
    pub t_max: usize,
}

impl AnnealSchedule {
    pub fn new(schedule: Schedule, t_max: usize) -> Self {
        AnnealSchedule {
            start: schedule.start,
            end: schedule.end,
            t_max,
        }
    }

    /// Value at `t`, no range check.
    pub fn at(&self, t: usize) -> f64 {
        if t >= self.t_max {
            return self.end;
        }
        if t == 0 {
            return self.start;
        }
        let frac = t as f64 / self.t_max as f64;
        self.start * (self.end / self.start).powf(frac)
    }
}

pub fn anneal(sched: &AnnealSchedule, t: usize) -> Result<f64> {
    if t > sched.t_max {
        return Err(XimError::config(format!(
            "iteration {t} outside [0, {}]",
            sched.t_max
        )));
    }
    if !(sched.start > 0.0 && sched.end > 0.0) {
        return Err(XimError::config("anneal endpoints must be positive"));
    }
    Ok(sched.at(t))
}

/// Attraction/repulsion weights and overall scale of the XIM update
/// Delta w_j = -scale * (attract * h - repel * g) * (x - w_j).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceWeights {
    pub attract: f64,
    pub repel: f64,
    pub scale: f64,
}

impl ForceWeights {
    pub fn eta(eta: f64) -> Self {
        ForceWeights {
            attract: 1.0 - eta,
            repel: eta,
            scale: 1.0,
        }
    }

    pub fn unweighted() -> Self {
        ForceWeights {
            attract: 1.0,
            repel: 1.0,
            scale: 1.0,
        }
    }

    /// Multiplies in the 1/gamma^2 factor of the squared-Euclidean rule.
    pub fn with_prefactor(self, gamma: f64) -> Self {
        ForceWeights {
            scale: self.scale / (gamma * gamma),
            ..self
        }
    }

    pub fn from_config(config: &TrainConfig, gamma: f64) -> Self {
        let w = match config.weighting {
            Weighting::Eta => Self::eta(config.eta),
            Weighting::Unweighted => Self::unweighted(),
        };
        if config.retain_prefactor {
            w.with_prefactor(gamma)
        } else {
            w
        }
    }
}

/// Delta w for one prototype given its h and g values.
#[inline]
pub fn xim_update_vector(
    x: ArrayView1<'_, f64>,
    w: ArrayView1<'_, f64>,
    h: f64,
    g: f64,
    weights: ForceWeights,
) -> Array1<f64> {
    let coeff = weights.scale * (weights.attract * h - weights.repel * g);
    x.iter().zip(w.iter()).map(|(xi, wi)| -(coeff * (xi - wi))).collect()
}

fn check_step_inputs(
    x: ArrayView1<'_, f64>,
    protos: &PrototypeSet,
    lattice: &Lattice,
    winner: usize,
    epsilon: f64,
) -> Result<()> {
    check_shape("data vector dimension", protos.dim(), x.len())?;
    protos.check_lattice(lattice)?;
    if winner >= lattice.len() {
        return Err(XimError::config(format!(
            "winner {winner} out of range for {} nodes",
            lattice.len()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(XimError::config("learning rate must be positive"));
    }
    Ok(())
}

/// One XIM update of every prototype, w_j <- w_j - epsilon * Delta w_j.
#[allow(clippy::too_many_arguments)]
pub fn xim_step(
    protos: &mut PrototypeSet,
    x: ArrayView1<'_, f64>,
    lattice: &Lattice,
    winner: usize,
    h: &KernelSpec,
    g: &KernelSpec,
    epsilon: f64,
    weights: ForceWeights,
) -> Result<()> {
    check_step_inputs(x, protos, lattice, winner, epsilon)?;
    let d_e: Vec<f64> = (0..protos.len())
        .map(|j| squared_euclidean(x, protos.row(j)))
        .collect();
    apply_xim(protos, x, lattice, winner, h, g, epsilon, weights, &d_e);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn apply_xim(
    protos: &mut PrototypeSet,
    x: ArrayView1<'_, f64>,
    lattice: &Lattice,
    winner: usize,
    h: &KernelSpec,
    g: &KernelSpec,
    epsilon: f64,
    weights: ForceWeights,
    d_e: &[f64],
) {
    let from_winner = lattice.distances_from(winner);
    for j in 0..protos.len() {
        let hv = h.value(from_winner[j]);
        let gv = g.value(d_e[j]);
        // w <- w - eps * Delta w, Delta w = -coeff (x - w)
        let step = epsilon * weights.scale * (weights.attract * hv - weights.repel * gv);
        if step == 0.0 {
            continue;
        }
        let mut w = protos.row_mut(j);
        for (wi, xi) in w.iter_mut().zip(x.iter()) {
            *wi += step * (xi - *wi);
        }
    }
}

/// dD/dg for a divergence D(h || g), the factor that multiplies dg/dw in
/// the general learning rule.
pub trait DivergenceGradient: Send + Sync {
    fn name(&self) -> &str;
    fn gradient(&self, h: f64, g: f64) -> f64;
}

/// Generalized Kullback-Leibler divergence: dD/dg = 1 - h/g.
#[derive(Debug, Clone, Copy, Default)]
pub struct GeneralizedKl;

impl DivergenceGradient for GeneralizedKl {
    fn name(&self) -> &str {
        "gkl"
    }

    fn gradient(&self, h: f64, g: f64) -> f64 {
        1.0 - h / g
    }
}

/// Divergence gradient from a closure.
pub struct FnDivergence<F> {
    name: String,
    f: F,
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> FnDivergence<F> {
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnDivergence {
            name: name.into(),
            f,
        }
    }
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> DivergenceGradient for FnDivergence<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn gradient(&self, h: f64, g: f64) -> f64 {
        (self.f)(h, g)
    }
}

impl fmt::Debug for dyn DivergenceGradient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DivergenceGradient({})", self.name())
    }
}

/// Delta w_j = div(h*j, g_j) * dg_j/dw_j for every prototype, with a
/// Gaussian g on squared Euclidean distances, so that
/// dg/dw = -g / (2 gamma^2) * dd_E/dw = g (x - w) / gamma^2.
#[allow(clippy::too_many_arguments)]
pub fn general_update_vectors(
    x: ArrayView1<'_, f64>,
    protos: &PrototypeSet,
    lattice: &Lattice,
    winner: usize,
    h: &KernelSpec,
    g: &KernelSpec,
    dist: &DistanceSpec,
    div: &dyn DivergenceGradient,
) -> Result<Array2<f64>> {
    if g.family() != KernelFamily::Gaussian {
        return Err(XimError::Unsupported(format!(
            "general learning rule needs a Gaussian exploration kernel, got {}",
            g.family()
        )));
    }
    if !matches!(dist, DistanceSpec::SquaredEuclidean) {
        return Err(XimError::Unsupported(
            "general learning rule needs squared Euclidean distances".into(),
        ));
    }
    check_step_inputs(x, protos, lattice, winner, 1.0)?;
    let gamma = g.bandwidth();
    let from_winner = lattice.distances_from(winner);
    let mut out = Array2::zeros((protos.len(), protos.dim()));
    for j in 0..protos.len() {
        let w = protos.row(j);
        let hv = h.value(from_winner[j]);
        let gv = g.value(squared_euclidean(x, w)).max(crate::assignment::G_FLOOR);
        let factor = div.gradient(hv, gv);
        for (c, v) in out.row_mut(j).iter_mut().enumerate() {
            let dd_dw = -2.0 * (x[c] - w[c]);
            let dg_dw = -gv / (2.0 * gamma * gamma) * dd_dw;
            *v = factor * dg_dw;
        }
    }
    Ok(out)
}

/// One update with an arbitrary divergence gradient.
#[allow(clippy::too_many_arguments)]
pub fn xim_step_general(
    protos: &mut PrototypeSet,
    x: ArrayView1<'_, f64>,
    lattice: &Lattice,
    winner: usize,
    h: &KernelSpec,
    g: &KernelSpec,
    dist: &DistanceSpec,
    div: &dyn DivergenceGradient,
    epsilon: f64,
) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(XimError::config("learning rate must be positive"));
    }
    let delta = general_update_vectors(x, protos, lattice, winner, h, g, dist, div)?;
    for j in 0..protos.len() {
        let mut w = protos.row_mut(j);
        for (wi, d) in w.iter_mut().zip(delta.row(j)) {
            *wi -= epsilon * d;
        }
    }
    Ok(())
}

/// SOM update w_j <- w_j + epsilon h(d_O(r*, r_j)) (x - w_j).
pub fn som_step(
    protos: &mut PrototypeSet,
    x: ArrayView1<'_, f64>,
    lattice: &Lattice,
    winner: usize,
    h: &KernelSpec,
    epsilon: f64,
) -> Result<()> {
    check_step_inputs(x, protos, lattice, winner, epsilon)?;
    apply_som(protos, x, lattice, winner, h, epsilon);
    Ok(())
}

fn apply_som(
    protos: &mut PrototypeSet,
    x: ArrayView1<'_, f64>,
    lattice: &Lattice,
    winner: usize,
    h: &KernelSpec,
    epsilon: f64,
) {
    let from_winner = lattice.distances_from(winner);
    for j in 0..protos.len() {
        let step = epsilon * h.value(from_winner[j]);
        if step == 0.0 {
            continue;
        }
        let mut w = protos.row_mut(j);
        for (wi, xi) in w.iter_mut().zip(x.iter()) {
            *wi += step * (xi - *wi);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: usize,
    pub epsilon: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub winner: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub prototypes: PrototypeSet,
    pub log: Vec<LogRow>,
    pub schedules: ResolvedSchedules,
    /// g kernel in force at the last iteration.
    pub final_g: ExplorationKernel,
    pub final_sigma: f64,
}

impl TrainOutcome {
    pub fn final_h(&self, config: &TrainConfig) -> Result<KernelSpec> {
        KernelSpec::new(config.ordering_family(), self.final_sigma)
    }
}

/// Source of the exploration-space bandwidth at iteration t.
pub(crate) enum GammaSource {
    Global,
    Knn { sorted: Array2<f64>, k: AnnealSchedule },
    Fixed(Vec<f64>),
}

impl GammaSource {
    pub(crate) fn new(config: &TrainConfig, data: &Dataset, horizon: usize) -> Result<Self> {
        Ok(match config.bandwidth {
            BandwidthPolicy::Global => GammaSource::Global,
            BandwidthPolicy::KnnBall { k_start, k_end } => {
                if data.len() < 2 {
                    return Err(XimError::config("knn bandwidths need at least 2 samples"));
                }
                GammaSource::Knn {
                    sorted: sorted_neighbor_distances(data, &DistanceSpec::SquaredEuclidean)?,
                    k: AnnealSchedule {
                        start: k_start,
                        end: k_end,
                        t_max: horizon,
                    },
                }
            }
            BandwidthPolicy::Perplexity(p) => GammaSource::Fixed(
                bandwidths_perplexity(data, &DistanceSpec::SquaredEuclidean, p)?.gamma,
            ),
        })
    }

    /// The knn radius is a squared distance (a variance); its root is the
    /// Gaussian bandwidth.
    pub(crate) fn kernel_at(&self, t: usize, global_gamma: f64, n: usize) -> Result<ExplorationKernel> {
        match self {
            GammaSource::Global => Ok(ExplorationKernel::Shared(KernelSpec::gaussian(global_gamma)?)),
            GammaSource::Knn { sorted, k } => {
                let k_now = (k.at(t).round() as usize).clamp(1, n - 1);
                let radii = knn_from_sorted(sorted, k_now);
                ExplorationKernel::per_sample(
                    KernelFamily::Gaussian,
                    radii.into_iter().map(|r| r.sqrt().max(BANDWIDTH_FLOOR)).collect(),
                )
            }
            GammaSource::Fixed(g) => ExplorationKernel::per_sample(KernelFamily::Gaussian, g.clone()),
        }
    }
}

/// Online training loop.
pub fn train(data: &Dataset, lattice: &Lattice, config: &TrainConfig) -> Result<TrainOutcome> {
    let protos = initialize(data, lattice, config.init, config.seed)?;
    train_from(data, lattice, config, protos, None)
}

/// Online training with a custom divergence: updates follow
/// [`xim_step_general`] instead of the weighted squared-Euclidean rule.
pub fn train_with_divergence(
    data: &Dataset,
    lattice: &Lattice,
    config: &TrainConfig,
    div: &dyn DivergenceGradient,
) -> Result<TrainOutcome> {
    let protos = initialize(data, lattice, config.init, config.seed)?;
    train_from(data, lattice, config, protos, Some(div))
}

/// Online training starting from given prototypes.
pub fn train_from(
    data: &Dataset,
    lattice: &Lattice,
    config: &TrainConfig,
    mut protos: PrototypeSet,
    div: Option<&dyn DivergenceGradient>,
) -> Result<TrainOutcome> {
    if !config.method.is_online() {
        return Err(XimError::config(format!(
            "{} is not trained by the online loop",
            config.method
        )));
    }
    check_shape("prototype dimension", data.dim(), protos.dim())?;
    protos.check_lattice(lattice)?;
    let schedules = config.resolve(data, lattice)?;
    let horizon = config.t_max.saturating_sub(1).max(1);
    let eps_s = AnnealSchedule::new(schedules.epsilon, horizon);
    let sigma_s = AnnealSchedule::new(schedules.sigma, horizon);
    let gamma_s = AnnealSchedule::new(schedules.gamma, horizon);
    let gamma_source = GammaSource::new(config, data, horizon)?;
    let family = config.ordering_family();
    let dist = DistanceSpec::SquaredEuclidean;

    let mut rng = stream(config.seed, Stream::Sampling);
    let n = data.len();
    let m = protos.len();
    let mut d_e = vec![0.0; m];
    let mut log = Vec::new();
    let mut g_kernel = gamma_source.kernel_at(0, gamma_s.at(0), n)?;
    let mut knn_k = None;
    let mut sigma = sigma_s.at(0);

    for t in 0..config.t_max {
        let epsilon = eps_s.at(t);
        sigma = sigma_s.at(t);
        let gamma_global = gamma_s.at(t);
        match &gamma_source {
            GammaSource::Global => g_kernel = ExplorationKernel::Shared(KernelSpec::gaussian(gamma_global)?),
            GammaSource::Knn { k, .. } => {
                let k_now = (k.at(t).round() as usize).clamp(1, n - 1);
                if knn_k != Some(k_now) {
                    g_kernel = gamma_source.kernel_at(t, gamma_global, n)?;
                    knn_k = Some(k_now);
                }
            }
            GammaSource::Fixed(_) => {}
        }
        let h = KernelSpec::new(family, sigma)?;

        let i = rng.random_range(0..n);
        let x = data.row(i);
        let g = g_kernel.for_sample(i);
        for (j, d) in d_e.iter_mut().enumerate() {
            *d = squared_euclidean(x, protos.row(j));
        }
        let winner = winner_from_distances(config.best_match, &d_e, lattice, &h, &g)?;

        match (config.method, div) {
            (crate::config::Method::Som, _) => apply_som(&mut protos, x, lattice, winner, &h, epsilon),
            (_, Some(div)) => xim_step_general(&mut protos, x, lattice, winner, &h, &g, &dist, div, epsilon)?,
            (_, None) => {
                let weights = ForceWeights::from_config(config, g.bandwidth());
                apply_xim(&mut protos, x, lattice, winner, &h, &g, epsilon, weights, &d_e);
            }
        }

        if t % config.log_stride == 0 || t + 1 == config.t_max {
            log.push(LogRow {
                t,
                epsilon,
                sigma,
                gamma: g.bandwidth(),
                winner,
            });
        }
    }
    if !protos.is_finite() {
        return Err(XimError::Degenerate(
            "training diverged to non-finite prototypes".into(),
        ));
    }
    Ok(TrainOutcome {
        prototypes: protos,
        log,
        schedules,
        final_g: g_kernel,
        final_sigma: sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};
    use crate::config::Method;
    use crate::lattice::Topology;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn anneal_examples() {
        let s = AnnealSchedule { start: 1.0, end: 0.01, t_max: 100 };
        assert_eq!(anneal(&s, 100).unwrap(), 0.01);
        assert_eq!(anneal(&s, 0).unwrap(), 1.0);
        assert!((anneal(&s, 50).unwrap() - 0.1).abs() < 1e-15);
        assert!(anneal(&s, 101).is_err());
    }

    #[test]
    fn anneal_is_log_linear_and_bounded() {
        let s = AnnealSchedule { start: 3.0, end: 0.2, t_max: 40 };
        let vals: Vec<f64> = (0..=40).map(|t| anneal(&s, t).unwrap()).collect();
        let ratio = vals[1] / vals[0];
        for w in vals.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-12);
            assert!(w[1] < w[0]);
        }
        assert!(vals.iter().all(|v| *v >= 0.2 && *v <= 3.0));
    }

    fn one_node_pair() -> (Lattice, PrototypeSet) {
        // two-node lattice; node 1 is the prototype we watch
        let lattice = Lattice::explicit(array![[0.0], [1e6]]).unwrap();
        let protos = PrototypeSet::new(array![[0.0, 0.0], [0.0, 0.0]]).unwrap();
        (lattice, protos)
    }

    #[test]
    fn attraction_example() {
        let (lattice, mut p) = one_node_pair();
        let h = KernelSpec::gaussian(1.0).unwrap();
        let g = KernelSpec::gaussian(1.0).unwrap();
        xim_step(&mut p, array![1.0, 0.0].view(), &lattice, 0, &h, &g, 0.1, ForceWeights::unweighted()).unwrap();
        let e = (-0.5f64).exp();
        assert!((p.row(0)[0] - 0.1 * (1.0 - e)).abs() < 1e-15);
        assert!((p.row(0)[0] - 0.03935).abs() < 1e-5);
        assert_eq!(p.row(0)[1], 0.0);
        // node 1 is 1e6 lattice units away: h = 0, pure repulsion
        assert!((p.row(1)[0] + 0.1 * e).abs() < 1e-15);
        assert!((p.row(1)[0] + 0.06065).abs() < 1e-5);
    }

    #[test]
    fn coincident_prototypes_stay() {
        let lattice = Lattice::grid(2, 2, Topology::Rectangular).unwrap();
        let mut p = PrototypeSet::new(Array2::from_elem((4, 3), 0.5)).unwrap();
        let before = p.clone();
        let h = KernelSpec::new(KernelFamily::CauchyLorentz, 1.0).unwrap();
        let g = KernelSpec::gaussian(0.3).unwrap();
        xim_step(&mut p, array![0.5, 0.5, 0.5].view(), &lattice, 2, &h, &g, 0.7, ForceWeights::eta(0.3)).unwrap();
        assert_eq!(p, before);
        som_step(&mut p, array![0.5, 0.5, 0.5].view(), &lattice, 2, &h, 0.7).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn step_shape_errors() {
        let lattice = Lattice::grid(1, 2, Topology::Rectangular).unwrap();
        let mut p = PrototypeSet::new(Array2::zeros((2, 2))).unwrap();
        let h = KernelSpec::gaussian(1.0).unwrap();
        assert!(matches!(
            xim_step(&mut p, array![1.0].view(), &lattice, 0, &h, &h, 0.1, ForceWeights::unweighted()),
            Err(XimError::Shape { .. })
        ));
        assert!(som_step(&mut p, array![1.0, 2.0, 3.0].view(), &lattice, 0, &h, 0.1).is_err());
        assert!(som_step(&mut p, array![1.0, 2.0].view(), &lattice, 5, &h, 0.1).is_err());
    }

    #[test]
    fn general_rule_with_gkl_matches_prefactor_rule() {
        let (lattice, p) = one_node_pair();
        let h = KernelSpec::gaussian(1.0).unwrap();
        let g = KernelSpec::gaussian(1.0).unwrap();
        let mut a = p.clone();
        xim_step_general(&mut a, array![1.0, 0.0].view(), &lattice, 0, &h, &g, &DistanceSpec::SquaredEuclidean, &GeneralizedKl, 0.1).unwrap();
        let mut b = p.clone();
        xim_step(&mut b, array![1.0, 0.0].view(), &lattice, 0, &h, &g, 0.1, ForceWeights::unweighted().with_prefactor(1.0)).unwrap();
        for (x, y) in a.matrix().iter().zip(b.matrix()) {
            assert!((x - y).abs() < 1e-15);
        }
        // (1 - h/g)(-g/2g^2)(-2(x-w)) = (g - h)(x - w)/gamma^2 on random inputs
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let lattice = Lattice::grid(2, 3, Topology::Rectangular).unwrap();
            let w = PrototypeSet::new(Array2::from_shape_fn((6, 3), |_| rng.random_range(-1.0..1.0))).unwrap();
            let x = Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));
            let gamma = rng.random_range(0.3..2.0);
            let h = KernelSpec::new(KernelFamily::StudentT, rng.random_range(0.5..3.0)).unwrap();
            let g = KernelSpec::gaussian(gamma).unwrap();
            let winner = rng.random_range(0..6);
            let delta = general_update_vectors(x.view(), &w, &lattice, winner, &h, &g, &DistanceSpec::SquaredEuclidean, &GeneralizedKl).unwrap();
            for j in 0..6 {
                let hv = h.value(lattice.distance(winner, j));
                let gv = g.value(squared_euclidean(x.view(), w.row(j)));
                let expect = xim_update_vector(x.view(), w.row(j), hv, gv, ForceWeights::unweighted().with_prefactor(gamma));
                for (a, b) in delta.row(j).iter().zip(expect.iter()) {
                    assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }
    }

    #[test]
    fn general_rule_zero_cases() {
        let lattice = Lattice::explicit(array![[0.0], [1.0]]).unwrap();
        let h = KernelSpec::gaussian(1.0).unwrap();
        let g = KernelSpec::gaussian(1.0).unwrap();
        // x at w_1, w_0 one unit away: g_j = h_1j for winner 1
        let p = PrototypeSet::new(array![[0.0], [1.0]]).unwrap();
        let delta = general_update_vectors(array![1.0].view(), &p, &lattice, 1, &h, &g, &DistanceSpec::SquaredEuclidean, &GeneralizedKl).unwrap();
        assert!(delta.iter().all(|v| v.abs() < 1e-15));

        let zero = FnDivergence::new("zero", |_, _| 0.0);
        let mut q = PrototypeSet::new(array![[0.3], [-2.0]]).unwrap();
        let before = q.clone();
        xim_step_general(&mut q, array![5.0].view(), &lattice, 0, &h, &g, &DistanceSpec::SquaredEuclidean, &zero, 0.5).unwrap();
        assert_eq!(q, before);
    }

    #[test]
    fn general_rule_rejects_non_gaussian_g() {
        let lattice = Lattice::explicit(array![[0.0], [1.0]]).unwrap();
        let mut p = PrototypeSet::new(array![[0.0], [1.0]]).unwrap();
        let h = KernelSpec::gaussian(1.0).unwrap();
        let g = KernelSpec::new(KernelFamily::CauchyLorentz, 1.0).unwrap();
        assert!(matches!(
            xim_step_general(&mut p, array![1.0].view(), &lattice, 0, &h, &g, &DistanceSpec::SquaredEuclidean, &GeneralizedKl, 0.1),
            Err(XimError::Unsupported(_))
        ));
    }

    #[test]
    fn som_examples() {
        let lattice = Lattice::explicit(array![[0.0], [50.0]]).unwrap();
        let mut p = PrototypeSet::new(array![[0.0, 0.0], [0.0, 0.0]]).unwrap();
        let h = KernelSpec::gaussian(1.0).unwrap();
        som_step(&mut p, array![1.0, 0.0].view(), &lattice, 0, &h, 0.5).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.5, 0.0]);
        // d_O = 2500 >= 50 sigma^2: far node barely moves
        assert!(p.row(1)[0].abs() < 1e-9);
    }

    #[test]
    fn eta_half_is_half_the_unweighted_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x = Array1::from_shape_fn(4, |_| rng.random_range(-2.0..2.0));
            let w = Array1::from_shape_fn(4, |_| rng.random_range(-2.0..2.0));
            let (h, g) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let half = xim_update_vector(x.view(), w.view(), h, g, ForceWeights::eta(0.5));
            let full = xim_update_vector(x.view(), w.view(), h, g, ForceWeights::unweighted());
            for (a, b) in half.iter().zip(full.iter()) {
                assert_eq!(*a, 0.5 * b);
            }
        }
    }

    #[test]
    fn attraction_iff_h_exceeds_g() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let lattice = Lattice::grid(3, 3, Topology::Rectangular).unwrap();
        for _ in 0..30 {
            let w0 = PrototypeSet::new(Array2::from_shape_fn((9, 2), |_| rng.random_range(-2.0..2.0))).unwrap();
            let x = Array1::from_shape_fn(2, |_| rng.random_range(-2.0..2.0));
            let h = KernelSpec::gaussian(rng.random_range(0.3..2.0)).unwrap();
            let g = KernelSpec::gaussian(rng.random_range(0.3..2.0)).unwrap();
            let winner = rng.random_range(0..9);
            let mut w = w0.clone();
            xim_step(&mut w, x.view(), &lattice, winner, &h, &g, 0.05, ForceWeights::unweighted()).unwrap();
            for j in 0..9 {
                let hv = h.value(lattice.distance(winner, j));
                let gv = g.value(squared_euclidean(x.view(), w0.row(j)));
                for c in 0..2 {
                    let before = (x[c] - w0.row(j)[c]).abs();
                    let after = (x[c] - w.row(j)[c]).abs();
                    if before == 0.0 {
                        continue;
                    }
                    if hv > gv {
                        assert!(after < before);
                    } else if hv < gv {
                        assert!(after > before);
                    }
                }
            }
            // SOM never moves away
            let mut s = w0.clone();
            som_step(&mut s, x.view(), &lattice, winner, &h, 0.3).unwrap();
            for j in 0..9 {
                for c in 0..2 {
                    assert!((x[c] - s.row(j)[c]).abs() <= (x[c] - w0.row(j)[c]).abs());
                }
            }
        }
    }

    fn toy_data(seed: u64, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset::new(Array2::from_shape_fn((n, 3), |(i, _)| (i % 2) as f64 * 4.0 + rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn loop_contract() {
        let data = toy_data(1, 12);
        let lattice = Lattice::grid(3, 3, Topology::Rectangular).unwrap();
        let mut cfg = TrainConfig { t_max: 0, ..Default::default() };
        assert!(train(&data, &lattice, &cfg).is_err());
        cfg.t_max = 1;
        cfg.log_stride = 1;
        let out = train(&data, &lattice, &cfg).unwrap();
        assert_eq!(out.log.len(), 1);
        let init = initialize(&data, &lattice, cfg.init, cfg.seed).unwrap();
        assert_ne!(out.prototypes, init);
    }

    #[test]
    fn single_sample_winner_converges_monotonically() {
        let data = Dataset::new(array![[1.0, -2.0, 0.5]]).unwrap();
        let lattice = Lattice::grid(2, 2, Topology::Rectangular).unwrap();
        let init = PrototypeSet::new(array![[0.0, 0.0, 0.0], [3.0, 3.0, 3.0], [-3.0, 1.0, 0.0], [2.0, 2.0, -2.0]]).unwrap();
        let cfg = TrainConfig {
            method: Method::Xim,
            t_max: 1,
            epsilon: Schedule::constant(0.1),
            sigma: Some(Schedule::constant(0.5)),
            gamma: Some(Schedule::constant(1.0)),
            weighting: Weighting::Unweighted,
            ..Default::default()
        };
        let mut p = init;
        let start = squared_euclidean(data.row(0), p.row(0));
        let mut last = start;
        for step in 0..100 {
            let out = train_from(&data, &lattice, &TrainConfig { seed: step, ..cfg.clone() }, p, None).unwrap();
            p = out.prototypes;
            let winner = out.log[0].winner;
            assert_eq!(winner, 0);
            let d = squared_euclidean(data.row(0), p.row(winner));
            assert!(d < last, "step {step}: {d} >= {last}");
            last = d;
        }
        // the net pull (h - g) fades as g -> 1, so the approach is slow but steady
        assert!(last < 0.5 * start);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let data = toy_data(2, 30);
        let lattice = Lattice::grid(4, 4, Topology::Hexagonal).unwrap();
        for method in [Method::Xim, Method::TXim, Method::CXim, Method::Som] {
            let cfg = TrainConfig { method, t_max: 500, seed: 77, ..Default::default() };
            let a = train(&data, &lattice, &cfg).unwrap();
            let b = train(&data, &lattice, &cfg).unwrap();
            assert_eq!(a.prototypes, b.prototypes);
            assert_eq!(a.log, b.log);
        }
    }

    #[test]
    fn per_sample_bandwidth_policies_run() {
        let data = toy_data(3, 25);
        let lattice = Lattice::grid(3, 3, Topology::Rectangular).unwrap();
        for policy in [
            BandwidthPolicy::KnnBall { k_start: 10.0, k_end: 2.0 },
            BandwidthPolicy::Perplexity(5.0),
        ] {
            let cfg = TrainConfig { t_max: 300, bandwidth: policy, log_stride: 50, ..Default::default() };
            let out = train(&data, &lattice, &cfg).unwrap();
            assert!(out.prototypes.is_finite());
            assert!(out.log.iter().all(|r| r.gamma > 0.0));
        }
    }

    #[test]
    fn rules_and_divergence_hook_run() {
        let data = toy_data(4, 20);
        let lattice = Lattice::grid(3, 3, Topology::Rectangular).unwrap();
        for rule in [crate::assignment::BestMatchRule::Heskes, crate::assignment::BestMatchRule::Gkl] {
            let cfg = TrainConfig { t_max: 200, best_match: rule, ..Default::default() };
            assert!(train(&data, &lattice, &cfg).unwrap().prototypes.is_finite());
        }
        let cfg = TrainConfig { t_max: 200, epsilon: Schedule::new(0.1, 0.01).unwrap(), ..Default::default() };
        let out = train_with_divergence(&data, &lattice, &cfg, &GeneralizedKl).unwrap();
        assert!(out.prototypes.is_finite());
        let zero = FnDivergence::new("zero", |_, _| 0.0);
        let out = train_with_divergence(&data, &lattice, &cfg, &zero).unwrap();
        assert_eq!(out.prototypes, initialize(&data, &lattice, cfg.init, cfg.seed).unwrap());
    }

    proptest! {
        #[test]
        fn annealed_values_stay_between_endpoints(
            start in 1e-3f64..10.0,
            end in 1e-3f64..10.0,
            t_max in 1usize..5000,
            t in 0usize..6000,
        ) {
            let s = AnnealSchedule::new(Schedule { start, end }, t_max);
            let v = s.at(t.min(t_max));
            let (lo, hi) = (start.min(end), start.max(end));
            prop_assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn som_step_never_moves_away(
            x in proptest::collection::vec(-3.0f64..3.0, 3),
            w in proptest::collection::vec(-3.0f64..3.0, 12),
            winner in 0usize..4,
            sigma in 0.2f64..3.0,
            epsilon in 1e-3f64..1.0,
        ) {
            let lattice = Lattice::grid(2, 2, Topology::Rectangular).unwrap();
            let x = Array1::from(x);
            let w0 = PrototypeSet::new(Array2::from_shape_vec((4, 3), w).unwrap()).unwrap();
            let mut w = w0.clone();
            som_step(&mut w, x.view(), &lattice, winner, &KernelSpec::gaussian(sigma).unwrap(), epsilon).unwrap();
            for j in 0..4 {
                let before = squared_euclidean(x.view(), w0.row(j));
                let after = squared_euclidean(x.view(), w.row(j));
                prop_assert!(after <= before * (1.0 + 1e-12));
            }
        }
    }
}
