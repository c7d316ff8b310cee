//! Best-match node selection.
//!
//! Three rules: plain minimal distance, the neighborhood-weighted distance
//! that turns the SOM rule into a gradient of a cost, and the generalized
//! Kullback-Leibler mismatch between h and g. All rules score every node
//! and pick the minimum; ties go to the lowest node index.

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView1;

use crate::data::{squared_euclidean, DistanceSpec};
use crate::error::{check_shape, Result, XimError};
use crate::kernels::KernelSpec;
use crate::lattice::Lattice;
use crate::prototypes::PrototypeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BestMatchRule {
    #[default]
    MinDistance,
    Heskes,
    Gkl,
}

impl fmt::Display for BestMatchRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BestMatchRule::MinDistance => "min_distance",
            BestMatchRule::Heskes => "heskes",
            BestMatchRule::Gkl => "gkl",
        })
    }
}

impl FromStr for BestMatchRule {
    type Err = XimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_distance" => Ok(BestMatchRule::MinDistance),
            "heskes" => Ok(BestMatchRule::Heskes),
            "gkl" => Ok(BestMatchRule::Gkl),
            other => Err(XimError::config(format!("unknown best-match rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeScores {
    pub scores: Vec<f64>,
    pub winner: usize,
    pub rule: BestMatchRule,
}

/// g values are floored here before entering a logarithm.
pub const G_FLOOR: f64 = 1e-300;

/// Index of the smallest score, lowest index on ties.
pub fn argmin(scores: &[f64]) -> usize {
    let mut best = 0;
    for (j, s) in scores.iter().enumerate().skip(1) {
        if *s < scores[best] {
            best = j;
        }
    }
    best
}

/// One summand p ln(p/q) - p + q of the generalized KL divergence. The
/// p = 0 limit is q.
#[inline]
pub fn gkl_term(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return q;
    }
    let q_safe = q.max(G_FLOOR);
    p * (p / q_safe).ln() - p + q
}

fn node_scores(scores: Vec<f64>, rule: BestMatchRule) -> NodeScores {
    let winner = argmin(&scores);
    NodeScores {
        scores,
        winner,
        rule,
    }
}

/// d_E(x, w_j) for every prototype.
pub fn exploration_distances(
    x: ArrayView1<'_, f64>,
    protos: &PrototypeSet,
    dist: &DistanceSpec,
) -> Result<Vec<f64>> {
    check_shape("data vector dimension", protos.dim(), x.len())?;
    match dist {
        DistanceSpec::SquaredEuclidean => Ok((0..protos.len())
            .map(|j| squared_euclidean(x, protos.row(j)))
            .collect()),
        DistanceSpec::Precomputed(_) => Err(XimError::Unsupported(
            "vector best match needs a vector distance; use the *_from_distances variants".into(),
        )),
    }
}

pub fn min_distance_from_distances(d_e: &[f64]) -> NodeScores {
    node_scores(d_e.to_vec(), BestMatchRule::MinDistance)
}

/// scores[k] = sum_j h(d_O(r_k, r_j)) d_E(x, w_j).
pub fn heskes_from_distances(d_e: &[f64], lattice: &Lattice, h: &KernelSpec) -> Result<NodeScores> {
    check_shape("node count", lattice.len(), d_e.len())?;
    let m = lattice.len();
    let scores = (0..m)
        .map(|k| {
            let row = lattice.distances_from(k);
            (0..m).map(|j| h.value(row[j]) * d_e[j]).sum()
        })
        .collect();
    Ok(node_scores(scores, BestMatchRule::Heskes))
}

/// scores[i] = sum_j [h_ij ln(h_ij / g_j) - h_ij + g_j], with g_j already
/// evaluated.
pub fn gkl_from_g(g_values: &[f64], lattice: &Lattice, h: &KernelSpec) -> Result<NodeScores> {
    check_shape("node count", lattice.len(), g_values.len())?;
    let m = lattice.len();
    let scores = (0..m)
        .map(|i| {
            let row = lattice.distances_from(i);
            (0..m).map(|j| gkl_term(h.value(row[j]), g_values[j])).sum()
        })
        .collect();
    Ok(node_scores(scores, BestMatchRule::Gkl))
}

pub fn gkl_from_distances(
    d_e: &[f64],
    lattice: &Lattice,
    h: &KernelSpec,
    g: &KernelSpec,
) -> Result<NodeScores> {
    let g_values: Vec<f64> = d_e.iter().map(|d| g.value(*d)).collect();
    gkl_from_g(&g_values, lattice, h)
}

pub fn best_match_min_distance(
    x: ArrayView1<'_, f64>,
    protos: &PrototypeSet,
    dist: &DistanceSpec,
) -> Result<NodeScores> {
    Ok(min_distance_from_distances(&exploration_distances(x, protos, dist)?))
}

pub fn best_match_heskes(
    x: ArrayView1<'_, f64>,
    protos: &PrototypeSet,
    lattice: &Lattice,
    h: &KernelSpec,
    dist: &DistanceSpec,
) -> Result<NodeScores> {
    protos.check_lattice(lattice)?;
    heskes_from_distances(&exploration_distances(x, protos, dist)?, lattice, h)
}

pub fn best_match_gkl(
    x: ArrayView1<'_, f64>,
    protos: &PrototypeSet,
    lattice: &Lattice,
    h: &KernelSpec,
    g: &KernelSpec,
    dist: &DistanceSpec,
) -> Result<NodeScores> {
    protos.check_lattice(lattice)?;
    gkl_from_distances(&exploration_distances(x, protos, dist)?, lattice, h, g)
}

/// Dispatch on a rule, starting from precomputed d_E values.
pub fn best_match_from_distances(
    rule: BestMatchRule,
    d_e: &[f64],
    lattice: &Lattice,
    h: &KernelSpec,
    g: &KernelSpec,
) -> Result<NodeScores> {
    match rule {
        BestMatchRule::MinDistance => Ok(min_distance_from_distances(d_e)),
        BestMatchRule::Heskes => heskes_from_distances(d_e, lattice, h),
        BestMatchRule::Gkl => gkl_from_distances(d_e, lattice, h, g),
    }
}

/// Winner only; skips the O(M^2) scoring when the rule is min-distance.
pub(crate) fn winner_from_distances(
    rule: BestMatchRule,
    d_e: &[f64],
    lattice: &Lattice,
    h: &KernelSpec,
    g: &KernelSpec,
) -> Result<usize> {
    match rule {
        BestMatchRule::MinDistance => Ok(argmin(d_e)),
        _ => Ok(best_match_from_distances(rule, d_e, lattice, h, g)?.winner),
    }
}
