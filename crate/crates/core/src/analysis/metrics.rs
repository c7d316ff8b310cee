//! Embedding quality measures.
//!
//! Sammon stress and Spearman's rho compare the lists of pairwise Euclidean
//! distances (pairs i < j in row-major order). Trustworthiness and
//! continuity compare k-nearest-neighbor sets by rank.

use ndarray::ArrayView2;

use crate::data::pairwise_squared;
use crate::error::{check_shape, Result, XimError};

/// Pairs with a high-space distance below this are skipped by Sammon.
pub const SAMMON_SKIP: f64 = 1e-12;

/// Euclidean distances of all pairs i < j.
pub fn pairwise_distances(points: ArrayView2<'_, f64>) -> Vec<f64> {
    let sq = pairwise_squared(points);
    let n = points.nrows();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(sq[[i, j]].sqrt());
        }
    }
    out
}

/// (1 / sum delta) * sum (delta - d)^2 / delta over pairs with delta >= 1e-12.
pub fn sammon_error(high: &[f64], low: &[f64]) -> Result<f64> {
    check_shape("pair count", high.len(), low.len())?;
    let mut norm = 0.0;
    let mut stress = 0.0;
    for (&delta, &d) in high.iter().zip(low) {
        if delta < SAMMON_SKIP {
            continue;
        }
        norm += delta;
        stress += (delta - d) * (delta - d) / delta;
    }
    if norm == 0.0 {
        return Err(XimError::Degenerate("all high-space distances are zero".into()));
    }
    Ok(stress / norm)
}

/// 1-based ranks; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of the average ranks.
pub fn spearman_rho(high: &[f64], low: &[f64]) -> Result<f64> {
    check_shape("pair count", high.len(), low.len())?;
    if high.len() < 2 {
        return Err(XimError::Degenerate("Spearman's rho needs at least 2 pairs".into()));
    }
    pearson(&average_ranks(high), &average_ranks(low))
        .ok_or_else(|| XimError::Degenerate("constant distance list; correlation undefined".into()))
}

/// Neighbor order and ranks of every point. `order[i]` lists the other
/// points by increasing distance (ties by index); `rank[i][j]` is the
/// 1-based position of j in `order[i]` (0 for j = i).
pub struct NeighborRanks {
    pub order: Vec<Vec<usize>>,
    pub rank: Vec<Vec<usize>>,
}

impl NeighborRanks {
    pub fn new(points: ArrayView2<'_, f64>) -> Self {
        let sq = pairwise_squared(points);
        let n = points.nrows();
        let mut order = Vec::with_capacity(n);
        let mut rank = vec![vec![0usize; n]; n];
        for i in 0..n {
            let mut o: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            o.sort_by(|&a, &b| sq[[i, a]].total_cmp(&sq[[i, b]]).then(a.cmp(&b)));
            for (r, &j) in o.iter().enumerate() {
                rank[i][j] = r + 1;
            }
            order.push(o);
        }
        NeighborRanks { order, rank }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Largest k with a valid normalization, floor((N - 1) / 2).
pub fn max_neighbors(n: usize) -> usize {
    n.saturating_sub(1) / 2
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 1 || k > max_neighbors(n) || k >= n {
        return Err(XimError::config(format!(
            "neighbor count {k} outside [1, {}] for {n} points",
            max_neighbors(n)
        )));
    }
    Ok(())
}

/// 1 - 2 / (N k (2N - 3k - 1)) * sum_i sum_{j in U_i(k)} (r_ref(i, j) - k),
/// U_i(k) = k nearest in `probe` that are not among the k nearest in `reference`.
fn rank_penalty_measure(reference: &NeighborRanks, probe: &NeighborRanks, k: usize) -> f64 {
    let n = reference.len();
    let mut penalty = 0usize;
    for i in 0..n {
        for &j in &probe.order[i][..k] {
            let r = reference.rank[i][j];
            if r > k {
                penalty += r - k;
            }
        }
    }
    let nf = n as f64;
    let kf = k as f64;
    1.0 - 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0)) * penalty as f64
}

fn check_pair(data: ArrayView2<'_, f64>, embedding: ArrayView2<'_, f64>) -> Result<()> {
    check_shape("embedding rows", data.nrows(), embedding.nrows())
}

pub fn trustworthiness(data: ArrayView2<'_, f64>, embedding: ArrayView2<'_, f64>, k: usize) -> Result<f64> {
    check_pair(data, embedding)?;
    check_k(data.nrows(), k)?;
    Ok(rank_penalty_measure(&NeighborRanks::new(data), &NeighborRanks::new(embedding), k))
}

pub fn continuity(data: ArrayView2<'_, f64>, embedding: ArrayView2<'_, f64>, k: usize) -> Result<f64> {
    check_pair(data, embedding)?;
    check_k(data.nrows(), k)?;
    Ok(rank_penalty_measure(&NeighborRanks::new(embedding), &NeighborRanks::new(data), k))
}

/// Trustworthiness and continuity for every k in `ks`, sharing one ranking
/// of each space.
pub fn trust_continuity_range(
    data: ArrayView2<'_, f64>,
    embedding: ArrayView2<'_, f64>,
    ks: std::ops::RangeInclusive<usize>,
) -> Result<Vec<(usize, f64, f64)>> {
    check_pair(data, embedding)?;
    let n = data.nrows();
    for k in [*ks.start(), *ks.end()] {
        check_k(n, k)?;
    }
    let high = NeighborRanks::new(data);
    let low = NeighborRanks::new(embedding);
    Ok(ks
        .map(|k| (k, rank_penalty_measure(&high, &low, k), rank_penalty_measure(&low, &high, k)))
        .collect())
}

/// Mean silhouette width over all points, Euclidean distances. Points in
/// singleton clusters score 0.
pub fn silhouette(points: ArrayView2<'_, f64>, labels: &[i64]) -> Result<f64> {
    check_shape("label count", points.nrows(), labels.len())?;
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(XimError::Degenerate("silhouette needs at least two clusters".into()));
    }
    let n = points.nrows();
    let sq = pairwise_squared(points);
    let class_of: Vec<usize> = labels.iter().map(|l| classes.binary_search(l).unwrap()).collect();
    let mut sizes = vec![0usize; classes.len()];
    for &c in &class_of {
        sizes[c] += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = class_of[i];
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![0.0; classes.len()];
        for j in 0..n {
            if j != i {
                sums[class_of[j]] += sq[[i, j]].sqrt();
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..classes.len())
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}
