//! Principal component analysis via a cyclic Jacobi eigen-solver on the
//! covariance matrix.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::data::Dataset;
use crate::error::{Result, XimError};

pub const EIGEN_TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Leading eigenpairs of a covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAxes {
    pub mean: Array1<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// One unit eigenvector per row.
    pub vectors: Array2<f64>,
    /// Sum of all covariance eigenvalues.
    pub total_variance: f64,
}

impl PrincipalAxes {
    pub fn project(&self, points: ArrayView2<'_, f64>) -> Array2<f64> {
        let centered = &points - &self.mean.view().insert_axis(Axis(0));
        centered.dot(&self.vectors.t())
    }
}

/// Eigen-decomposition of a symmetric matrix: (values, vectors as columns),
/// values unsorted.
pub fn jacobi_eigen(sym: ArrayView2<'_, f64>) -> (Vec<f64>, Array2<f64>) {
    let n = sym.nrows();
    let mut a = sym.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() <= EIGEN_TOLERANCE * 1e-3 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[[i, i]]).collect(), v)
}

/// Covariance with the 1/N divisor.
pub fn covariance(points: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let n = points.nrows() as f64;
    let mean = points.mean_axis(Axis(0)).expect("non-empty");
    let centered = &points - &mean.view().insert_axis(Axis(0));
    let cov = centered.t().dot(&centered) / n;
    (mean, cov)
}

/// Top `k` principal axes. Each eigenvector's largest-magnitude entry is
/// made positive.
pub fn principal_axes(points: ArrayView2<'_, f64>, k: usize) -> Result<PrincipalAxes> {
    let (n, d) = points.dim();
    if k == 0 || k > d || k + 1 > n.max(1) {
        return Err(XimError::config(format!(
            "{k} principal axes requested for {n} points in {d} dimensions"
        )));
    }
    let (mean, cov) = covariance(points);
    let (values, vectors) = jacobi_eigen(cov.view());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut out = Array2::zeros((k, d));
    for (r, &col) in order.iter().take(k).enumerate() {
        let mut vec = vectors.column(col).to_owned();
        let mut lead = 0;
        for c in 1..d {
            if vec[c].abs() > vec[lead].abs() + 1e-12 {
                lead = c;
            }
        }
        if vec[lead] < 0.0 {
            vec.mapv_inplace(|x| -x);
        }
        out.row_mut(r).assign(&vec);
    }
    Ok(PrincipalAxes {
        mean,
        eigenvalues: order.iter().take(k).map(|&i| values[i].max(0.0)).collect(),
        vectors: out,
        total_variance: values.iter().map(|v| v.max(0.0)).sum(),
    })
}

/// Linear embedding onto the top `d` principal axes.
#[derive(Debug, Clone)]
pub struct PcaEmbedding {
    pub coords: Array2<f64>,
    pub explained_variance: Vec<f64>,
    pub axes: PrincipalAxes,
}

pub fn pca_embed(data: &Dataset, d: usize) -> Result<PcaEmbedding> {
    let limit = (data.len().saturating_sub(1)).min(data.dim());
    if d == 0 || d > limit {
        return Err(XimError::config(format!(
            "target dimension {d} outside [1, {limit}]"
        )));
    }
    let axes = principal_axes(data.points(), d)?;
    Ok(PcaEmbedding {
        coords: axes.project(data.points()),
        explained_variance: axes.eigenvalues.clone(),
        axes,
    })
}
