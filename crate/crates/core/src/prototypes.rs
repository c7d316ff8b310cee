use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::analysis::pca::principal_axes;
use crate::data::Dataset;
use crate::error::{check_shape, Result, XimError};
use crate::lattice::Lattice;
use crate::rng::{stream, Stream};

/// Prototype vectors w_j in the exploration space, row j paired with
/// lattice node j.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    prototypes: Array2<f64>,
}

impl PrototypeSet {
    pub fn new(prototypes: Array2<f64>) -> Result<Self> {
        if prototypes.nrows() == 0 || prototypes.ncols() == 0 {
            return Err(XimError::structure("empty prototype set"));
        }
        if prototypes.iter().any(|v| !v.is_finite()) {
            return Err(XimError::domain("non-finite prototype coordinate"));
        }
        Ok(PrototypeSet { prototypes })
    }

    /// Like [`PrototypeSet::new`] but also checks row parity with `lattice`.
    pub fn for_lattice(prototypes: Array2<f64>, lattice: &Lattice) -> Result<Self> {
        check_shape("prototype count", lattice.len(), prototypes.nrows())?;
        Self::new(prototypes)
    }

    pub fn len(&self) -> usize {
        self.prototypes.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.prototypes.ncols()
    }

    pub fn row(&self, j: usize) -> ArrayView1<'_, f64> {
        self.prototypes.row(j)
    }

    pub(crate) fn row_mut(&mut self, j: usize) -> ArrayViewMut1<'_, f64> {
        self.prototypes.row_mut(j)
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.prototypes.view()
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.prototypes
    }

    pub fn check_lattice(&self, lattice: &Lattice) -> Result<()> {
        check_shape("prototype count", lattice.len(), self.len())
    }

    pub fn is_finite(&self) -> bool {
        self.prototypes.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitPolicy {
    /// Randomly drawn data samples plus Gaussian jitter of 1e-3 times the
    /// per-dimension standard deviation.
    #[default]
    Samples,
    /// Lattice laid out on the plane of the leading principal components.
    PcaPlane,
}

impl fmt::Display for InitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitPolicy::Samples => "samples",
            InitPolicy::PcaPlane => "pca",
        })
    }
}

impl FromStr for InitPolicy {
    type Err = XimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "samples" => Ok(InitPolicy::Samples),
            "pca" => Ok(InitPolicy::PcaPlane),
            other => Err(XimError::config(format!("unknown init policy {other:?}"))),
        }
    }
}

const JITTER_SCALE: f64 = 1e-3;

pub fn initialize(
    data: &Dataset,
    lattice: &Lattice,
    policy: InitPolicy,
    seed: u64,
) -> Result<PrototypeSet> {
    match policy {
        InitPolicy::Samples => init_from_samples(data, lattice, seed),
        InitPolicy::PcaPlane => init_pca_plane(data, lattice),
    }
}

fn init_from_samples(data: &Dataset, lattice: &Lattice, seed: u64) -> Result<PrototypeSet> {
    let mut rng = stream(seed, Stream::Init);
    let std = data.column_std();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let m = lattice.len();
    let mut w = Array2::zeros((m, data.dim()));
    for j in 0..m {
        let src = rng.random_range(0..data.len());
        for (c, v) in w.row_mut(j).iter_mut().enumerate() {
            *v = data.row(src)[c] + JITTER_SCALE * std[c] * normal.sample(&mut rng);
        }
    }
    PrototypeSet::for_lattice(w, lattice)
}

/// Node coordinates are rescaled to [-1, 1] per lattice axis and placed at
/// mean + sum_k a_k * 2 sqrt(lambda_k) * v_k. The widest lattice axis gets
/// the leading principal axis.
fn init_pca_plane(data: &Dataset, lattice: &Lattice) -> Result<PrototypeSet> {
    let n_axes = lattice.dim().min(data.dim()).min(data.len().saturating_sub(1));
    let mean: Vec<f64> = (0..data.dim())
        .map(|c| data.points().column(c).sum() / data.len() as f64)
        .collect();
    let axes = if n_axes > 0 {
        Some(principal_axes(data.points(), n_axes)?)
    } else {
        None
    };
    let bounds = lattice.bounds();
    let mut order: Vec<usize> = (0..lattice.dim()).collect();
    order.sort_by(|&a, &b| {
        let ea = bounds[a].1 - bounds[a].0;
        let eb = bounds[b].1 - bounds[b].0;
        eb.total_cmp(&ea).then(a.cmp(&b))
    });
    let mut w = Array2::zeros((lattice.len(), data.dim()));
    for j in 0..lattice.len() {
        let mut row = w.row_mut(j);
        for (c, v) in row.iter_mut().enumerate() {
            *v = mean[c];
        }
        let Some(axes) = &axes else { continue };
        for k in 0..n_axes {
            let axis = order[k];
            let (lo, hi) = bounds[axis];
            let a = if hi > lo {
                2.0 * (lattice.node(j)[axis] - lo) / (hi - lo) - 1.0
            } else {
                0.0
            };
            let scale = 2.0 * axes.eigenvalues[k].max(0.0).sqrt();
            for (c, v) in row.iter_mut().enumerate() {
                *v += a * scale * axes.vectors[[k, c]];
            }
        }
    }
    PrototypeSet::for_lattice(w, lattice)
}
