//! The XIM cost: the empirical mean over samples of the generalized KL
//! divergence between h around the best-matching node and g around the
//! sample, minimized over the best match.

use ndarray::Array2;

use crate::assignment::{gkl_from_g, gkl_term, G_FLOOR};
use crate::data::{squared_euclidean, Dataset};
use crate::error::{check_shape, Result, XimError};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::lattice::Lattice;
use crate::prototypes::PrototypeSet;

#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    /// Sum of the per-sample scores.
    pub total: f64,
    pub winners: Vec<usize>,
    pub scores: Vec<f64>,
}

fn g_values(x: ndarray::ArrayView1<'_, f64>, protos: &PrototypeSet, g: &KernelSpec) -> Vec<f64> {
    (0..protos.len()).map(|j| g.value(squared_euclidean(x, protos.row(j)))).collect()
}

/// Per sample, the GKL best match and its divergence; the total is their sum.
pub fn xim_cost(
    data: &Dataset,
    protos: &PrototypeSet,
    lattice: &Lattice,
    h: &KernelSpec,
    g: &KernelSpec,
) -> Result<CostBreakdown> {
    check_shape("data dimension", protos.dim(), data.dim())?;
    protos.check_lattice(lattice)?;
    let mut winners = Vec::with_capacity(data.len());
    let mut scores = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let s = gkl_from_g(&g_values(data.row(i), protos, g), lattice, h)?;
        scores.push(s.scores[s.winner]);
        winners.push(s.winner);
    }
    Ok(CostBreakdown {
        total: scores.iter().sum(),
        winners,
        scores,
    })
}

/// Cost with the best matches held fixed: sum_i sum_j GKL(h_{r_i j}, g_ij).
pub fn frozen_cost(
    data: &Dataset,
    protos: &PrototypeSet,
    lattice: &Lattice,
    winners: &[usize],
    h: &KernelSpec,
    g: &KernelSpec,
) -> Result<f64> {
    check_shape("winner count", data.len(), winners.len())?;
    check_shape("data dimension", protos.dim(), data.dim())?;
    let mut total = 0.0;
    for (i, &r) in winners.iter().enumerate() {
        let gv = g_values(data.row(i), protos, g);
        let row = lattice.distances_from(r);
        total += (0..protos.len()).map(|j| gkl_term(h.value(row[j]), gv[j])).sum::<f64>();
    }
    Ok(total)
}

/// Gradient of [`frozen_cost`] with respect to every prototype, for a
/// Gaussian g on squared Euclidean distances:
/// dE/dw_j = sum_i (g_ij - h_ij) (x_i - w_j) / gamma^2.
pub fn frozen_gradient(
    data: &Dataset,
    protos: &PrototypeSet,
    lattice: &Lattice,
    winners: &[usize],
    h: &KernelSpec,
    g: &KernelSpec,
) -> Result<Array2<f64>> {
    if g.family() != KernelFamily::Gaussian {
        return Err(XimError::Unsupported("cost gradient needs a Gaussian g".into()));
    }
    check_shape("winner count", data.len(), winners.len())?;
    check_shape("data dimension", protos.dim(), data.dim())?;
    let gamma2 = g.bandwidth() * g.bandwidth();
    let mut grad = Array2::zeros((protos.len(), protos.dim()));
    for (i, &r) in winners.iter().enumerate() {
        let x = data.row(i);
        let row = lattice.distances_from(r);
        for j in 0..protos.len() {
            let w = protos.row(j);
            let gv = g.value(squared_euclidean(x, w)).max(G_FLOOR);
            let coeff = (gv - h.value(row[j])) / gamma2;
            for (c, v) in grad.row_mut(j).iter_mut().enumerate() {
                *v += coeff * (x[c] - w[c]);
            }
        }
    }
    Ok(grad)
}
