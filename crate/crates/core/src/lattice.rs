//! Fixed node grids in the ordering space.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::data::{pairwise_squared, parse_matrix};
use crate::error::{Result, XimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Rectangular,
    Hexagonal,
    Explicit,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Rectangular => "rectangular",
            Topology::Hexagonal => "hexagonal",
            Topology::Explicit => "explicit",
        })
    }
}

impl FromStr for Topology {
    type Err = XimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" => Ok(Topology::Rectangular),
            "hexagonal" | "hex" => Ok(Topology::Hexagonal),
            "explicit" => Ok(Topology::Explicit),
            other => Err(XimError::config(format!("unknown topology {other:?}"))),
        }
    }
}

/// M node coordinates r_j with a cached matrix of squared Euclidean node
/// distances d_O(r_k, r_l).
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    nodes: Array2<f64>,
    topology: Topology,
    distances: Array2<f64>,
}

impl Lattice {
    /// Regular grid, nodes in row-major order. Node (i, j) sits at (i, j)
    /// for rectangular grids; hexagonal grids shift odd rows by half a
    /// column and compress row pitch to sqrt(3)/2.
    pub fn grid(rows: usize, cols: usize, topology: Topology) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols < 2 {
            return Err(XimError::config(format!(
                "lattice needs at least 2 nodes, got {rows}x{cols}"
            )));
        }
        let pitch = match topology {
            Topology::Rectangular => 1.0,
            Topology::Hexagonal => 3f64.sqrt() / 2.0,
            Topology::Explicit => {
                return Err(XimError::config(
                    "explicit lattices are built from node coordinates",
                ))
            }
        };
        let mut nodes = Array2::zeros((rows * cols, 2));
        for i in 0..rows {
            for j in 0..cols {
                let shift = if topology == Topology::Hexagonal && i % 2 == 1 {
                    0.5
                } else {
                    0.0
                };
                let k = i * cols + j;
                nodes[[k, 0]] = i as f64 * pitch;
                nodes[[k, 1]] = j as f64 + shift;
            }
        }
        Ok(Self::assemble(nodes, topology))
    }

    /// Arbitrary node placement, one coordinate row per node.
    pub fn explicit(nodes: Array2<f64>) -> Result<Self> {
        if nodes.nrows() < 2 || nodes.ncols() == 0 {
            return Err(XimError::config(format!(
                "explicit lattice needs at least 2 nodes with 1+ coordinates, got {}x{}",
                nodes.nrows(),
                nodes.ncols()
            )));
        }
        if nodes.iter().any(|v| !v.is_finite()) {
            return Err(XimError::domain("non-finite node coordinate"));
        }
        Ok(Self::assemble(nodes, Topology::Explicit))
    }

    /// Node coordinates with a topology tag, as read back from a model file.
    pub fn from_nodes(nodes: Array2<f64>, topology: Topology) -> Result<Self> {
        let mut lattice = Self::explicit(nodes)?;
        lattice.topology = topology;
        Ok(lattice)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| XimError::io(path, e))?;
        Self::explicit(parse_matrix(&text)?)
    }

    fn assemble(nodes: Array2<f64>, topology: Topology) -> Self {
        let distances = pairwise_squared(nodes.view());
        Lattice {
            nodes,
            topology,
            distances,
        }
    }

    /// Node count M.
    pub fn len(&self) -> usize {
        self.nodes.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.nrows() == 0
    }

    /// Ordering-space dimension d.
    pub fn dim(&self) -> usize {
        self.nodes.ncols()
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn nodes(&self) -> ArrayView2<'_, f64> {
        self.nodes.view()
    }

    pub fn node(&self, j: usize) -> ArrayView1<'_, f64> {
        self.nodes.row(j)
    }

    /// d_O(r_k, r_l).
    #[inline]
    pub fn distance(&self, k: usize, l: usize) -> f64 {
        self.distances[[k, l]]
    }

    /// Distances from node `k` to every node.
    pub fn distances_from(&self, k: usize) -> ArrayView1<'_, f64> {
        self.distances.row(k)
    }

    pub fn distance_matrix(&self) -> ArrayView2<'_, f64> {
        self.distances.view()
    }

    /// Largest coordinate range over the lattice axes.
    pub fn max_extent(&self) -> f64 {
        self.nodes
            .columns()
            .into_iter()
            .map(|c| {
                let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Per-axis (min, max) of node coordinates.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.nodes
            .columns()
            .into_iter()
            .map(|c| {
                (
                    c.iter().cloned().fold(f64::INFINITY, f64::min),
                    c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                )
            })
            .collect()
    }
}
