//! Datasets, dissimilarity matrices and the delimited text format they are
//! read from.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{check_shape, Result, XimError};

/// N data vectors in D dimensions, with optional integer labels and text ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Array2<f64>,
    labels: Option<Vec<i64>>,
    ids: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        Self::with_annotations(points, None, None)
    }

    pub fn with_annotations(
        points: Array2<f64>,
        labels: Option<Vec<i64>>,
        ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 || d == 0 {
            return Err(XimError::structure(format!(
                "dataset must have at least one row and one column, got {n}x{d}"
            )));
        }
        if let Some(((i, j), v)) = points.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(XimError::domain(format!(
                "non-finite value {v} at row {}, col {}",
                i + 1,
                j + 1
            )));
        }
        if let Some(l) = &labels {
            check_shape("label count", n, l.len())?;
        }
        if let Some(ids) = &ids {
            check_shape("id count", n, ids.len())?;
        }
        Ok(Dataset {
            points,
            labels,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// Rows `indices` in the given order, annotations carried along.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: self.points.select(Axis(0), indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            ids: self
                .ids
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    /// Per-dimension population standard deviation.
    pub fn column_std(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.points
            .axis_iter(Axis(1))
            .map(|col| {
                let mean = col.sum() / n;
                (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
            })
            .collect()
    }
}

/// Square matrix of nonnegative dissimilarities with a zero diagonal.
/// Symmetry is not required.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    values: Array2<f64>,
    symmetric: bool,
}

/// Diagonal entries at or above this are rejected rather than zeroed.
pub const DIAGONAL_TOLERANCE: f64 = 1e-12;

impl DissimilarityMatrix {
    pub fn new(mut values: Array2<f64>) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c {
            return Err(XimError::structure(format!(
                "dissimilarity matrix must be square, got {r}x{c}"
            )));
        }
        if r == 0 {
            return Err(XimError::structure("empty dissimilarity matrix"));
        }
        for ((i, j), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(XimError::domain(format!(
                    "non-finite dissimilarity at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
            if v < 0.0 {
                return Err(XimError::domain(format!(
                    "negative dissimilarity {v} at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
        for i in 0..r {
            if values[[i, i]] >= DIAGONAL_TOLERANCE {
                return Err(XimError::domain(format!(
                    "nonzero diagonal entry {} at ({}, {})",
                    values[[i, i]],
                    i + 1,
                    i + 1
                )));
            }
            values[[i, i]] = 0.0;
        }
        let symmetric = check_symmetric(&values);
        Ok(DissimilarityMatrix { values, symmetric })
    }

    /// Squared Euclidean dissimilarities between all rows of `data`.
    pub fn squared_euclidean(data: &Dataset) -> Self {
        let values = pairwise_squared(data.points());
        DissimilarityMatrix {
            values,
            symmetric: true,
        }
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

fn check_symmetric(values: &Array2<f64>) -> bool {
    let n = values.nrows();
    (0..n).all(|i| (i + 1..n).all(|j| values[[i, j]] == values[[j, i]]))
}

/// How distances in the exploration space are measured.
#[derive(Debug, Clone)]
pub enum DistanceSpec {
    /// (x - w)^2, summed over coordinates. No square root is taken.
    SquaredEuclidean,
    /// Distances between items looked up in a matrix.
    Precomputed(Arc<DissimilarityMatrix>),
}

impl DistanceSpec {
    /// Distance between two vectors. Only meaningful for vector specs.
    pub fn between(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
        match self {
            DistanceSpec::SquaredEuclidean => {
                check_shape("vector dimension", a.len(), b.len())?;
                Ok(squared_euclidean(a, b))
            }
            DistanceSpec::Precomputed(_) => Err(XimError::Unsupported(
                "precomputed dissimilarities cannot compare raw vectors".into(),
            )),
        }
    }

    /// Full N x N matrix of distances between the items of `data`.
    pub fn pairwise(&self, data: &Dataset) -> Result<Array2<f64>> {
        match self {
            DistanceSpec::SquaredEuclidean => Ok(pairwise_squared(data.points())),
            DistanceSpec::Precomputed(m) => {
                check_shape("dissimilarity matrix size", data.len(), m.len())?;
                Ok(m.values().to_owned())
            }
        }
    }
}

#[inline]
pub fn squared_euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn pairwise_squared(points: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = points.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let d = squared_euclidean(points.row(i), points.row(j));
            out[[i, j]] = d;
            out[[j, i]] = d;
        }
    }
    out
}

/// Which column of a delimited file carries a label or id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRef {
    /// 0-based column index.
    Index(usize),
    Last,
}

impl ColumnRef {
    fn resolve(self, width: usize) -> usize {
        match self {
            ColumnRef::Index(i) => i,
            ColumnRef::Last => width.saturating_sub(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    /// Comma if the line contains one, else runs of whitespace.
    #[default]
    Auto,
    Comma,
    Whitespace,
    Char(char),
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub delimiter: Delimiter,
    pub header: bool,
    pub label_column: Option<ColumnRef>,
    pub id_column: Option<ColumnRef>,
}

pub(crate) fn split_line(line: &str, delimiter: Delimiter) -> Vec<&str> {
    match delimiter {
        Delimiter::Comma => line.split(',').map(str::trim).collect(),
        Delimiter::Char(c) => line.split(c).map(str::trim).collect(),
        Delimiter::Whitespace => line.split_whitespace().collect(),
        Delimiter::Auto => {
            if line.contains(',') {
                line.split(',').map(str::trim).collect()
            } else {
                line.split_whitespace().collect()
            }
        }
    }
}

/// Data lines with their 1-based line numbers; blank lines and `#`
/// comments are dropped.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| XimError::Parse {
        row,
        col,
        message: format!("not a number: {cell:?}"),
    })?;
    if !v.is_finite() {
        return Err(XimError::Parse {
            row,
            col,
            message: format!("non-finite value: {cell:?}"),
        });
    }
    Ok(v)
}

pub fn parse_dataset(text: &str, options: &LoadOptions) -> Result<Dataset> {
    let mut lines = data_lines(text);
    if options.header {
        lines.next();
    }
    let mut width = None;
    let mut values = Vec::new();
    let mut labels = options.label_column.map(|_| Vec::new());
    let mut ids = options.id_column.map(|_| Vec::new());
    let mut n = 0;
    let mut feature_count = 0;
    for (row, line) in lines {
        let cells = split_line(line, options.delimiter);
        let w = *width.get_or_insert(cells.len());
        if cells.len() != w {
            return Err(XimError::structure(format!(
                "ragged rows: line {row} has {} columns, expected {w}",
                cells.len()
            )));
        }
        let label_col = options.label_column.map(|c| c.resolve(w));
        let id_col = options.id_column.map(|c| c.resolve(w));
        for special in [label_col, id_col].into_iter().flatten() {
            if special >= w {
                return Err(XimError::config(format!(
                    "column {} out of range for {w}-column rows",
                    special + 1
                )));
            }
        }
        feature_count = 0;
        for (c, cell) in cells.iter().enumerate() {
            if Some(c) == label_col {
                let label: i64 = cell.parse().map_err(|_| XimError::Parse {
                    row,
                    col: c + 1,
                    message: format!("label is not an integer: {cell:?}"),
                })?;
                labels.as_mut().unwrap().push(label);
            } else if Some(c) == id_col {
                ids.as_mut().unwrap().push(cell.to_string());
            } else {
                values.push(parse_cell(cell, row, c + 1)?);
                feature_count += 1;
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(XimError::structure("no data rows"));
    }
    let points = Array2::from_shape_vec((n, feature_count), values)
        .map_err(|e| XimError::structure(e.to_string()))?;
    Dataset::with_annotations(points, labels, ids)
}

pub fn load_dataset(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| XimError::io(path, e))?;
    parse_dataset(&text, options)
}

/// Parses a delimited numeric matrix with no header or annotation columns.
pub fn parse_matrix(text: &str) -> Result<Array2<f64>> {
    let ds = parse_dataset(text, &LoadOptions::default())?;
    Ok(ds.points)
}

pub fn parse_dissimilarity(text: &str) -> Result<DissimilarityMatrix> {
    DissimilarityMatrix::new(parse_matrix(text)?)
}

pub fn load_dissimilarity(path: impl AsRef<Path>) -> Result<DissimilarityMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| XimError::io(path, e))?;
    parse_dissimilarity(&text)
}

/// Comma-separated rendering. Floats use the shortest representation that
/// parses back to the same bits. Labels go last, ids first.
pub fn format_dataset(data: &Dataset, header: bool) -> String {
    let mut out = String::new();
    if header {
        let mut cols = Vec::new();
        if data.ids.is_some() {
            cols.push("id".to_string());
        }
        cols.extend((0..data.dim()).map(|j| format!("x{j}")));
        if data.labels.is_some() {
            cols.push("label".to_string());
        }
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    for (i, row) in data.points.outer_iter().enumerate() {
        let mut first = true;
        if let Some(ids) = &data.ids {
            out.push_str(&ids[i]);
            first = false;
        }
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        if let Some(labels) = &data.labels {
            let _ = write!(out, ",{}", labels[i]);
        }
        out.push('\n');
    }
    out
}

pub fn format_matrix(m: ArrayView2<'_, f64>) -> String {
    let mut out = String::new();
    for row in m.outer_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
