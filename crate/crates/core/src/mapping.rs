//! Explicit mapping from the data space to the lattice space by Shepard
//! (inverse distance weighted) interpolation over the trained
//! (prototype, node) pairs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::data::{squared_euclidean, split_line, Dataset, Delimiter, DistanceSpec};
use crate::error::{check_shape, Result, XimError};
use crate::lattice::Lattice;
use crate::prototypes::PrototypeSet;

/// Squared distances below this count as an exact hit.
pub const EXACT_HIT: f64 = 1e-12;
pub const DEFAULT_POWER: f64 = 2.0;

/// (source, target) reference points: source row j maps to target row j.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePairs {
    sources: Array2<f64>,
    targets: Array2<f64>,
}

impl ReferencePairs {
    pub fn new(sources: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if sources.nrows() == 0 {
            return Err(XimError::config("no reference pairs"));
        }
        check_shape("reference target count", sources.nrows(), targets.nrows())?;
        if sources.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(XimError::domain("non-finite reference coordinate"));
        }
        Ok(ReferencePairs { sources, targets })
    }

    pub fn from_model(protos: &PrototypeSet, lattice: &Lattice) -> Result<Self> {
        protos.check_lattice(lattice)?;
        Self::new(protos.matrix().to_owned(), lattice.nodes().to_owned())
    }

    pub fn len(&self) -> usize {
        self.sources.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.nrows() == 0
    }

    pub fn sources(&self) -> ArrayView2<'_, f64> {
        self.sources.view()
    }

    pub fn targets(&self) -> ArrayView2<'_, f64> {
        self.targets.view()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShepardOptions {
    pub power: f64,
    /// Interpolate from the q nearest references only. None uses all.
    pub top_q: Option<usize>,
}

impl Default for ShepardOptions {
    fn default() -> Self {
        ShepardOptions {
            power: DEFAULT_POWER,
            top_q: None,
        }
    }
}

impl ShepardOptions {
    fn validate(&self) -> Result<()> {
        if !(self.power > 0.0) || !self.power.is_finite() {
            return Err(XimError::config(format!("interpolation power must be positive, got {}", self.power)));
        }
        if self.top_q == Some(0) {
            return Err(XimError::config("top_q must be at least 1"));
        }
        Ok(())
    }
}

/// Interpolates targets from squared distances to the sources.
/// u_j = d_j^(-power/2), computed as (d_min / d_j)^(power/2) so the
/// weights stay finite for tiny or huge distances.
pub fn shepard_from_distances(
    d: &[f64],
    targets: ArrayView2<'_, f64>,
    options: &ShepardOptions,
) -> Result<Vec<f64>> {
    options.validate()?;
    check_shape("distance count", targets.nrows(), d.len())?;
    if d.is_empty() {
        return Err(XimError::config("no reference pairs"));
    }
    if d.iter().any(|v| !(*v >= 0.0)) {
        return Err(XimError::domain("negative or NaN distance"));
    }
    if let Some(j) = d.iter().position(|v| *v < EXACT_HIT) {
        return Ok(targets.row(j).to_vec());
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    if let Some(q) = options.top_q.filter(|q| *q < d.len()) {
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        order.truncate(q);
        order.sort_unstable();
    }
    let d_min = order.iter().map(|&j| d[j]).fold(f64::INFINITY, f64::min);
    let half = options.power / 2.0;
    let mut y = vec![0.0; targets.ncols()];
    let mut total = 0.0;
    for &j in &order {
        let u = (d_min / d[j]).powf(half);
        total += u;
        for (yc, t) in y.iter_mut().zip(targets.row(j)) {
            *yc += u * t;
        }
    }
    for yc in &mut y {
        *yc /= total;
    }
    Ok(y)
}

pub fn shepard_embed(
    x: ArrayView1<'_, f64>,
    pairs: &ReferencePairs,
    options: &ShepardOptions,
    dist: &DistanceSpec,
) -> Result<Vec<f64>> {
    check_shape("data vector dimension", pairs.sources.ncols(), x.len())?;
    if !matches!(dist, DistanceSpec::SquaredEuclidean) {
        return Err(XimError::Unsupported(
            "vector interpolation needs squared Euclidean distances; use shepard_from_distances".into(),
        ));
    }
    let d: Vec<f64> = pairs.sources.outer_iter().map(|w| squared_euclidean(x, w)).collect();
    shepard_from_distances(&d, pairs.targets.view(), options)
}

/// Low-dimensional coordinates of a dataset plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingResult {
    pub coords: Array2<f64>,
    pub method: String,
    /// key=value echo of the producing configuration.
    pub config: Vec<(String, String)>,
    pub seed: u64,
    pub ids: Option<Vec<String>>,
    pub labels: Option<Vec<i64>>,
}

impl EmbeddingResult {
    pub fn new(coords: Array2<f64>, method: impl Into<String>, seed: u64) -> Self {
        EmbeddingResult {
            coords,
            method: method.into(),
            config: Vec::new(),
            seed,
            ids: None,
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    /// Carries over ids and labels of the embedded data.
    pub fn annotate(mut self, data: &Dataset) -> Self {
        self.ids = data.ids().map(<[String]>::to_vec);
        self.labels = data.labels().map(<[i64]>::to_vec);
        self
    }
}

/// Row-wise Shepard embedding; rows run in parallel.
pub fn embed_dataset(
    data: &Dataset,
    pairs: &ReferencePairs,
    options: &ShepardOptions,
    dist: &DistanceSpec,
) -> Result<Array2<f64>> {
    check_shape("data dimension", pairs.sources.ncols(), data.dim())?;
    options.validate()?;
    let rows: Vec<Vec<f64>> = (0..data.len())
        .into_par_iter()
        .map(|i| shepard_embed(data.row(i), pairs, options, dist))
        .collect::<Result<_>>()?;
    Ok(to_matrix(rows, pairs.targets.ncols()))
}

/// Embedding from dissimilarities: row i of `diss_rows` holds item i's
/// dissimilarities to the training items, and node j is represented by
/// training item `medians[j]`.
pub fn embed_dissimilarities(
    diss_rows: ArrayView2<'_, f64>,
    medians: &[usize],
    targets: ArrayView2<'_, f64>,
    options: &ShepardOptions,
) -> Result<Array2<f64>> {
    check_shape("median count", targets.nrows(), medians.len())?;
    if let Some(&bad) = medians.iter().find(|&&c| c >= diss_rows.ncols()) {
        return Err(XimError::Shape {
            what: "dissimilarity row length",
            expected: bad + 1,
            found: diss_rows.ncols(),
        });
    }
    let rows: Vec<Vec<f64>> = diss_rows
        .outer_iter()
        .map(|row| {
            let d: Vec<f64> = medians.iter().map(|&c| row[c]).collect();
            shepard_from_distances(&d, targets, options)
        })
        .collect::<Result<_>>()?;
    Ok(to_matrix(rows, targets.ncols()))
}

fn to_matrix(rows: Vec<Vec<f64>>, d: usize) -> Array2<f64> {
    let n = rows.len();
    Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).expect("uniform rows")
}

/// Comma-separated embedding file: `id` (if any), `y0..`, `label` (if any),
/// with a header naming the columns. Method, seed and configuration go
/// first as `# key=value` comments.
pub fn format_embedding(e: &EmbeddingResult) -> String {
    let mut out = String::new();
    if !e.method.is_empty() {
        let _ = writeln!(out, "# method={}", e.method);
        let _ = writeln!(out, "# seed={}", e.seed);
    }
    for (k, v) in &e.config {
        let _ = writeln!(out, "# config.{k}={v}");
    }
    let mut cols = Vec::new();
    if e.ids.is_some() {
        cols.push("id".to_string());
    }
    cols.extend((0..e.dim()).map(|j| format!("y{j}")));
    if e.labels.is_some() {
        cols.push("label".to_string());
    }
    out.push_str(&cols.join(","));
    out.push('\n');
    for (i, row) in e.coords.outer_iter().enumerate() {
        let mut cells: Vec<String> = Vec::with_capacity(cols.len());
        if let Some(ids) = &e.ids {
            cells.push(ids[i].clone());
        }
        cells.extend(row.iter().map(|v| format!("{v}")));
        if let Some(labels) = &e.labels {
            cells.push(labels[i].to_string());
        }
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Reads an embedding file written by [`format_embedding`].
pub fn parse_embedding(text: &str) -> Result<EmbeddingResult> {
    let mut method = String::new();
    let mut seed = 0;
    let mut config = Vec::new();
    for line in text.lines().map(str::trim).filter_map(|l| l.strip_prefix('#')) {
        match line.trim().split_once('=') {
            Some(("method", v)) => method = v.to_string(),
            Some(("seed", v)) => seed = v.parse().map_err(|_| XimError::structure(format!("bad seed comment {v:?}")))?,
            Some((k, v)) => {
                if let Some(k) = k.strip_prefix("config.") {
                    config.push((k.to_string(), v.to_string()));
                }
            }
            None => {}
        }
    }
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| XimError::structure("empty embedding file"))?;
    let cols = split_line(header, Delimiter::Comma);
    let id_col = cols.iter().position(|c| *c == "id");
    let label_col = cols.iter().position(|c| *c == "label");
    let coord_cols: Vec<usize> = (0..cols.len()).filter(|c| Some(*c) != id_col && Some(*c) != label_col).collect();
    if coord_cols.is_empty() {
        return Err(XimError::structure("embedding file has no coordinate columns"));
    }
    let mut values = Vec::new();
    let mut ids = id_col.map(|_| Vec::new());
    let mut labels = label_col.map(|_| Vec::new());
    let mut n = 0;
    for (row, line) in lines {
        let cells = split_line(line, Delimiter::Comma);
        if cells.len() != cols.len() {
            return Err(XimError::structure(format!(
                "ragged rows: line {row} has {} columns, expected {}",
                cells.len(),
                cols.len()
            )));
        }
        for &c in &coord_cols {
            let v: f64 = cells[c].parse().map_err(|_| XimError::Parse {
                row,
                col: c + 1,
                message: format!("not a number: {:?}", cells[c]),
            })?;
            values.push(v);
        }
        if let (Some(c), Some(ids)) = (id_col, ids.as_mut()) {
            ids.push(cells[c].to_string());
        }
        if let (Some(c), Some(labels)) = (label_col, labels.as_mut()) {
            labels.push(cells[c].parse().map_err(|_| XimError::Parse {
                row,
                col: c + 1,
                message: format!("label is not an integer: {:?}", cells[c]),
            })?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(XimError::structure("embedding file has no rows"));
    }
    let coords = Array2::from_shape_vec((n, coord_cols.len()), values).map_err(|e| XimError::structure(e.to_string()))?;
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(XimError::domain("non-finite embedding coordinate"));
    }
    Ok(EmbeddingResult {
        coords,
        method,
        config,
        seed,
        ids,
        labels,
    })
}

pub fn load_embedding(path: impl AsRef<Path>) -> Result<EmbeddingResult> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| XimError::io(path, e))?;
    parse_embedding(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Topology;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SQ: DistanceSpec = DistanceSpec::SquaredEuclidean;

    #[test]
    fn worked_examples() {
        let opts = ShepardOptions::default();
        let pairs = ReferencePairs::new(array![[0.0], [3.0]], array![[0.0], [1.0]]).unwrap();
        // weights 1/1^2 and 1/2^2
        let y = shepard_embed(array![1.0].view(), &pairs, &opts, &SQ).unwrap();
        assert!((y[0] - 0.2).abs() < 1e-15);
        let y = shepard_embed(array![3.0].view(), &pairs, &opts, &SQ).unwrap();
        assert_eq!(y, vec![1.0]);

        let pairs = ReferencePairs::new(array![[-1.0, 0.0], [1.0, 0.0]], array![[0.0, 0.0], [0.0, 2.0]]).unwrap();
        let y = shepard_embed(array![0.0, 5.0].view(), &pairs, &opts, &SQ).unwrap();
        assert_eq!(y, vec![0.0, 1.0]);
        assert!(ReferencePairs::new(Array2::zeros((0, 2)), Array2::zeros((0, 2))).is_err());
    }

    fn random_pairs(rng: &mut ChaCha8Rng) -> (PrototypeSet, Lattice, ReferencePairs) {
        let lattice = Lattice::grid(3, 4, Topology::Hexagonal).unwrap();
        let protos = PrototypeSet::new(Array2::from_shape_fn((12, 3), |_| rng.random_range(-2.0..2.0))).unwrap();
        let pairs = ReferencePairs::from_model(&protos, &lattice).unwrap();
        (protos, lattice, pairs)
    }

    #[test]
    fn prototypes_map_to_their_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (protos, lattice, pairs) = random_pairs(&mut rng);
        let data = Dataset::new(protos.matrix().to_owned()).unwrap();
        let y = embed_dataset(&data, &pairs, &ShepardOptions::default(), &SQ).unwrap();
        assert_eq!(y, lattice.nodes().to_owned());
    }

    #[test]
    fn permutation_and_top_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, _, pairs) = random_pairs(&mut rng);
        let data = Dataset::new(Array2::from_shape_fn((15, 3), |_| rng.random_range(-2.0..2.0))).unwrap();
        let opts = ShepardOptions::default();
        let y = embed_dataset(&data, &pairs, &opts, &SQ).unwrap();
        let perm: Vec<usize> = (0..15).rev().collect();
        let yp = embed_dataset(&data.select(&perm), &pairs, &opts, &SQ).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(yp.row(k), y.row(i));
        }
        let full = embed_dataset(&data, &pairs, &ShepardOptions { top_q: Some(12), ..opts }, &SQ).unwrap();
        assert_eq!(full, y);
        let one = embed_dataset(&data, &pairs, &ShepardOptions { top_q: Some(1), ..opts }, &SQ).unwrap();
        // q = 1 snaps to the nearest node
        for i in 0..15 {
            let d: Vec<f64> = pairs.sources().outer_iter().map(|w| squared_euclidean(data.row(i), w)).collect();
            let j = crate::assignment::argmin(&d);
            assert_eq!(one.row(i), pairs.targets().row(j));
        }
    }

    #[test]
    fn continuity_probe() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, _, pairs) = random_pairs(&mut rng);
        for _ in 0..50 {
            let x = ndarray::Array1::from_shape_fn(3, |_| rng.random_range(-2.0..2.0));
            let mut x2 = x.clone();
            x2[0] += 1e-6;
            let a = shepard_embed(x.view(), &pairs, &ShepardOptions::default(), &SQ).unwrap();
            let b = shepard_embed(x2.view(), &pairs, &ShepardOptions::default(), &SQ).unwrap();
            let dy: f64 = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            assert!(dy <= 1e-3);
        }
    }

    #[test]
    fn dissimilarity_rows() {
        let targets = array![[0.0], [1.0]];
        let rows = array![[0.0, 1.0, 4.0], [1.0, 0.0, 1.0], [9.0, 4.0, 1.0]];
        let y = embed_dissimilarities(rows.view(), &[0, 2], targets.view(), &ShepardOptions::default()).unwrap();
        assert_eq!(y[[0, 0]], 0.0);
        assert!((y[[1, 0]] - 0.5).abs() < 1e-15);
        // d = (9, 1) squared: u = (1/9, 1), y = 1 / (10/9)
        assert!((y[[2, 0]] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn embedding_file_round_trip() {
        let mut e = EmbeddingResult::new(array![[0.1, -2.0], [1e-7, 3.5]], "c-xim", 4);
        e.ids = Some(vec!["a".into(), "b".into()]);
        e.labels = Some(vec![5, 8]);
        e.config = vec![("power".into(), "2".into())];
        let text = format_embedding(&e);
        assert!(text.starts_with("# method=c-xim\n# seed=4\n# config.power=2\nid,y0,y1,label\n"));
        let back = parse_embedding(&text).unwrap();
        assert_eq!((back.method.as_str(), back.seed), ("c-xim", 4));
        assert_eq!(back.config, e.config);
        assert_eq!(back.coords, e.coords);
        assert_eq!(back.ids, e.ids);
        assert_eq!(back.labels, e.labels);
    }

    proptest! {
        #[test]
        fn output_stays_in_node_bounding_box(
            seed in 0u64..1000,
            x in proptest::collection::vec(-5.0f64..5.0, 3),
            power in 0.5f64..4.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, lattice, pairs) = random_pairs(&mut rng);
            let y = shepard_embed(ArrayView1::from(&x), &pairs, &ShepardOptions { power, top_q: None }, &SQ).unwrap();
            for (c, (lo, hi)) in lattice.bounds().into_iter().enumerate() {
                prop_assert!(y[c] >= lo - 1e-12 && y[c] <= hi + 1e-12);
            }
        }
    }
}
