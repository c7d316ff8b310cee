//! Text model files.
//!
//! ```text
//! XIM-MODEL v1
//! method=c-xim
//! seed=7
//! config.eta=0.3
//! [lattice rectangular 100 2]
//! 0,0
//! ...
//! [prototypes 100 79]
//! ...
//! ```
//!
//! Header lines are `key=value`; sections start with `[name ...]` and hold
//! comma-separated rows. Floats are written in their shortest round-trip
//! form, so a model file reads back bit-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};

use crate::analysis::pca::PrincipalAxes;
use crate::config::Method;
use crate::data::{format_matrix, parse_matrix, Dataset};
use crate::error::{check_shape, Result, XimError};
use crate::lattice::{Lattice, Topology};
use crate::mapping::{embed_dataset, embed_dissimilarities, ReferencePairs, ShepardOptions};
use crate::prototypes::PrototypeSet;

pub const MAGIC: &str = "XIM-MODEL v1";

/// Linear projection stored by PCA models.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub mean: Array1<f64>,
    /// k x D, one component per row.
    pub components: Array2<f64>,
    pub explained_variance: Vec<f64>,
}

impl From<&PrincipalAxes> for LinearMap {
    fn from(axes: &PrincipalAxes) -> Self {
        LinearMap {
            mean: axes.mean.clone(),
            components: axes.vectors.clone(),
            explained_variance: axes.eigenvalues.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub method: Method,
    pub seed: u64,
    /// Configuration echo, written as `config.<key>=<value>`.
    pub config: Vec<(String, String)>,
    pub lattice: Option<Lattice>,
    pub prototypes: Option<PrototypeSet>,
    /// Median item per node and the number of training items.
    pub medians: Option<(Vec<usize>, usize)>,
    pub linear: Option<LinearMap>,
}

impl Model {
    pub fn new(method: Method, seed: u64) -> Self {
        Model {
            method,
            seed,
            config: Vec::new(),
            lattice: None,
            prototypes: None,
            medians: None,
            linear: None,
        }
    }

    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Input dimension expected by [`Model::embed`].
    pub fn input_dim(&self) -> Option<usize> {
        if let Some(l) = &self.linear {
            return Some(l.mean.len());
        }
        if let Some(p) = &self.prototypes {
            return Some(p.dim());
        }
        self.medians.as_ref().map(|(_, n)| *n)
    }

    /// Maps data into the embedding space. Median models without stored
    /// vectors read each row as dissimilarities to the training items.
    pub fn embed(&self, data: &Dataset, shepard: &ShepardOptions) -> Result<Array2<f64>> {
        if let Some(expected) = self.input_dim() {
            check_shape("data dimension", expected, data.dim())?;
        }
        if let Some(l) = &self.linear {
            let centered = &data.points() - &l.mean.view().insert_axis(ndarray::Axis(0));
            return Ok(centered.dot(&l.components.t()));
        }
        let lattice = self.lattice.as_ref().ok_or_else(|| XimError::Model("model has no lattice".into()))?;
        if let Some(p) = &self.prototypes {
            let pairs = ReferencePairs::from_model(p, lattice)?;
            return embed_dataset(data, &pairs, shepard, &crate::data::DistanceSpec::SquaredEuclidean);
        }
        if let Some((medians, _)) = &self.medians {
            return embed_dissimilarities(data.points(), medians, lattice.nodes(), shepard);
        }
        Err(XimError::Model("model has neither prototypes nor medians".into()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "method={}", self.method);
        let _ = writeln!(out, "seed={}", self.seed);
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{k}={v}");
        }
        if let Some(l) = &self.lattice {
            write_section(&mut out, &format!("lattice {}", l.topology()), l.nodes());
        }
        if let Some(p) = &self.prototypes {
            write_section(&mut out, "prototypes", p.matrix());
        }
        if let Some((medians, n)) = &self.medians {
            let _ = writeln!(out, "[medians {} {n}]", medians.len());
            for m in medians {
                let _ = writeln!(out, "{m}");
            }
        }
        if let Some(l) = &self.linear {
            write_section(&mut out, "mean", l.mean.view().insert_axis(ndarray::Axis(0)));
            write_section(&mut out, "components", l.components.view());
            let var = Array1::from(l.explained_variance.clone());
            write_section(&mut out, "variance", var.view().insert_axis(ndarray::Axis(0)));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Model> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        match lines.next() {
            Some((_, MAGIC)) => {}
            Some((_, other)) if other.starts_with("XIM-MODEL") => {
                return Err(model_err(1, format!("unsupported model version {other:?}")))
            }
            _ => return Err(model_err(1, "missing XIM-MODEL v1 header")),
        }
        let mut method = None;
        let mut seed = None;
        let mut config = Vec::new();
        let mut sections: Vec<(usize, Vec<String>, Vec<&str>)> = Vec::new();
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            if let Some(head) = line.strip_prefix('[') {
                let head = head.strip_suffix(']').ok_or_else(|| model_err(no, "unterminated section header"))?;
                sections.push((no, head.split_whitespace().map(str::to_string).collect(), Vec::new()));
                continue;
            }
            if let Some((_, _, rows)) = sections.last_mut() {
                rows.push(line);
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| model_err(no, format!("expected key=value, got {line:?}")))?;
            match k {
                "method" => method = Some(v.parse::<Method>().map_err(|e| model_err(no, e.to_string()))?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| model_err(no, format!("bad seed {v:?}")))?),
                _ => match k.strip_prefix("config.") {
                    Some(key) => config.push((key.to_string(), v.to_string())),
                    None => return Err(model_err(no, format!("unknown header key {k:?}"))),
                },
            }
        }
        let method = method.ok_or_else(|| model_err(1, "missing method line"))?;
        let mut model = Model {
            config,
            ..Model::new(method, seed.ok_or_else(|| model_err(1, "missing seed line"))?)
        };
        let (mut mean, mut components, mut variance) = (None, None, None);
        for (no, head, rows) in sections {
            let name = head.first().map(String::as_str).unwrap_or("");
            match name {
                "lattice" => {
                    let topo: Topology = head.get(1).ok_or_else(|| model_err(no, "lattice topology missing"))?.parse()?;
                    let nodes = section_matrix(no, &head[2..], &rows)?;
                    model.lattice = Some(Lattice::from_nodes(nodes, topo).map_err(|e| model_err(no, e.to_string()))?);
                }
                "prototypes" => {
                    let m = section_matrix(no, &head[1..], &rows)?;
                    model.prototypes = Some(PrototypeSet::new(m).map_err(|e| model_err(no, e.to_string()))?);
                }
                "medians" => {
                    let dims = section_dims(no, &head[1..])?;
                    let idx: Vec<usize> = rows
                        .iter()
                        .map(|r| r.trim().parse::<usize>().map_err(|_| model_err(no, format!("bad median index {r:?}"))))
                        .collect::<Result<_>>()?;
                    if idx.len() != dims.0 || idx.iter().any(|&i| i >= dims.1) {
                        return Err(model_err(no, "median section does not match its header"));
                    }
                    model.medians = Some((idx, dims.1));
                }
                "mean" => mean = Some(section_matrix(no, &head[1..], &rows)?),
                "components" => components = Some(section_matrix(no, &head[1..], &rows)?),
                "variance" => variance = Some(section_matrix(no, &head[1..], &rows)?),
                other => return Err(model_err(no, format!("unknown section {other:?}"))),
            }
        }
        match (mean, components, variance) {
            (Some(m), Some(c), Some(v)) => {
                if m.nrows() != 1 || v.nrows() != 1 || m.ncols() != c.ncols() || v.ncols() != c.nrows() {
                    return Err(model_err(1, "inconsistent linear map sections"));
                }
                model.linear = Some(LinearMap {
                    mean: m.row(0).to_owned(),
                    components: c,
                    explained_variance: v.row(0).to_vec(),
                });
            }
            (None, None, None) => {}
            _ => return Err(model_err(1, "incomplete linear map sections")),
        }
        if let (Some(l), Some(p)) = (&model.lattice, &model.prototypes) {
            if l.len() != p.len() {
                return Err(model_err(1, "prototype and node counts differ"));
            }
        }
        if model.linear.is_none() && model.lattice.is_none() {
            return Err(model_err(1, "model has no lattice"));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| XimError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| XimError::io(path, e))?;
        Model::parse(&text)
    }
}

fn model_err(line: usize, msg: impl std::fmt::Display) -> XimError {
    XimError::Model(format!("line {line}: {msg}"))
}

fn write_section(out: &mut String, name: &str, m: ArrayView2<'_, f64>) {
    let _ = writeln!(out, "[{name} {} {}]", m.nrows(), m.ncols());
    out.push_str(&format_matrix(m));
}

fn section_dims(no: usize, dims: &[String]) -> Result<(usize, usize)> {
    match dims {
        [r, c] => Ok((
            r.parse().map_err(|_| model_err(no, "bad row count"))?,
            c.parse().map_err(|_| model_err(no, "bad column count"))?,
        )),
        _ => Err(model_err(no, "section header needs row and column counts")),
    }
}

fn section_matrix(no: usize, dims: &[String], rows: &[&str]) -> Result<Array2<f64>> {
    let (r, c) = section_dims(no, dims)?;
    let m = parse_matrix(&rows.join("\n")).map_err(|e| model_err(no, e.to_string()))?;
    if m.dim() != (r, c) {
        return Err(model_err(no, format!("section is {}x{}, header says {r}x{c}", m.nrows(), m.ncols())));
    }
    Ok(m)
}
