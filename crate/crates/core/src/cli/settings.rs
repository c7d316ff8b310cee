//! Run configuration: `key=value` lines with `#` comments.
//!
//! One flat key space serves every command. Values are kept as text and
//! parsed on use, so an error always names the key it came from.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::analysis::protocol::{GridSpec, MethodSpec, ProtocolOptions};
use crate::assignment::BestMatchRule;
use crate::batch::{BatchOptions, Candidates, MedianOptions};
use crate::config::{Method, Schedule, TrainConfig, Weighting};
use crate::data::{split_line, ColumnRef, Delimiter, LoadOptions};
use crate::kernels::BandwidthPolicy;
use crate::lattice::Topology;
use crate::mapping::ShepardOptions;
use crate::prototypes::InitPolicy;

use super::{CliError, ExitKind};

/// Every recognised key with its default and a short description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("method", "c-xim", "xim, t-xim, c-xim, som, batch-xim, median-xim or pca"),
    ("methods", "som,c-xim,pca", "comma-separated methods compared by `evaluate`"),
    ("seed", "0", "seed for every random stream"),
    ("rows", "10", "lattice rows"),
    ("cols", "10", "lattice columns"),
    ("topology", "rectangular", "rectangular or hexagonal"),
    ("t_max", "20000", "online iterations"),
    ("epsilon_start", "0.9", "initial learning rate"),
    ("epsilon_end", "0.01", "final learning rate"),
    ("sigma_start", "auto", "initial ordering-space width (auto: half the lattice extent)"),
    ("sigma_end", "auto", "final ordering-space width (auto: 0.5)"),
    ("gamma_start", "auto", "initial exploration-space width (auto: from the data diameter)"),
    ("gamma_end", "auto", "final exploration-space width (auto: median 1-NN distance)"),
    ("bandwidth", "global", "global, knn or perplexity"),
    ("knn_start", "10", "neighbor count at the start when bandwidth=knn"),
    ("knn_end", "1", "neighbor count at the end when bandwidth=knn"),
    ("perplexity", "30", "target perplexity when bandwidth=perplexity"),
    ("eta", "0.3", "repulsion weight in [0, 1]"),
    ("weighting", "eta", "eta or unweighted"),
    ("prefactor", "false", "keep the 1/gamma^2 factor of the learning rule"),
    ("best_match", "min_distance", "min_distance, heskes or gkl"),
    ("init", "samples", "samples or pca_plane"),
    ("log_stride", "1000", "log every n-th online iteration"),
    ("damping", "0.5", "batch step damping in (0, 1]"),
    ("batch_tol", "1e-9", "batch convergence tolerance"),
    ("batch_max_iters", "500", "batch iteration cap"),
    ("anneal_iters", "auto", "batch annealing length (auto: half the cap)"),
    ("voronoi", "false", "aggregate batch attraction per Voronoi cell"),
    ("median_rule", "gkl", "median best-match rule: gkl or min_distance"),
    ("median_eta", "0.5", "median repulsion weight"),
    ("median_max_iters", "100", "median iteration cap"),
    ("median_candidates", "all", "all or voronoi"),
    ("input", "vectors", "vectors or dissimilarity (median-xim only)"),
    ("power", "2", "Shepard interpolation power"),
    ("top_q", "all", "interpolate from the q nearest references"),
    ("delimiter", "auto", "auto, comma, tab or whitespace"),
    ("header", "auto", "auto, true or false"),
    ("label_column", "auto", "auto, none, last or a 1-based column"),
    ("id_column", "auto", "auto, none, last or a 1-based column"),
    ("runs", "10", "evaluation runs"),
    ("fraction", "0.95", "evaluation subsample fraction"),
    ("k_lo", "1", "smallest neighborhood size for T and C"),
    ("k_hi", "50", "largest neighborhood size for T and C"),
];

/// Keys that describe the run rather than the input files or evaluation.
const MODEL_KEYS_END: &str = "top_q";

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: Vec<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            values: KEYS.iter().map(|(_, d, _)| d.to_string()).collect(),
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::new(ExitKind::Config, msg)
}

fn index_of(key: &str) -> Result<usize, CliError> {
    KEYS.iter()
        .position(|(k, _, _)| *k == key)
        .ok_or_else(|| config_error(format!("unknown config key `{key}`")))
}

impl Settings {
    pub fn get(&self, key: &str) -> &str {
        let i = index_of(key).expect("key is registered");
        &self.values[i]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let i = index_of(key.trim())?;
        self.values[i] = value.trim().to_string();
        Ok(())
    }

    /// Applies a `key=value` assignment as given to `--set`.
    pub fn assign(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| config_error(format!("expected key=value, got `{pair}`")))?;
        self.set(k, v)
    }

    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_error(format!("{origin}:{}: expected key=value", no + 1)))?;
            self.set(k, v).map_err(|e| config_error(format!("{origin}:{}: {}", no + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.get(key);
        v.parse::<T>()
            .map_err(|e| config_error(format!("config key `{key}`: invalid value `{v}`: {e}")))
    }

    fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(config_error(format!("config key `{key}`: expected true or false, got `{v}`"))),
        }
    }

    /// None for `auto`.
    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if self.get(key) == "auto" {
            Ok(None)
        } else {
            self.parse(key).map(Some)
        }
    }

    fn schedule(&self, prefix: &str) -> Result<Option<Schedule>, CliError> {
        let (ks, ke) = (format!("{prefix}_start"), format!("{prefix}_end"));
        match (self.optional::<f64>(&ks)?, self.optional::<f64>(&ke)?) {
            (None, None) => Ok(None),
            (Some(start), Some(end)) => Schedule::new(start, end)
                .map(Some)
                .map_err(|e| config_error(format!("config key `{ks}`: {e}"))),
            (Some(_), None) => Err(config_error(format!("config key `{ke}` must be set together with `{ks}`"))),
            (None, Some(_)) => Err(config_error(format!("config key `{ks}` must be set together with `{ke}`"))),
        }
    }

    pub fn method(&self) -> Result<Method, CliError> {
        self.parse("method")
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.parse("seed")
    }

    pub fn methods(&self) -> Result<Vec<Method>, CliError> {
        let list = self.get("methods");
        let methods = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<Method>()
                    .map_err(|e| config_error(format!("config key `methods`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if methods.is_empty() {
            return Err(config_error("config key `methods` lists no method"));
        }
        Ok(methods)
    }

    pub fn dissimilarity_input(&self) -> Result<bool, CliError> {
        match self.get("input") {
            "vectors" => Ok(false),
            "dissimilarity" => Ok(true),
            v => Err(config_error(format!("config key `input`: expected vectors or dissimilarity, got `{v}`"))),
        }
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        let grid = GridSpec {
            rows: self.parse("rows")?,
            cols: self.parse("cols")?,
            topology: self.parse::<Topology>("topology")?,
        };
        if grid.rows == 0 || grid.cols == 0 {
            return Err(config_error("config keys `rows` and `cols` must be at least 1"));
        }
        Ok(grid)
    }

    pub fn train_config(&self, method: Method) -> Result<TrainConfig, CliError> {
        let bandwidth = match self.get("bandwidth") {
            "global" => BandwidthPolicy::Global,
            "knn" => BandwidthPolicy::KnnBall {
                k_start: self.parse("knn_start")?,
                k_end: self.parse("knn_end")?,
            },
            "perplexity" => BandwidthPolicy::Perplexity(self.parse("perplexity")?),
            v => {
                return Err(config_error(format!(
                    "config key `bandwidth`: expected global, knn or perplexity, got `{v}`"
                )))
            }
        };
        let epsilon = self
            .schedule("epsilon")?
            .ok_or_else(|| config_error("config keys `epsilon_start` and `epsilon_end` cannot be auto"))?;
        let config = TrainConfig {
            method,
            t_max: self.parse("t_max")?,
            epsilon,
            sigma: self.schedule("sigma")?,
            gamma: self.schedule("gamma")?,
            bandwidth,
            eta: self.parse("eta")?,
            weighting: self.parse::<Weighting>("weighting")?,
            retain_prefactor: self.flag("prefactor")?,
            best_match: self.parse::<BestMatchRule>("best_match")?,
            seed: self.seed()?,
            init: self.parse::<InitPolicy>("init")?,
            log_stride: self.parse("log_stride")?,
        };
        config.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(config)
    }

    pub fn batch_options(&self) -> Result<BatchOptions, CliError> {
        let opts = BatchOptions {
            damping: self.parse("damping")?,
            tol: self.parse("batch_tol")?,
            max_iters: self.parse("batch_max_iters")?,
            anneal_iters: self.optional("anneal_iters")?,
            voronoi: self.flag("voronoi")?,
        };
        if !(opts.damping > 0.0 && opts.damping <= 1.0) {
            return Err(config_error(format!("config key `damping`: must lie in (0, 1], got {}", opts.damping)));
        }
        if !(opts.tol > 0.0) {
            return Err(config_error("config key `batch_tol`: must be positive"));
        }
        Ok(opts)
    }

    pub fn median_options(&self) -> Result<MedianOptions, CliError> {
        let opts = MedianOptions {
            rule: self.parse::<BestMatchRule>("median_rule")?,
            eta: self.parse("median_eta")?,
            max_iters: self.parse("median_max_iters")?,
            candidates: self.parse::<Candidates>("median_candidates")?,
            seed: self.seed()?,
        };
        if !(0.0..=1.0).contains(&opts.eta) {
            return Err(config_error("config key `median_eta`: must lie in [0, 1]"));
        }
        Ok(opts)
    }

    pub fn shepard(&self) -> Result<ShepardOptions, CliError> {
        let power: f64 = self.parse("power")?;
        if !(power > 0.0) || !power.is_finite() {
            return Err(config_error(format!("config key `power`: must be positive, got {power}")));
        }
        let top_q = match self.get("top_q") {
            "all" => None,
            _ => Some(self.parse::<usize>("top_q")?),
        };
        if top_q == Some(0) {
            return Err(config_error("config key `top_q`: must be at least 1"));
        }
        Ok(ShepardOptions { power, top_q })
    }

    pub fn method_spec(&self, method: Method) -> Result<MethodSpec, CliError> {
        Ok(MethodSpec {
            name: method.to_string(),
            train: self.train_config(method)?,
            grid: self.grid()?,
            batch: self.batch_options()?,
            median: self.median_options()?,
            shepard: self.shepard()?,
        })
    }

    pub fn protocol(&self) -> Result<ProtocolOptions, CliError> {
        let opts = ProtocolOptions {
            runs: self.parse("runs")?,
            fraction: self.parse("fraction")?,
            k_lo: self.parse("k_lo")?,
            k_hi: self.parse("k_hi")?,
            seed: self.seed()?,
        };
        if opts.runs == 0 {
            return Err(config_error("config key `runs`: must be at least 1"));
        }
        if !(opts.fraction > 0.0 && opts.fraction <= 1.0) {
            return Err(config_error("config key `fraction`: must lie in (0, 1]"));
        }
        if opts.k_lo == 0 || opts.k_lo > opts.k_hi {
            return Err(config_error("config keys `k_lo` and `k_hi`: need 1 <= k_lo <= k_hi"));
        }
        Ok(opts)
    }

    /// Resolves file-layout keys against the first data line of `text`.
    pub fn load_options(&self, text: &str) -> Result<LoadOptions, CliError> {
        let delimiter = match self.get("delimiter") {
            "auto" => Delimiter::Auto,
            "comma" => Delimiter::Comma,
            "tab" => Delimiter::Char('\t'),
            "whitespace" => Delimiter::Whitespace,
            v => {
                return Err(config_error(format!(
                    "config key `delimiter`: expected auto, comma, tab or whitespace, got `{v}`"
                )))
            }
        };
        let first = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .unwrap_or("");
        let cells = split_line(first, delimiter);
        let header = match self.get("header") {
            "auto" => cells.iter().any(|c| c.parse::<f64>().is_err()),
            _ => self.flag("header")?,
        };
        let named = |name: &str| if header { cells.iter().position(|c| *c == name) } else { None };
        let column = |key: &str, name: &str| -> Result<Option<ColumnRef>, CliError> {
            match self.get(key) {
                "auto" => Ok(named(name).map(ColumnRef::Index)),
                "none" => Ok(None),
                "last" => Ok(Some(ColumnRef::Last)),
                _ => match self.parse::<usize>(key)? {
                    0 => Err(config_error(format!("config key `{key}`: columns are 1-based"))),
                    c => Ok(Some(ColumnRef::Index(c - 1))),
                },
            }
        };
        Ok(LoadOptions {
            delimiter,
            header,
            label_column: column("label_column", "label")?,
            id_column: column("id_column", "id")?,
        })
    }

    /// Run-describing keys and their values, for model and embedding files.
    pub fn echo(&self) -> Vec<(String, String)> {
        let end = index_of(MODEL_KEYS_END).expect("key is registered");
        KEYS[..=end]
            .iter()
            .zip(&self.values)
            .filter(|((k, _, _), _)| *k != "methods")
            .map(|((k, _, _), v)| (k.to_string(), v.clone()))
            .collect()
    }

    /// Applies a model's configuration echo, skipping keys this version
    /// does not know.
    pub fn apply_echo(&mut self, echo: &[(String, String)]) {
        for (k, v) in echo {
            let _ = self.set(k, v);
        }
    }
}

/// Text for `xim keys`-style help: one line per key.
pub fn describe_keys() -> String {
    let width = KEYS.iter().map(|(k, _, _)| k.len()).max().unwrap_or(0);
    KEYS.iter()
        .map(|(k, d, h)| format!("  {k:<width$}  {h} [default: {d}]\n"))
        .collect()
}
