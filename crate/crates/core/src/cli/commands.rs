use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::cost::xim_cost;
use crate::analysis::pca::principal_axes;
use crate::analysis::protocol::{
    best_per_metric, evaluate_protocol, format_report_machine, format_report_table, MethodSpec,
};
use crate::batch::{batch_xim_train, median_xim_train};
use crate::config::{default_gamma, default_sigma, Method, Schedule};
use crate::data::{format_dataset, parse_dataset, Dataset, DissimilarityMatrix};
use crate::error::XimError;
use crate::kernels::{ExplorationKernel, KernelSpec, BANDWIDTH_FLOOR};
use crate::mapping::{format_embedding, load_embedding, EmbeddingResult};
use crate::model_file::{LinearMap, Model};
use crate::online::train;
use crate::prototypes::PrototypeSet;
use crate::synth::{generate, SynthSpec};

use super::plot::render_svg;
use super::settings::{describe_keys, Settings};
use super::{CliError, Command, ConfigArgs, ExitKind};

type CliResult<T> = Result<T, CliError>;

pub(super) fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Train {
            data,
            output,
            log,
            method,
            t_max,
            rows,
            cols,
            config,
        } => {
            let mut s = settings_from(&config, None)?;
            set_opt(&mut s, "method", method)?;
            set_opt(&mut s, "t_max", t_max)?;
            set_opt(&mut s, "rows", rows)?;
            set_opt(&mut s, "cols", cols)?;
            let log = log.unwrap_or_else(|| with_suffix(&output, ".log"));
            cmd_train(&s, &data, &output, &log)
        }
        Command::Embed {
            model,
            data,
            output,
            power,
            top_q,
            config,
        } => {
            let model = Model::load(&model).map_err(|e| model_error(&model, e))?;
            let mut s = settings_from(&config, Some(&model.config))?;
            set_opt(&mut s, "power", power)?;
            set_opt(&mut s, "top_q", top_q)?;
            cmd_embed(&s, &model, &data, &output)
        }
        Command::Evaluate {
            data,
            output,
            machine,
            methods,
            runs,
            fraction,
            k,
            grid,
            config,
        } => {
            let mut s = settings_from(&config, None)?;
            set_opt(&mut s, "methods", methods)?;
            set_opt(&mut s, "runs", runs)?;
            set_opt(&mut s, "fraction", fraction)?;
            if let Some(k) = k {
                let (lo, hi) = k.split_once("..").unwrap_or((&k, &k));
                s.set("k_lo", lo)?;
                s.set("k_hi", hi)?;
            }
            let machine = machine.unwrap_or_else(|| with_suffix(&output, ".machine"));
            cmd_evaluate(&s, &parse_grid(&grid)?, &data, &output, &machine)
        }
        Command::Plot {
            embedding,
            output,
            labels,
            title,
        } => cmd_plot(&embedding, &output, labels.as_deref(), &title),
        Command::Synth {
            n,
            dims,
            clusters,
            separation,
            seed,
            output,
        } => {
            let cluster_sizes = clusters
                .split(',')
                .map(|c| c.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::new(ExitKind::Config, format!("--clusters: expected sizes like 22,125, got `{clusters}`")))?;
            let total: usize = cluster_sizes.iter().sum();
            if let Some(n) = n {
                if n != total {
                    return Err(CliError::new(
                        ExitKind::Config,
                        format!("--n {n} does not equal the cluster sizes' sum {total}"),
                    ));
                }
            }
            let data = generate(&SynthSpec {
                dims,
                cluster_sizes,
                separation,
                seed,
            })?;
            let text = format_dataset(&data, true);
            match output {
                Some(path) => write_file(&path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Keys => {
            print!("{}", describe_keys());
            Ok(())
        }
    }
}

fn settings_from(args: &ConfigArgs, base: Option<&[(String, String)]>) -> CliResult<Settings> {
    let mut s = Settings::default();
    if let Some(echo) = base {
        s.apply_echo(echo);
    }
    if let Some(path) = &args.config {
        s.apply_file(path)?;
    }
    for pair in &args.set {
        s.assign(pair)?;
    }
    set_opt(&mut s, "seed", args.seed)?;
    Ok(s)
}

fn set_opt<T: ToString>(s: &mut Settings, key: &str, value: Option<T>) -> CliResult<()> {
    match value {
        Some(v) => s.set(key, &v.to_string()),
        None => Ok(()),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(suffix);
    PathBuf::from(os)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::new(ExitKind::Internal, format!("cannot write {}: {e}", path.display())))
}

fn data_error(path: &Path, e: XimError) -> CliError {
    let kind = match e {
        XimError::Config(_) => ExitKind::Config,
        _ => ExitKind::Data,
    };
    CliError::new(kind, format!("{}: {e}", path.display()))
}

fn model_error(path: &Path, e: XimError) -> CliError {
    CliError::new(ExitKind::Model, format!("{}: {e}", path.display()))
}

fn read_data(path: &Path, s: &Settings) -> CliResult<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(ExitKind::Data, format!("cannot read data {}: {e}", path.display())))?;
    let options = s.load_options(&text)?;
    parse_dataset(&text, &options).map_err(|e| data_error(path, e))
}

/// Widths for data given only as squared dissimilarities, mirroring the
/// vector defaults.
fn dissimilarity_gamma(diss: &DissimilarityMatrix) -> Schedule {
    let n = diss.len();
    if n < 2 {
        return Schedule::constant(1.0);
    }
    let values = diss.values();
    let max = values.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut nn: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| values[[i, j]])
                .fold(f64::INFINITY, f64::min)
                .max(0.0)
                .sqrt()
        })
        .collect();
    nn.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { nn[n / 2] } else { 0.5 * (nn[n / 2 - 1] + nn[n / 2]) };
    Schedule {
        start: (max / 8.0).sqrt().max(BANDWIDTH_FLOOR),
        end: median.max(BANDWIDTH_FLOOR),
    }
}

fn shared_or(g: &ExplorationKernel, fallback: f64) -> crate::Result<KernelSpec> {
    match g {
        ExplorationKernel::Shared(k) => Ok(*k),
        ExplorationKernel::PerSample { .. } => KernelSpec::gaussian(fallback),
    }
}

struct Trained {
    model: Model,
    log: String,
    summary: String,
}

fn fit_model(data: &Dataset, s: &Settings, method: Method) -> CliResult<Trained> {
    let spec = s.method_spec(method)?;
    let seed = spec.train.seed;
    let mut model = Model {
        config: s.echo(),
        ..Model::new(method, seed)
    };
    let mut log = String::new();
    if method == Method::Pca {
        let k = 2.min(data.dim()).min(data.len().saturating_sub(1));
        if k == 0 {
            return Err(CliError::new(ExitKind::Data, "pca needs at least 2 samples"));
        }
        let axes = principal_axes(data.points(), k)?;
        log.push_str("component,variance\n");
        for (i, v) in axes.eigenvalues.iter().enumerate() {
            let _ = writeln!(log, "{i},{v}");
        }
        let explained = axes.eigenvalues.iter().sum::<f64>() / axes.total_variance;
        model.linear = Some(LinearMap::from(&axes));
        let summary = format!("method=pca components={k} explained_variance={explained:.6}");
        return Ok(Trained { model, log, summary });
    }

    let lattice = spec.grid.build()?;
    let m = lattice.len();
    let config = &spec.train;
    let summary;
    match method {
        Method::BatchXim => {
            let out = batch_xim_train(data, &lattice, config, &spec.batch)?;
            let r = &out.report;
            let gamma_end = config.resolve(data, &lattice)?.gamma.end;
            let h = KernelSpec::new(config.ordering_family(), r.final_sigma)?;
            let g = shared_or(&r.final_g, gamma_end)?;
            let cost = xim_cost(data, &out.prototypes, &lattice, &h, &g)?.total / data.len() as f64;
            log.push_str("iterations,converged,residual,target_gap,stationarity,final_sigma,degenerate_nodes\n");
            let _ = writeln!(
                log,
                "{},{},{},{},{},{},{}",
                r.iterations, r.converged, r.residual, r.target_gap, r.stationarity, r.final_sigma, r.degenerate_nodes
            );
            summary = format!(
                "method={method} M={m} iterations={} converged={} xim_cost={cost:.6}",
                r.iterations, r.converged
            );
            model.prototypes = Some(out.prototypes);
        }
        Method::MedianXim => {
            let from_matrix = s.dissimilarity_input()?;
            let diss = if from_matrix {
                DissimilarityMatrix::new(data.points().to_owned())?
            } else {
                DissimilarityMatrix::squared_euclidean(data)
            };
            let sigma = config.sigma.unwrap_or_else(|| default_sigma(&lattice));
            let gamma = match config.gamma {
                Some(g) => g,
                None if from_matrix => dissimilarity_gamma(&diss),
                None => default_gamma(data)?,
            };
            let h = KernelSpec::new(config.ordering_family(), sigma.end)?;
            let g = KernelSpec::gaussian(gamma.end)?;
            let state = median_xim_train(&diss, &lattice, &h, &g, &spec.median)?;
            let median_cost: f64 = state.costs.iter().sum();
            log.push_str("iterations,converged,median_cost\n");
            let _ = writeln!(log, "{},{},{median_cost}", state.iterations, state.converged);
            let mut line = format!(
                "method={method} M={m} iterations={} converged={} median_cost={median_cost:.6}",
                state.iterations, state.converged
            );
            if !from_matrix {
                let protos = PrototypeSet::new(data.select(&state.medians).points().to_owned())?;
                let cost = xim_cost(data, &protos, &lattice, &h, &g)?.total / data.len() as f64;
                let _ = write!(line, " xim_cost={cost:.6}");
                model.prototypes = Some(protos);
            }
            summary = line;
            model.medians = Some((state.medians, diss.len()));
        }
        _ => {
            let out = train(data, &lattice, config)?;
            let h = out.final_h(config)?;
            let g = shared_or(&out.final_g, out.schedules.gamma.end)?;
            let cost = xim_cost(data, &out.prototypes, &lattice, &h, &g)?.total / data.len() as f64;
            log.push_str("t,epsilon,sigma,gamma,winner\n");
            for r in &out.log {
                let _ = writeln!(log, "{},{},{},{},{}", r.t, r.epsilon, r.sigma, r.gamma, r.winner);
            }
            summary = format!("method={method} M={m} t_max={} xim_cost={cost:.6}", config.t_max);
            model.prototypes = Some(out.prototypes);
        }
    }
    model.lattice = Some(lattice);
    Ok(Trained { model, log, summary })
}

fn cmd_train(s: &Settings, data_path: &Path, output: &Path, log_path: &Path) -> CliResult<()> {
    let method = s.method()?;
    // validate the whole configuration before touching the data
    s.method_spec(method)?;
    let data = read_data(data_path, s)?;
    let trained = fit_model(&data, s, method)?;
    write_file(output, &trained.model.to_text())?;
    write_file(log_path, &trained.log)?;
    println!("{} model={}", trained.summary, output.display());
    Ok(())
}

fn cmd_embed(s: &Settings, model: &Model, data_path: &Path, output: &Path) -> CliResult<()> {
    let shepard = s.shepard()?;
    let data = read_data(data_path, s)?;
    let coords = model.embed(&data, &shepard)?;
    let mut e = EmbeddingResult::new(coords, model.method.as_str(), model.seed).annotate(&data);
    e.config = s.echo();
    write_file(output, &format_embedding(&e))
}

type Grid = Vec<(String, Vec<String>)>;

fn parse_grid(entries: &[String]) -> CliResult<Grid> {
    let mut grid = Grid::new();
    for e in entries {
        let (k, vs) = e
            .split_once('=')
            .ok_or_else(|| CliError::new(ExitKind::Config, format!("--grid: expected KEY=V1|V2, got `{e}`")))?;
        // reject unknown keys up front
        Settings::default().set(k, "")?;
        let values: Vec<String> = vs.split('|').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(CliError::new(ExitKind::Config, format!("--grid: no values for `{k}`")));
        }
        grid.push((k.trim().to_string(), values));
    }
    Ok(grid)
}

/// Every combination of grid values, as key=value assignments.
fn grid_points(grid: &Grid) -> Vec<Vec<(String, String)>> {
    let mut points = vec![Vec::new()];
    for (k, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((k.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

fn cmd_evaluate(s: &Settings, grid: &Grid, data_path: &Path, output: &Path, machine: &Path) -> CliResult<()> {
    let methods = s.methods()?;
    let options = s.protocol()?;
    if s.dissimilarity_input()? {
        return Err(CliError::new(ExitKind::Config, "config key `input`: evaluate needs vector data"));
    }
    let mut specs = Vec::new();
    for &m in &methods {
        for point in grid_points(grid) {
            let mut local = s.clone();
            for (k, v) in &point {
                local.set(k, v)?;
            }
            let mut spec = local.method_spec(m)?;
            // PCA has no free parameters, so it is evaluated once
            if !point.is_empty() && m != Method::Pca {
                let tags: Vec<String> = point.iter().map(|(k, v)| format!("{k}={v}")).collect();
                spec.name = format!("{m}[{}]", tags.join(","));
            }
            if !specs.iter().any(|p: &MethodSpec| p.name == spec.name) {
                specs.push(spec);
            }
        }
    }
    let data = read_data(data_path, s)?;
    let reports = specs
        .iter()
        .map(|spec| evaluate_protocol(&data, spec, &options).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    let mut table = format_report_table(&reports);
    if !grid.is_empty() {
        for (metric, i) in best_per_metric(&reports) {
            let _ = writeln!(table, "# best {}: {}", metric.as_str(), reports[i].method);
        }
    }
    write_file(output, &table)?;
    write_file(machine, &format_report_machine(&reports))?;
    print!("{table}");
    Ok(())
}

fn read_labels(path: &Path) -> CliResult<Vec<i64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(ExitKind::Data, format!("cannot read labels {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<i64>()
                .map_err(|_| CliError::new(ExitKind::Data, format!("{}: label is not an integer: {l:?}", path.display())))
        })
        .collect()
}

fn cmd_plot(embedding: &Path, output: &Path, labels: Option<&Path>, title: &str) -> CliResult<()> {
    let e = load_embedding(embedding).map_err(|err| data_error(embedding, err))?;
    if e.dim() != 2 {
        return Err(CliError::new(
            ExitKind::PlotDimension,
            format!("{}: plots need 2-D coordinates, found {}", embedding.display(), e.dim()),
        ));
    }
    let labels = match labels {
        Some(path) => {
            let l = read_labels(path)?;
            if l.len() != e.len() {
                return Err(CliError::new(
                    ExitKind::Data,
                    format!("{} labels for {} points", l.len(), e.len()),
                ));
            }
            Some(l)
        }
        None => e.labels.clone(),
    };
    let title = if title.is_empty() { e.method.as_str() } else { title };
    write_file(output, &render_svg(e.coords.view(), labels.as_deref(), title))
}
