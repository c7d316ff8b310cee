use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use xim::model_file::Model;

fn xim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Ten points in three dimensions, two loose groups.
fn tiny_data(dir: &Path) {
    let mut text = String::from("x0,x1,x2,label\n");
    for i in 0..10 {
        let c = if i < 5 { 0.0 } else { 4.0 };
        let _ = std::fmt::Write::write_fmt(
            &mut text,
            format_args!("{},{},{},{}\n", c + 0.1 * i as f64, c - 0.05 * i as f64, 0.3 * (i % 3) as f64, i / 5),
        );
    }
    fs::write(dir.join("tiny.csv"), text).unwrap();
}

fn train_tiny(dir: &Path, model: &str) -> Output {
    xim(dir, &["train", "-d", "tiny.csv", "-o", model, "--rows", "3", "--cols", "3", "--t-max", "100", "--seed", "5"])
}

#[test]
fn train_writes_model_log_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    tiny_data(dir.path());
    let out = train_tiny(dir.path(), "m.txt");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = String::from_utf8_lossy(&out.stdout);
    assert_eq!(summary.lines().count(), 1);
    assert!(summary.contains("method=c-xim") && summary.contains("M=9") && summary.contains("t_max=100"));
    assert!(summary.contains("xim_cost="));

    let text = fs::read_to_string(dir.path().join("m.txt")).unwrap();
    assert!(text.starts_with("XIM-MODEL v1\n"));
    let model = Model::parse(&text).unwrap();
    let protos = model.prototypes.unwrap();
    assert_eq!((protos.len(), protos.dim()), (9, 3));
    let log = fs::read_to_string(dir.path().join("m.txt.log")).unwrap();
    assert!(log.starts_with("t,epsilon,sigma,gamma,winner\n"));
}

#[test]
fn same_seed_gives_identical_models() {
    let dir = tempfile::tempdir().unwrap();
    tiny_data(dir.path());
    assert_eq!(code(&train_tiny(dir.path(), "a.txt")), 0);
    assert_eq!(code(&train_tiny(dir.path(), "b.txt")), 0);
    let a = fs::read(dir.path().join("a.txt")).unwrap();
    let b = fs::read(dir.path().join("b.txt")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unknown_config_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    tiny_data(dir.path());
    fs::write(dir.path().join("bad.cfg"), "# typo below\nsigm_start = 2\n").unwrap();
    let out = xim(dir.path(), &["train", "-d", "tiny.csv", "-o", "m.txt", "-c", "bad.cfg"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("sigm_start"));
    let out = xim(dir.path(), &["train", "-d", "tiny.csv", "-o", "m.txt", "--set", "eta=2"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("eta"));
}

#[test]
fn flags_override_file_and_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    tiny_data(dir.path());
    fs::write(dir.path().join("run.cfg"), "method=som\nrows=2\ncols=2\nt_max=50\n").unwrap();
    let out = xim(dir.path(), &["train", "-d", "tiny.csv", "-o", "m.txt", "-c", "run.cfg", "--rows", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("method=som") && summary.contains("M=6") && summary.contains("t_max=50"), "{summary}");
}

#[test]
fn embed_maps_prototypes_to_nodes_and_data_to_rows() {
    let dir = tempfile::tempdir().unwrap();
    tiny_data(dir.path());
    assert_eq!(code(&train_tiny(dir.path(), "m.txt")), 0);
    let model = Model::load(dir.path().join("m.txt")).unwrap();
    let protos = model.prototypes.as_ref().unwrap();
    fs::write(dir.path().join("protos.csv"), xim::data::format_matrix(protos.matrix())).unwrap();

    let out = xim(dir.path(), &["embed", "-m", "m.txt", "-d", "protos.csv", "-o", "p.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let e = xim::mapping::load_embedding(dir.path().join("p.csv")).unwrap();
    assert_eq!(e.coords, model.lattice.as_ref().unwrap().nodes().to_owned());

    let out = xim(dir.path(), &["embed", "-m", "m.txt", "-d", "tiny.csv", "-o", "e.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let e = xim::mapping::load_embedding(dir.path().join("e.csv")).unwrap();
    assert_eq!(e.coords.dim(), (10, 2));
    assert_eq!(e.labels.as_deref(), Some(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1][..]));
    assert_eq!(e.method, "c-xim");
}

#[test]
fn embed_dimension_mismatch_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&xim(d, &["synth", "--dims", "79", "--seed", "1", "-o", "d79.csv"])), 0);
    assert_eq!(code(&xim(d, &["synth", "--dims", "78", "--seed", "1", "-o", "d78.csv"])), 0);
    let out = xim(d, &["train", "-d", "d79.csv", "-o", "m.txt", "--t-max", "200", "--rows", "3", "--cols", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = xim(d, &["embed", "-m", "m.txt", "-d", "d78.csv", "-o", "e.csv"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn broken_or_missing_model_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    tiny_data(dir.path());
    assert_eq!(code(&xim(dir.path(), &["embed", "-m", "none.txt", "-d", "tiny.csv", "-o", "e.csv"])), 6);
    fs::write(dir.path().join("v2.txt"), "XIM-MODEL v2\nmethod=xim\nseed=0\n").unwrap();
    assert_eq!(code(&xim(dir.path(), &["embed", "-m", "v2.txt", "-d", "tiny.csv", "-o", "e.csv"])), 6);
}

#[test]
fn evaluate_reports_three_methods_by_four_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&xim(d, &["synth", "--n", "40", "--clusters", "15,25", "--dims", "6", "-o", "toy.csv"])), 0);
    let out = xim(
        d,
        &[
            "evaluate", "-d", "toy.csv", "-o", "report.txt", "--methods", "som,c-xim,pca", "--runs", "2",
            "--fraction", "0.95", "--k", "1..5", "--set", "t_max=500", "--set", "rows=4", "--set", "cols=4",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = fs::read_to_string(d.join("report.txt")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4, "{table}");
    assert!(rows[0].contains("sammon") && rows[0].contains("continuity"));
    for row in &rows[1..] {
        assert_eq!(row.matches(" (").count(), 4, "{row}");
    }
    let machine = fs::read_to_string(d.join("report.txt.machine")).unwrap();
    assert_eq!(machine.lines().filter(|l| l.contains(".mean=")).count(), 12);
}

#[test]
fn evaluate_accepts_a_parameter_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&xim(d, &["synth", "--clusters", "15,25", "--dims", "6", "-o", "toy.csv"])), 0);
    let out = xim(
        d,
        &[
            "evaluate", "-d", "toy.csv", "-o", "r.txt", "--methods", "c-xim,pca", "--runs", "1", "--k", "1..5",
            "--set", "t_max=300", "--set", "rows=3", "--set", "cols=3", "--grid", "eta=0.1|0.3",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = fs::read_to_string(d.join("r.txt")).unwrap();
    assert!(table.contains("c-xim[eta=0.1]") && table.contains("c-xim[eta=0.3]"), "{table}");
    assert_eq!(table.lines().filter(|l| l.starts_with("pca")).count(), 1);
    assert_eq!(table.lines().filter(|l| l.starts_with("# best ")).count(), 4);
}

#[test]
fn evaluate_missing_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = xim(dir.path(), &["evaluate", "-d", "absent.csv", "-o", "r.txt"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn plot_structure_determinism_and_dimension_check() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("two.csv"), "y0,y1,label\n0,0,5\n1,2,8\n").unwrap();
    assert_eq!(code(&xim(d, &["plot", "-e", "two.csv", "-o", "a.svg"])), 0);
    assert_eq!(code(&xim(d, &["plot", "-e", "two.csv", "-o", "b.svg"])), 0);
    let svg = fs::read_to_string(d.join("a.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 2);
    let legend = svg.split(r#"<g class="legend">"#).nth(1).unwrap();
    assert_eq!(legend.matches("<text").count(), 2);
    assert_eq!(fs::read(d.join("a.svg")).unwrap(), fs::read(d.join("b.svg")).unwrap());

    fs::write(d.join("labels.txt"), "1\n1\n").unwrap();
    assert_eq!(code(&xim(d, &["plot", "-e", "two.csv", "-o", "c.svg", "--labels", "labels.txt"])), 0);
    let svg = fs::read_to_string(d.join("c.svg")).unwrap();
    assert_eq!(svg.split(r#"<g class="legend">"#).nth(1).unwrap().matches("<text").count(), 1);

    fs::write(d.join("three.csv"), "y0,y1,y2\n0,0,0\n1,2,3\n").unwrap();
    assert_eq!(code(&xim(d, &["plot", "-e", "three.csv", "-o", "x.svg"])), 5);
}

#[test]
fn every_method_trains_and_embeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&xim(d, &["synth", "--clusters", "10,20", "--dims", "5", "-o", "toy.csv"])), 0);
    for method in ["xim", "t-xim", "c-xim", "som", "batch-xim", "median-xim", "pca"] {
        let model = format!("{method}.txt");
        let out = xim(
            d,
            &["train", "-d", "toy.csv", "-o", &model, "--method", method, "--t-max", "300", "--rows", "3", "--cols", "3"],
        );
        assert_eq!(code(&out), 0, "{method}: {}", stderr(&out));
        let out = xim(d, &["embed", "-m", &model, "-d", "toy.csv", "-o", "e.csv"]);
        assert_eq!(code(&out), 0, "{method}: {}", stderr(&out));
        let e = xim::mapping::load_embedding(d.join("e.csv")).unwrap();
        assert_eq!(e.coords.dim(), (30, 2), "{method}");
    }
}

#[test]
fn median_model_from_dissimilarities() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // squared distances of six points on a line
    let pts = [0.0f64, 1.0, 2.0, 10.0, 11.0, 12.0];
    let rows: Vec<String> = pts
        .iter()
        .map(|a| pts.iter().map(|b| ((a - b) * (a - b)).to_string()).collect::<Vec<_>>().join(","))
        .collect();
    fs::write(d.join("diss.csv"), rows.join("\n") + "\n").unwrap();
    let out = xim(
        d,
        &["train", "-d", "diss.csv", "-o", "m.txt", "--method", "median-xim", "--set", "input=dissimilarity", "--rows", "1", "--cols", "2"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let model = Model::load(d.join("m.txt")).unwrap();
    let (medians, n) = model.medians.clone().unwrap();
    assert_eq!(n, 6);
    assert!(model.prototypes.is_none());
    // one median per group
    assert!(medians.iter().any(|&m| m < 3) && medians.iter().any(|&m| m >= 3), "{medians:?}");
    let out = xim(d, &["embed", "-m", "m.txt", "-d", "diss.csv", "-o", "e.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn help_documents_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for args in [vec!["--help"], vec!["train", "--help"], vec!["plot", "--help"]] {
        let out = xim(dir.path(), &args);
        assert_eq!(code(&out), 0);
        let text = String::from_utf8_lossy(&out.stdout);
        for c in ["0  success", "2  invalid configuration", "3  unreadable", "4  dimension", "5  plot", "6  missing"] {
            assert!(text.contains(c), "{args:?} help lacks `{c}`");
        }
    }
}

#[test]
fn synth_matches_requested_shape() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = xim(d, &["synth", "--n", "147", "--dims", "79", "--clusters", "22,125", "--separation", "6", "--seed", "2", "-o", "s.csv"]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(d.join("s.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 148);
    assert_eq!(lines[1].split(',').count(), 80);
    assert_eq!(lines.iter().filter(|l| l.ends_with(",1")).count(), 125);
    assert_eq!(code(&xim(d, &["synth", "--n", "100", "-o", "x.csv"])), 2);
}
