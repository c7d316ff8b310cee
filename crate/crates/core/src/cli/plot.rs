//! Static SVG scatter plots of 2-D embeddings.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ndarray::ArrayView2;

/// Colors cycled over the sorted distinct labels.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;
const PLOT_W: f64 = 420.0;
const PLOT_H: f64 = 380.0;
/// Fraction of the data range added on each side.
pub const MARGIN: f64 = 0.05;

fn padded(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = hi - lo;
    if span > 0.0 {
        (lo - MARGIN * span, hi + MARGIN * span)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Renders one circle per row of `coords` (which must have 2 columns),
/// colored by label, with a legend. Output depends only on the input.
pub fn render_svg(coords: ArrayView2<'_, f64>, labels: Option<&[i64]>, title: &str) -> String {
    assert_eq!(coords.ncols(), 2, "scatter plots need 2-D coordinates");
    let (x0, x1) = padded(coords.column(0).iter().copied());
    let (y0, y1) = padded(coords.column(1).iter().copied());
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * PLOT_W;
    let py = |y: f64| TOP + PLOT_H - (y - y0) / (y1 - y0) * PLOT_H;
    let classes: Vec<i64> = labels
        .map(|l| l.iter().copied().collect::<BTreeSet<_>>().into_iter().collect())
        .unwrap_or_default();
    let color_of = |label: Option<i64>| match label {
        Some(l) => PALETTE[classes.binary_search(&l).unwrap_or(0) % PALETTE.len()],
        None => PALETTE[0],
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, LEFT + PLOT_W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>"#
    );
    let bottom = TOP + PLOT_H;
    let _ = writeln!(s, r#"<text x="{LEFT}" y="{}" text-anchor="start">{x0:.3}</text>"#, bottom + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{x1:.3}</text>"#, LEFT + PLOT_W, bottom + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{bottom}" text-anchor="end">{y0:.3}</text>"#, LEFT - 6.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y1:.3}</text>"#, LEFT - 6.0, TOP + 10.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">y0</text>"#, LEFT + PLOT_W / 2.0, bottom + 32.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">y1</text>"#,
        TOP + PLOT_H / 2.0
    );

    let _ = writeln!(s, r#"<g fill-opacity="0.8">"#);
    for (i, row) in coords.outer_iter().enumerate() {
        let color = color_of(labels.map(|l| l[i]));
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(row[0]), py(row[1]));
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="legend">"#);
    let lx = LEFT + PLOT_W + 24.0;
    let entries: Vec<(String, &str)> = if classes.is_empty() {
        vec![("points".to_string(), PALETTE[0])]
    } else {
        classes.iter().map(|&c| (format!("label {c}"), color_of(Some(c)))).collect()
    };
    for (k, (name, color)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{color}"/>"#, y - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, lx + 16.0, escape(name));
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
