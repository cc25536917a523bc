//! Minimal self-contained SVG line plots.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const PANEL_HEIGHT: f64 = 300.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 45.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.to_string(),
            points: points.into_iter().filter(|(x, y)| x.is_finite() && y.is_finite()).collect(),
        }
    }
}

pub struct Panel {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub series: Vec<Series>,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
    }
}

fn draw_panel(out: &mut String, panel: &Panel, top: f64) {
    let (x0, x1) = range(panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = range(panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let left = MARGIN_LEFT;
    let right = WIDTH - MARGIN_RIGHT;
    let ptop = top + MARGIN_TOP;
    let pbottom = top + PANEL_HEIGHT - MARGIN_BOTTOM;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let sy = |y: f64| pbottom - (y - y0) / (y1 - y0) * (pbottom - ptop);

    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        top + 20.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{left:.1}" y="{ptop:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        right - left,
        pbottom - ptop
    );
    for (v, anchor, x) in [(x0, "start", left), (x1, "end", right)] {
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="{anchor}" font-size="11">{}</text>"#,
            pbottom + 15.0,
            tick(v)
        );
    }
    for (v, y) in [(y0, pbottom), (y1, ptop + 10.0)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" text-anchor="end" font-size="11">{}</text>"#,
            left - 5.0,
            tick(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
        (left + right) / 2.0,
        pbottom + 35.0,
        escape(&panel.xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 20 {:.1})">{}</text>"#,
        (ptop + pbottom) / 2.0,
        (ptop + pbottom) / 2.0,
        escape(&panel.ylabel)
    );
    for (k, s) in panel.series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let (first, last) = (s.points[0], s.points[s.points.len() - 1]);
        let _ = writeln!(
            out,
            r#"<polyline data-series="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}: {} points from ({:e}, {:e}) to ({:e}, {:e})</title></polyline>"#,
            escape(&s.name),
            coords.join(" "),
            escape(&s.name),
            s.points.len(),
            first.0,
            first.1,
            last.0,
            last.1
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{}</text>"#,
            right - 120.0,
            ptop + 15.0 + 14.0 * k as f64,
            escape(&s.name)
        );
    }
}

/// Stacks `panels` vertically into one SVG document.
pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, PANEL_HEIGHT * k as f64);
    }
    out.push_str("</svg>\n");
    out
}
