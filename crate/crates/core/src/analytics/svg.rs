//! Minimal SVG scatter plots. Only the first two coordinates are drawn.

use std::fmt::Write;

use crate::geometry::PointCloud;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

const PANEL: f64 = 360.0;
const MARGIN: f64 = 24.0;
const TITLE: f64 = 22.0;
const LEGEND_ROW: f64 = 16.0;

pub struct Layer<'a> {
    pub label: String,
    pub cloud: &'a PointCloud,
    pub color: String,
}

impl<'a> Layer<'a> {
    pub fn new(label: impl Into<String>, cloud: &'a PointCloud, color: &str) -> Self {
        Self {
            label: label.into(),
            cloud,
            color: color.to_string(),
        }
    }
}

pub struct Panel<'a> {
    pub title: String,
    pub layers: Vec<Layer<'a>>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn coord(p: &[f64], k: usize) -> f64 {
    p.get(k).copied().unwrap_or(0.0)
}

/// Shared square bounds over all layers of all panels.
fn bounds(panels: &[Panel]) -> (f64, f64, f64) {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for l in panels.iter().flat_map(|p| &p.layers) {
        for p in l.cloud.points() {
            for k in 0..2 {
                let v = coord(p, k);
                if v.is_finite() {
                    lo[k] = lo[k].min(v);
                    hi[k] = hi[k].max(v);
                }
            }
        }
    }
    if !lo[0].is_finite() {
        return (0.0, 0.0, 1.0);
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9) * 1.08;
    ((lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, span)
}

/// Several scatter panels side by side on shared axes.
pub fn panels_svg(panels: &[Panel], columns: usize) -> String {
    let cols = columns.max(1).min(panels.len().max(1));
    let rows = panels.len().div_ceil(cols).max(1);
    let max_layers = panels.iter().map(|p| p.layers.len()).max().unwrap_or(0);
    let cell_h = TITLE + PANEL + MARGIN + LEGEND_ROW * max_layers as f64;
    let cell_w = PANEL + 2.0 * MARGIN;
    let (w, h) = (cell_w * cols as f64, cell_h * rows as f64);
    let (cx, cy, span) = bounds(panels);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for (idx, panel) in panels.iter().enumerate() {
        let ox = (idx % cols) as f64 * cell_w + MARGIN;
        let oy = (idx / cols) as f64 * cell_h;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            ox + PANEL / 2.0,
            oy + TITLE - 6.0,
            escape(&panel.title)
        );
        let top = oy + TITLE;
        let _ = writeln!(
            out,
            r##"<rect x="{ox:.1}" y="{top:.1}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#999"/>"##
        );
        let sx = |x: f64| ox + ((x - cx) / span + 0.5) * PANEL;
        let sy = |y: f64| top + (0.5 - (y - cy) / span) * PANEL;
        for layer in &panel.layers {
            let _ = writeln!(
                out,
                r#"<g class="layer" data-label="{}" fill="{}" fill-opacity="0.55">"#,
                escape(&layer.label),
                escape(&layer.color)
            );
            for p in layer.cloud.points() {
                let (x, y) = (coord(p, 0), coord(p, 1));
                if x.is_finite() && y.is_finite() {
                    let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1.6"/>"#, sx(x), sy(y));
                }
            }
            out.push_str("</g>\n");
        }
        for (k, layer) in panel.layers.iter().enumerate() {
            let ly = top + PANEL + MARGIN / 2.0 + LEGEND_ROW * k as f64;
            let _ = writeln!(
                out,
                r#"<g class="legend"><rect x="{ox:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text></g>"#,
                ly,
                escape(&layer.color),
                ox + 16.0,
                ly + 9.0,
                escape(&layer.label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn scatter_svg(title: &str, layers: Vec<Layer>) -> String {
    panels_svg(
        &[Panel {
            title: title.to_string(),
            layers,
        }],
        1,
    )
}
