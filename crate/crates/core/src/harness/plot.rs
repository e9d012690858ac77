//! Minimal self-contained SVG charts.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Lines with markers over a numeric x axis.
    Line,
    /// Grouped bars: one group per category, one bar per series.
    Bar,
    /// Long time series drawn on top of each other, plus dashed reference levels.
    Overlay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// `(x, y)` pairs; for bar charts `x` is the category index.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotTable {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Category labels for bar charts.
    pub categories: Vec<String>,
    /// Horizontal dashed reference lines.
    pub levels: Vec<f64>,
    /// Written into an XML comment, typically the config hash.
    pub provenance: String,
}

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const MAX_POLYLINE: usize = 2000;
const COLORS: [&str; 6] = ["#2a9d3f", "#2b6cb0", "#d4a017", "#c0392b", "#7d3c98", "#555555"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(mag * 10.0);
    let mut k = (lo / step).ceil();
    let mut out = Vec::new();
    while k * step <= hi + step * 1e-9 {
        out.push(if k == 0.0 { 0.0 } else { k * step });
        k += 1.0;
    }
    out
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Render `table` as SVG text.
pub fn render_svg(table: &PlotTable, kind: PlotKind) -> Result<String> {
    let finite = |p: &(f64, f64)| p.0.is_finite() && p.1.is_finite();
    if table.series.is_empty() || table.series.iter().all(|s| s.points.iter().filter(|p| finite(p)).count() == 0) {
        return Err(Error::config("plot", "nothing to plot: every series is empty"));
    }
    if kind == PlotKind::Bar && table.categories.is_empty() {
        return Err(Error::config("plot", "bar chart needs category labels"));
    }
    let pts = || table.series.iter().flat_map(|s| s.points.iter().filter(|p| finite(p)));
    let (mut ylo, mut yhi) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    for &l in &table.levels {
        ylo = ylo.min(l);
        yhi = yhi.max(l);
    }
    let frame = match kind {
        PlotKind::Bar => {
            let (_, hi) = padded(0.0f64.min(ylo), yhi.max(0.0));
            Frame {
                x0: -0.5,
                x1: table.categories.len() as f64 - 0.5,
                y0: 0.0f64.min(ylo),
                y1: hi,
            }
        }
        _ => {
            let (xlo, xhi) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
            let (xlo, xhi) = if xhi > xlo { (xlo, xhi) } else { padded(xlo, xhi) };
            let (y0, y1) = padded(ylo, yhi);
            Frame { x0: xlo, x1: xhi, y0, y1 }
        }
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<!-- provenance: {} -->", esc(&table.provenance).replace("--", "- -"));
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, fmt((LEFT + W - RIGHT) / 2.0), esc(&table.title));

    // axes and ticks
    let (ax0, ax1, ay0, ay1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(s, r#"<path d="M{ax0} {ay1} V{ay0} H{ax1}" fill="none" stroke="black"/>"#);
    for t in ticks(frame.y0, frame.y1) {
        let y = fmt(frame.py(t));
        let _ = writeln!(s, r##"<line x1="{}" y1="{y}" x2="{ax0}" y2="{y}" stroke="black"/><text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{}</text>"##, ax0 - 5.0, ax0 - 8.0, tick_label(t));
    }
    match kind {
        PlotKind::Bar => {
            for (i, c) in table.categories.iter().enumerate() {
                let x = fmt(frame.px(i as f64));
                let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, fmt(ay0 + 18.0), esc(c));
            }
        }
        _ => {
            for t in ticks(frame.x0, frame.x1) {
                let x = fmt(frame.px(t));
                let _ = writeln!(s, r#"<line x1="{x}" y1="{ay0}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"#, ay0 + 5.0, fmt(ay0 + 18.0), tick_label(t));
            }
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, fmt((ax0 + ax1) / 2.0), H - 12.0, esc(&table.x_label));
    let _ = writeln!(s, r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#, fmt((ay0 + ay1) / 2.0), esc(&table.y_label));

    for &l in &table.levels {
        let y = fmt(frame.py(l));
        let _ = writeln!(s, r##"<line class="level" x1="{ax0}" y1="{y}" x2="{ax1}" y2="{y}" stroke="#888888" stroke-dasharray="6 4"/>"##);
    }

    let n_series = table.series.len();
    for (i, series) in table.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let good: Vec<(f64, f64)> = series.points.iter().copied().filter(finite).collect();
        match kind {
            PlotKind::Bar => {
                let group = 0.8;
                let bw = group / n_series as f64;
                for &(x, y) in &good {
                    let left = frame.px(x - group / 2.0 + i as f64 * bw);
                    let right = frame.px(x - group / 2.0 + (i as f64 + 1.0) * bw);
                    let top = frame.py(y.max(0.0));
                    let base = frame.py(y.min(0.0));
                    let _ = writeln!(
                        s,
                        r#"<rect class="bar" x="{}" y="{}" width="{}" height="{}" fill="{color}"/>"#,
                        fmt(left),
                        fmt(top),
                        fmt(right - left),
                        fmt(base - top)
                    );
                }
            }
            PlotKind::Line | PlotKind::Overlay => {
                let stride = good.len().div_ceil(MAX_POLYLINE).max(1);
                let pts: Vec<String> = good
                    .iter()
                    .step_by(stride)
                    .map(|&(x, y)| format!("{},{}", fmt(frame.px(x)), fmt(frame.py(y))))
                    .collect();
                let width = if kind == PlotKind::Overlay { 1.2 } else { 1.8 };
                let _ = writeln!(s, r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#, pts.join(" "));
                if kind == PlotKind::Line {
                    for &(x, y) in &good {
                        let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#, fmt(frame.px(x)), fmt(frame.py(y)));
                    }
                }
            }
        }
        // legend
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = W - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{}" width="14" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            ly - 9.0,
            lx + 20.0,
            ly,
            esc(&series.name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Render and write `table`; nothing is written on error.
pub fn render_plot(table: &PlotTable, kind: PlotKind, path: &Path) -> Result<()> {
    let svg = render_svg(table, kind)?;
    std::fs::write(path, svg)?;
    Ok(())
}
