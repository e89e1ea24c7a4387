//! Standalone SVG line plots of trace quantities against `k`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use splitaccel::{IterRecord, Trace};

use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    NormV,
    CosTheta,
    OneMinusCos,
    DistZ,
    DistX,
    Objective,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::NormV,
        Quantity::CosTheta,
        Quantity::OneMinusCos,
        Quantity::DistZ,
        Quantity::DistX,
        Quantity::Objective,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::NormV => "norm_v",
            Quantity::CosTheta => "cos_theta",
            Quantity::OneMinusCos => "one_minus_cos",
            Quantity::DistZ => "dist_z",
            Quantity::DistX => "dist_x",
            Quantity::Objective => "objective",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Quantity::NormV => "||z_k - z_{k-1}||",
            Quantity::CosTheta => "cos theta_k",
            Quantity::OneMinusCos => "1 - cos theta_k",
            Quantity::DistZ => "||z_k - z*||",
            Quantity::DistX => "||x_k - x*||",
            Quantity::Objective => "objective",
        }
    }

    /// Distances and residuals are drawn on a log axis.
    pub fn log_scale(self) -> bool {
        matches!(self, Quantity::NormV | Quantity::OneMinusCos | Quantity::DistZ | Quantity::DistX)
    }

    fn value(self, r: &IterRecord) -> Option<f64> {
        let v = match self {
            Quantity::NormV => Some(r.norm_v),
            Quantity::CosTheta => r.cos_theta,
            Quantity::OneMinusCos => r.cos_theta.map(|c| 1.0 - c),
            Quantity::DistZ => r.dist_z,
            Quantity::DistX => r.dist_x,
            Quantity::Objective => r.objective,
        }?;
        (v.is_finite() && (!self.log_scale() || v > 0.0)).then_some(v)
    }
}

impl FromStr for Quantity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s.trim())
            .ok_or_else(|| format!("unknown quantity '{s}'"))
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Evenly spaced ticks on `[lo, hi]` at a 1-2-5 step.
fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

/// The SVG document, or `EmptySelection` when no trace has the quantity.
pub fn render_svg(traces: &[Trace], quantity: Quantity) -> Result<String, BenchError> {
    let series: Vec<(String, Vec<(f64, f64)>)> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let name = t.meta.get("solver").cloned().unwrap_or_else(|| format!("trace {}", i + 1));
            let points = t
                .records
                .iter()
                .filter_map(|r| quantity.value(r).map(|v| (r.k as f64, if quantity.log_scale() { v.log10() } else { v })))
                .collect();
            (name, points)
        })
        .collect();
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    if all.is_empty() {
        return Err(BenchError::EmptySelection {
            quantity: quantity.name().to_string(),
        });
    }

    let (mut x_lo, mut x_hi) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y_lo, mut y_hi) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if quantity.log_scale() {
        y_lo = y_lo.floor();
        y_hi = y_hi.ceil();
    }
    if x_hi <= x_lo {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_hi <= y_lo {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"##
    );
    let _ = writeln!(svg, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"##);
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"##
    );

    for x in linear_ticks(x_lo, x_hi) {
        let px = sx(x);
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{x}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0
        );
    }
    let y_ticks: Vec<f64> = if quantity.log_scale() {
        let decades = (y_hi - y_lo) as i64;
        let stride = (decades / 8 + 1).max(1);
        (y_lo as i64..=y_hi as i64).filter(|d| (d - y_lo as i64) % stride == 0).map(|d| d as f64).collect()
    } else {
        linear_ticks(y_lo, y_hi)
    };
    for y in y_ticks {
        let py = sy(y);
        let label = if quantity.log_scale() { format!("1e{}", y as i64) } else { format!("{y}") };
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
            LEFT - 5.0,
            LEFT + plot_w,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle">k</text>"##,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"##,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(quantity.label())
    );

    for (i, (name, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !points.is_empty() {
            let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                svg,
                r##"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"##,
                coords.join(" ")
            );
        }
        let ly = TOP + 15.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"##,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot_svg(traces: &[Trace], quantity: Quantity, path: &Path) -> Result<(), BenchError> {
    let svg = render_svg(traces, quantity)?;
    fs::write(path, svg).map_err(|e| BenchError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
