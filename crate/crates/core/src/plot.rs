//! Minimal SVG line and scatter plots.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Linear,
    Log,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw connecting lines; otherwise markers only.
    pub line: bool,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_axis: Axis,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

impl Plot {
    fn x_value(&self, x: f64) -> Option<f64> {
        match self.x_axis {
            Axis::Linear => Some(x),
            Axis::Log if x > 0.0 => Some(x.log10()),
            Axis::Log => None,
        }
    }

    /// Renders the plot. Non-finite points, and non-positive `x` on a log axis, are skipped.
    pub fn to_svg(&self) -> String {
        let pts: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .filter(|(_, y)| y.is_finite())
                    .filter_map(|&(x, y)| self.x_value(x).filter(|v| v.is_finite()).map(|x| (x, y)))
                    .collect()
            })
            .collect();
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
            escape(&self.title)
        );
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let _ = writeln!(
            svg,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let xr = range(pts.iter().flatten().map(|p| p.0));
        let yr = range(pts.iter().flatten().map(|p| p.1));
        if let (Some((x0, x1)), Some((y0, y1))) = (xr, yr) {
            let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
            let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
            for i in 0..=4 {
                let t = i as f64 / 4.0;
                let xv = x0 + t * (x1 - x0);
                let label = match self.x_axis {
                    Axis::Linear => format!("{xv:.3}"),
                    Axis::Log => format!("{:.3}", 10f64.powf(xv)),
                };
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                    sx(xv),
                    TOP + ph + 18.0,
                    trim(&label)
                );
                let yv = y0 + t * (y1 - y0);
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                    LEFT - 6.0,
                    sy(yv) + 4.0,
                    trim(&format!("{yv:.4}"))
                );
            }
            for (i, (s, p)) in self.series.iter().zip(&pts).enumerate() {
                let color = COLORS[i % COLORS.len()];
                if s.line && p.len() > 1 {
                    let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    let _ = writeln!(
                        svg,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                        path.join(" ")
                    );
                }
                for &(x, y) in p {
                    let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
                }
                let ly = TOP + 10.0 + 18.0 * i as f64;
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                    WIDTH - RIGHT + 14.0,
                    ly,
                    WIDTH - RIGHT + 24.0,
                    ly + 4.0,
                    escape(&s.label)
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text transform="translate(16,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        svg.push_str("</svg>\n");
        svg
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
