//! Number formatting, CSV assembly and a minimal SVG line plot shared by the
//! analysis and experiment exports.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// How floats are rendered in exported tables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    /// Shortest decimal that parses back to the identical `f64`.
    #[default]
    RoundTrip,
    /// Fixed number of digits after the decimal point.
    Digits(usize),
}

pub fn fmt_f64(x: f64, precision: Precision) -> String {
    match precision {
        Precision::RoundTrip => format!("{x}"),
        Precision::Digits(d) => format!("{x:.d$}"),
    }
}

/// A CSV table built row by row. Cells never contain commas or quotes here, so
/// no escaping is performed.
#[derive(Clone, Debug)]
pub struct Csv {
    header: Vec<String>,
    body: String,
    precision: Precision,
}

/// One CSV cell.
pub enum Cell<'a> {
    Text(&'a str),
    Int(i64),
    Float(f64),
}

impl From<f64> for Cell<'_> {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell<'_> {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell<'_> {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl<'a> From<&'a str> for Cell<'a> {
    fn from(v: &'a str) -> Self {
        Cell::Text(v)
    }
}

impl Csv {
    pub fn new(header: &[&str], precision: Precision) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            body: String::new(),
            precision,
        }
    }

    /// Appends a row. Panics if the arity differs from the header, which is a
    /// programming error rather than a data error.
    pub fn row(&mut self, cells: Vec<Cell<'_>>) {
        assert_eq!(cells.len(), self.header.len(), "csv row arity");
        let rendered: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::Text(s) => s.to_string(),
                Cell::Int(i) => i.to_string(),
                Cell::Float(f) => fmt_f64(f, self.precision),
            })
            .collect();
        self.body.push_str(&rendered.join(","));
        self.body.push('\n');
    }

    pub fn finish(&self) -> String {
        format!("{}\n{}", self.header.join(","), self.body)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.finish())
    }
}

/// One named polyline.
pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

const PALETTE: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

/// Renders series as an SVG line chart with axes, tick labels and a legend.
/// Non-finite points are skipped.
pub fn svg_line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let (w, h) = (720.0, 420.0);
    let (left, right, top, bottom) = (70.0, 160.0, 40.0, 50.0);
    let finite = |v: &&f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.x.iter()).filter(finite);
    let ys = series.iter().flat_map(|s| s.y.iter()).filter(finite);
    let (mut x0, mut x1) = bounds(xs);
    let (mut y0, mut y1) = bounds(ys);
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 <= y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, left + pw / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, sx(xv), h - bottom + 18.0, tick(xv));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, sy(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .x
            .iter()
            .zip(s.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = w - right + 12.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn bounds<'a>(vals: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Record of one command run. Written after every other artifact, so its
/// presence means the run completed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<String>,
    pub started_unix_secs: u64,
    pub finished_unix_secs: u64,
    pub tool_version: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        let now = unix_now();
        Self {
            command: command.to_string(),
            config,
            seeds,
            artifacts: Vec::new(),
            started_unix_secs: now,
            finished_unix_secs: now,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Stamps the finish time and writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> std::io::Result<std::path::PathBuf> {
        self.finished_unix_secs = unix_now();
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self).map_err(std::io::Error::other)?;
        std::fs::write(&path, json + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_formatting_parses_back() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, f64::MIN_POSITIVE] {
            let s = fmt_f64(x, Precision::RoundTrip);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0 / 3.0, Precision::Digits(3)), "0.333");
    }

    #[test]
    fn csv_layout() {
        let mut csv = Csv::new(&["a", "b", "c"], Precision::RoundTrip);
        csv.row(vec!["x".into(), 3usize.into(), 0.5.into()]);
        assert_eq!(csv.finish(), "a,b,c\nx,3,0.5\n");
    }

    #[test]
    fn svg_contains_every_series() {
        let x = [0.0, 1.0, 2.0];
        let svg = svg_line_plot(
            "t",
            "x",
            "y",
            &[
                Series { label: "one", x: &x, y: &[1.0, 2.0, f64::NAN] },
                Series { label: "two<", x: &x, y: &[0.0, 0.0, 0.0] },
            ],
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("two&lt;"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
