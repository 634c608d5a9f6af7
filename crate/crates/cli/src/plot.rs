//! Minimal SVG charts: axes with ticks, one polyline per series, a legend.
//! Output depends only on the data, so re-rendering gives identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::{usage, PlotKind};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Tick positions at a 1/2/5 step covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let span = (hi - lo).max(f64::EPSILON);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|i| i as f64 * step).collect(), decimals)
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
    (pad(x0, x1), pad(y0, y1))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn frame_svg(title: &str, x_label: &str, y_label: &str, f: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(s, r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#);
    let (xt, xd) = ticks(f.x.0, f.x.1);
    for t in xt {
        let px = f.px(t);
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{t:.xd$}</text>"#, y0 + 18.0);
    }
    let (yt, yd) = ticks(f.y.0, f.y.1);
    for t in yt {
        let py = f.py(t);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t:.yd$}</text>"#, x0 - 8.0, py + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    s
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 15.0;
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{c}" stroke-width="2"/>"#, x + 20.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 26.0, y + 4.0, escape(name));
    }
}

pub fn line_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x, y) = bounds(series);
    let f = Frame { x, y };
    let mut s = frame_svg(title, x_label, y_label, &f);
    for (i, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser.points.iter().map(|&(a, b)| format!("{:.2},{:.2}", f.px(a), f.py(b))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            COLORS[i % COLORS.len()]
        );
    }
    legend(&mut s, &series.iter().map(|x| x.name.as_str()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// Step outlines of binned counts; each series' points are `(bin centre,
/// count)` on equal-width bins spanning `range`.
pub fn histogram_svg(title: &str, x_label: &str, y_label: &str, series: &[Series], range: (f64, f64)) -> String {
    let top = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(0.0, f64::max)
        .max(1.0);
    let f = Frame { x: range, y: (0.0, top * 1.05) };
    let mut s = frame_svg(title, x_label, y_label, &f);
    for (i, ser) in series.iter().enumerate() {
        let n = ser.points.len().max(1) as f64;
        let w = (range.1 - range.0) / n;
        let mut d = format!("M{:.2},{:.2}", f.px(range.0), f.py(0.0));
        for (b, &(_, c)) in ser.points.iter().enumerate() {
            let a = range.0 + w * b as f64;
            let _ = write!(d, " L{:.2},{:.2} L{:.2},{:.2}", f.px(a), f.py(c), f.px(a + w), f.py(c));
        }
        let _ = write!(d, " L{:.2},{:.2}", f.px(range.1), f.py(0.0));
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(s, r#"<path d="{d}" fill="{c}" fill-opacity="0.15" stroke="{c}" stroke-width="1.5"/>"#);
    }
    legend(&mut s, &series.iter().map(|x| x.name.as_str()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

fn number(path: &Path, line: usize, field: &str) -> anyhow::Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| usage(format!("{}:{line}: `{field}` is not a number", path.display())))
}

fn read_csv(path: &Path) -> anyhow::Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header: Vec<String> = r
        .headers()
        .with_context(|| format!("malformed CSV header in {}", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = r
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(format!("malformed CSV {}: {e}", path.display())))?;
    Ok((header, rows))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// First column is x, every other column is a series.
fn line_series(inputs: &[PathBuf]) -> anyhow::Result<(String, Vec<Series>)> {
    let mut out = Vec::new();
    let mut x_label = String::new();
    for path in inputs {
        let (header, rows) = read_csv(path)?;
        if header.len() < 2 {
            return Err(usage(format!("{}: need an x column and at least one series", path.display())));
        }
        x_label = header[0].clone();
        for (c, name) in header.iter().enumerate().skip(1) {
            let mut points = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let x = number(path, i + 2, row.get(0).unwrap_or(""))?;
                let y = number(path, i + 2, row.get(c).unwrap_or(""))?;
                points.push((x, y));
            }
            let name = if inputs.len() > 1 && header.len() == 2 { stem(path) } else if inputs.len() > 1 { format!("{}:{name}", stem(path)) } else { name.clone() };
            out.push(Series { name, points });
        }
    }
    Ok((x_label, out))
}

/// Columns `bin_lo, bin_hi, count`, optionally split by a `series` column.
fn histogram_series(inputs: &[PathBuf]) -> anyhow::Result<(Vec<Series>, (f64, f64))> {
    let mut out: Vec<Series> = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for path in inputs {
        let (header, rows) = read_csv(path)?;
        let col = |n: &str| header.iter().position(|h| h == n);
        let (Some(a), Some(b), Some(c)) = (col("bin_lo"), col("bin_hi"), col("count")) else {
            return Err(usage(format!("{}: histogram CSV needs bin_lo, bin_hi and count columns", path.display())));
        };
        let s_col = col("series");
        for (i, row) in rows.iter().enumerate() {
            let bl = number(path, i + 2, row.get(a).unwrap_or(""))?;
            let bh = number(path, i + 2, row.get(b).unwrap_or(""))?;
            let n = number(path, i + 2, row.get(c).unwrap_or(""))?;
            lo = lo.min(bl);
            hi = hi.max(bh);
            let name = match s_col {
                Some(s) => row.get(s).unwrap_or("").to_string(),
                None => stem(path),
            };
            match out.iter_mut().find(|x| x.name == name) {
                Some(ser) => ser.points.push((0.5 * (bl + bh), n)),
                None => out.push(Series { name, points: vec![(0.5 * (bl + bh), n)] }),
            }
        }
    }
    if out.is_empty() {
        return Err(usage("histogram CSV has no rows"));
    }
    Ok((out, (lo, hi)))
}

pub fn run(inputs: &[PathBuf], out: &Path, kind: Option<PlotKind>, title: Option<&str>) -> anyhow::Result<()> {
    let kind = match kind {
        Some(k) => k,
        None => {
            let (header, _) = read_csv(&inputs[0])?;
            if header.iter().any(|h| h == "bin_lo") {
                PlotKind::Histogram
            } else {
                PlotKind::Line
            }
        }
    };
    let title = title.map(str::to_string).unwrap_or_else(|| stem(&inputs[0]));
    let svg = match kind {
        PlotKind::Line => {
            let (x_label, series) = line_series(inputs)?;
            line_svg(&title, &x_label, "value", &series)
        }
        PlotKind::Histogram => {
            let (series, range) = histogram_series(inputs)?;
            histogram_svg(&title, "value", "count", &series, range)
        }
    };
    std::fs::write(out, svg).with_context(|| format!("cannot write {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}
