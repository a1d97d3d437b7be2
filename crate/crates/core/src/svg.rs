//! Line plots of CSV tables as standalone SVG.
//!
//! The first column is the x axis. Every other column whose fields all parse
//! as numbers becomes a series; the first non-numeric column, if any, splits
//! series by its value (e.g. `method`) unless a grouping column is named.
//! Output depends only on the CSV text and the options.

use std::fmt::Write as _;

use crate::error::{LabError, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SvgOptions {
    pub title: String,
    /// Columns to plot; empty means every numeric column.
    pub y_columns: Vec<String>,
    /// `log10` y axis; non-positive values are dropped (absolute values are
    /// taken first when `abs_y` is set).
    pub log_y: bool,
    pub abs_y: bool,
    /// Column whose values split the series.
    pub group_column: Option<String>,
}

#[derive(Debug, Clone)]
struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn parse_field(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

fn parse(csv: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| LabError::usage("empty CSV"))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row: Vec<String> = l.split(',').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(LabError::usage(format!(
                "CSV row {} has {} fields, header has {}",
                i + 1,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn collect_series(csv: &str, opts: &SvgOptions) -> Result<Vec<Series>> {
    let (header, rows) = parse(csv)?;
    let numeric: Vec<bool> = (0..header.len())
        .map(|c| rows.iter().all(|r| parse_field(&r[c]).is_some()))
        .collect();
    if !numeric.first().copied().unwrap_or(false) || rows.is_empty() {
        return Err(LabError::usage("CSV needs a numeric first column and at least one row"));
    }
    let group = match &opts.group_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| LabError::usage(format!("no column `{name}`")))?,
        ),
        None => (1..header.len()).find(|&c| !numeric[c]),
    };
    let y_cols: Vec<usize> = if opts.y_columns.is_empty() {
        (1..header.len()).filter(|&c| numeric[c] && Some(c) != group).collect()
    } else {
        opts.y_columns
            .iter()
            .map(|name| match header.iter().position(|h| h == name) {
                Some(c) if numeric[c] => Ok(c),
                Some(_) => Err(LabError::usage(format!("column `{name}` is not numeric"))),
                None => Err(LabError::usage(format!("no column `{name}`"))),
            })
            .collect::<Result<_>>()?
    };
    let mut groups: Vec<String> = Vec::new();
    if let Some(g) = group {
        for r in &rows {
            if !groups.contains(&r[g]) {
                groups.push(r[g].clone());
            }
        }
    } else {
        groups.push(String::new());
    }
    let mut out = Vec::new();
    for &c in &y_cols {
        for key in &groups {
            let mut points = Vec::new();
            for r in rows.iter().filter(|r| group.is_none_or(|g| &r[g] == key)) {
                let x = parse_field(&r[0]).expect("numeric");
                let mut y = parse_field(&r[c]).expect("numeric");
                if opts.abs_y {
                    y = y.abs();
                }
                if opts.log_y {
                    if !(y > 0.0) {
                        continue;
                    }
                    y = y.log10();
                }
                if x.is_finite() && y.is_finite() {
                    points.push((x, y));
                }
            }
            let label = if key.is_empty() {
                header[c].clone()
            } else {
                format!("{} ({key})", header[c])
            };
            out.push(Series { label, points });
        }
    }
    Ok(out)
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.round() as i64)
    } else {
        format!("{v:.3e}")
    }
}

/// Renders the CSV as an SVG line plot.
pub fn render(csv: &str, opts: &SvgOptions) -> Result<String> {
    let series = collect_series(csv, opts)?;
    let (x_lo, x_hi) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (mut y_lo, mut y_hi) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    if opts.log_y {
        y_lo = y_lo.floor();
        y_hi = y_hi.ceil().max(y_lo + 1.0);
    }
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * pw;
    let sy = |y: f64| MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        escape(&opts.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x_lo + t * (x_hi - x_lo), y_lo + t * (y_hi - y_lo));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + ph,
            MARGIN_TOP + ph + 5.0,
            MARGIN_TOP + ph + 18.0,
            tick_label(xv, false)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            py + 4.0,
            tick_label(yv, opts.log_y)
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !ser.points.is_empty() {
            let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = MARGIN_TOP + 14.0 * (i as f64 + 1.0);
        let lx = MARGIN_LEFT + pw + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
