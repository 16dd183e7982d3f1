//! Long-format reshaping and a minimal SVG line chart.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

/// Numeric columns of a CSV keyed by a `day` column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub days: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
}

/// Reads `content`, keeping `selected` columns (or every column except
/// `day` and `date`).
pub fn read_table(content: &str, selected: Option<&[String]>) -> Result<Table> {
    let mut reader = csv::Reader::from_reader(content.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let day_col = header
        .iter()
        .position(|h| h == "day")
        .context("input has no `day` column")?;
    let wanted: Vec<usize> = match selected {
        Some(names) => {
            if names.is_empty() {
                bail!("no series selected");
            }
            names
                .iter()
                .map(|n| {
                    header
                        .iter()
                        .position(|h| h == n)
                        .with_context(|| format!("input has no column {n:?}"))
                })
                .collect::<Result<_>>()?
        }
        None => (0..header.len())
            .filter(|&k| k != day_col && header[k] != "date")
            .collect(),
    };
    if wanted.is_empty() {
        bail!("input has no series columns");
    }
    let mut days = Vec::new();
    let mut columns = vec![Vec::new(); wanted.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("row {}", row + 2))?;
        let cell = |k: usize| -> Result<f64> {
            let s = record.get(k).unwrap_or("").trim();
            s.parse()
                .with_context(|| format!("row {}, column {}: {s:?} is not a number", row + 2, header[k]))
        };
        days.push(cell(day_col)?);
        for (col, &k) in columns.iter_mut().zip(&wanted) {
            col.push(cell(k)?);
        }
    }
    if days.is_empty() {
        bail!("input has no rows");
    }
    Ok(Table {
        days,
        series: wanted.iter().map(|&k| header[k].clone()).zip(columns).collect(),
    })
}

/// `series,day,value` rows, series-major.
pub fn long_format(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series", "day", "value"])?;
    for (name, values) in &table.series {
        for (day, v) in table.days.iter().zip(values) {
            w.write_record([name.as_str(), &day.to_string(), &v.to_string()])?;
        }
    }
    Ok(w.into_inner()?)
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 540.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e5 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Line chart of every series against day, with axes, ticks and a legend.
/// Output depends only on `table` and `title`.
pub fn svg(table: &Table, title: &str) -> String {
    let (x0, x1) = range(table.days.iter().copied());
    let (y_lo, y_hi) = range(table.series.iter().flat_map(|(_, v)| v.iter().copied()));
    let (y0, y1) = (y_lo.min(0.0), y_hi);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let f = k as f64 / 5.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">day</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">value</text>"#,
        TOP + plot_h / 2.0
    );
    for (k, (name, values)) in table.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = table
            .days
            .iter()
            .zip(values)
            .filter(|(_, v)| v.is_finite())
            .map(|(d, v)| format!("{:.2},{:.2}", sx(*d), sy(*v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
