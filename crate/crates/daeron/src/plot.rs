//! Loss-curve rendering: metrics CSVs in, one static SVG out. Log-scale
//! y axis; nonpositive or missing values are skipped. Purely
//! presentational — nothing is computed here beyond axis placement.

use crate::error::{Error, Result};
use crate::metrics::METRICS_HEADER;

/// A parsed metrics CSV: column names plus rows of f64 (nan for `nan`).
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_metrics_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Schema("empty CSV".into()))?;
    if header != METRICS_HEADER {
        return Err(Error::Schema(format!(
            "unexpected header `{header}` (want `{METRICS_HEADER}`)"
        )));
    }
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| {
                if f == "nan" {
                    Ok(f64::NAN)
                } else {
                    f.parse::<f64>().map_err(|_| {
                        Error::Schema(format!("row {}: cannot parse `{f}`", i + 2))
                    })
                }
            })
            .collect::<Result<_>>()?;
        if vals.len() != columns.len() {
            return Err(Error::Schema(format!(
                "row {}: {} fields, want {}",
                i + 2,
                vals.len(),
                columns.len()
            )));
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Schema("CSV has no data rows".into()));
    }
    Ok(CsvTable { columns, rows })
}

pub struct Curve {
    pub label: String,
    /// (t, value) points; nonpositive values are dropped at render time.
    pub points: Vec<(f64, f64)>,
}

/// Extract a (t, column) curve from a parsed table.
pub fn curve_from_table(table: &CsvTable, column: &str, label: &str) -> Result<Curve> {
    let ci = table
        .columns
        .iter()
        .position(|c| c == column)
        .ok_or_else(|| Error::Schema(format!("no column `{column}`")))?;
    let points = table.rows.iter().map(|r| (r[0], r[ci])).collect();
    Ok(Curve {
        label: label.to_string(),
        points,
    })
}

const PALETTE: &[&str] = &[
    "#1f6fb4", "#d6541e", "#2a8a3c", "#8d44ad", "#b01f4e", "#6b6b6b", "#0e9a9a", "#a08014",
];

const W: f64 = 840.0;
const H: f64 = 520.0;
const ML: f64 = 72.0; // left margin
const MR: f64 = 24.0;
const MT: f64 = 28.0;
const MB: f64 = 52.0;

/// Render curves to an SVG document with a log-scale y axis and a legend.
pub fn plot_losses(curves: &[Curve], title: &str) -> Result<String> {
    let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
    let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
    for c in curves {
        for &(x, y) in &c.points {
            if !y.is_finite() || y <= 0.0 || !x.is_finite() {
                continue;
            }
            xr = (xr.0.min(x), xr.1.max(x));
            yr = (yr.0.min(y), yr.1.max(y));
        }
    }
    if !xr.0.is_finite() || !yr.0.is_finite() {
        return Err(Error::Schema("no positive finite points to plot".into()));
    }
    if xr.1 <= xr.0 {
        xr.1 = xr.0 + 1.0;
    }
    let (ly0, ly1) = {
        let lo = yr.0.log10().floor();
        let hi = yr.1.log10().ceil();
        if hi <= lo {
            (lo, lo + 1.0)
        } else {
            (lo, hi)
        }
    };
    let px = |x: f64| ML + (x - xr.0) / (xr.1 - xr.0) * (W - ML - MR);
    let py = |y: f64| H - MB - (y.log10() - ly0) / (ly1 - ly0) * (H - MT - MB);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    s.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        xml_escape(title)
    ));

    // axes
    s.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR
    ));
    s.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));

    // y decade ticks and gridlines
    let mut dec = ly0 as i64;
    while dec <= ly1 as i64 {
        let y = py(10f64.powi(dec as i32));
        s.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n",
            W - MR
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">1e{dec}</text>\n",
            ML - 6.0,
            y + 4.0
        ));
        dec += 1;
    }
    // x ticks: five evenly spaced
    for k in 0..=4 {
        let x = xr.0 + (xr.1 - xr.0) * k as f64 / 4.0;
        s.push_str(&format!(
            "<line x1=\"{0:.1}\" y1=\"{1}\" x2=\"{0:.1}\" y2=\"{2}\" stroke=\"black\"/>\n",
            px(x),
            H - MB,
            H - MB + 5.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            px(x),
            H - MB + 20.0,
            x.round() as i64
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">t</text>\n",
        (ML + W - MR) / 2.0,
        H - 10.0
    ));

    for (ci, c) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let mut path = String::new();
        let mut pen_down = false;
        for &(x, y) in &c.points {
            if !y.is_finite() || y <= 0.0 || !x.is_finite() {
                pen_down = false;
                continue;
            }
            path.push_str(&format!(
                "{}{:.2},{:.2} ",
                if pen_down { "L" } else { "M" },
                px(x),
                py(y)
            ));
            pen_down = true;
        }
        s.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.trim_end()
        ));
        // legend
        let ly = MT + 16.0 * ci as f64 + 8.0;
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{ly:.1}\" x2=\"{1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            W - MR - 170.0,
            W - MR - 140.0
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\">{}</text>\n",
            W - MR - 132.0,
            ly + 4.0,
            xml_escape(&c.label)
        ));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
