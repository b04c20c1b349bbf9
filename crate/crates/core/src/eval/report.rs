//! Markdown / CSV / SVG rendering of grid results. Output depends only on
//! the input values, so rerunning on the same runs reproduces the bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{aggregate, Aggregate};
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const MISSING_CELL: &str = "n/a";

/// Method choices stated in every report.
pub const METHOD_NOTES: &[&str] = &[
    "ECE uses 15 equal-width confidence bins.",
    "Significance uses a two-sided Welch (unequal-variance) t-test.",
    "Accuracies are on the held-out test subjects.",
];

/// Seed- or fold-level accuracies for one (row, column) of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub row: String,
    pub col: String,
    pub values: Vec<f64>,
    #[serde(default)]
    pub teacher_accuracy: Option<f64>,
}

/// Per-epoch test accuracy of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSet {
    pub title: String,
    /// Header of the first column.
    pub row_label: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<GridCell>,
    #[serde(default)]
    pub curves: Vec<Curve>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub config_hashes: Vec<String>,
}

impl ExperimentSet {
    fn cell(&self, row: &str, col: &str) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.row == row && c.col == col && !c.values.is_empty())
    }

    fn summary(&self, row: &str, col: &str) -> Result<Option<(Aggregate, Option<f64>)>> {
        self.cell(row, col)
            .map(|c| Ok((aggregate(&c.values)?, c.teacher_accuracy)))
            .transpose()
    }
}

/// `"69.49±0.22"`, with the teacher accuracy appended in brackets.
pub fn format_cell(agg: &Aggregate, teacher_accuracy: Option<f64>) -> String {
    match teacher_accuracy {
        Some(t) => format!("{} [{t:.2}]", agg.format()),
        None => agg.format(),
    }
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

pub fn render_markdown(set: &ExperimentSet) -> Result<String> {
    let mut out = String::new();
    if !set.title.is_empty() {
        writeln!(out, "## {}\n", set.title).unwrap();
    }
    let mut header = vec![md_escape(&set.row_label)];
    header.extend(set.cols.iter().map(|c| md_escape(c)));
    writeln!(out, "| {} |", header.join(" | ")).unwrap();
    writeln!(out, "|{}", "---|".repeat(header.len())).unwrap();
    for row in &set.rows {
        let mut line = vec![md_escape(row)];
        for col in &set.cols {
            line.push(match set.summary(row, col)? {
                Some((agg, t)) => format_cell(&agg, t),
                None => MISSING_CELL.to_string(),
            });
        }
        writeln!(out, "| {} |", line.join(" | ")).unwrap();
    }
    out.push('\n');
    for note in METHOD_NOTES.iter().copied().chain(set.notes.iter().map(String::as_str)) {
        writeln!(out, "- {note}").unwrap();
    }
    Ok(out)
}

/// Long format: one line per (row, column) with the raw values joined by `;`.
pub fn render_csv(set: &ExperimentSet) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "col", "n", "mean", "std", "teacher_accuracy", "values"])?;
    for row in &set.rows {
        for col in &set.cols {
            let rec = match set.summary(row, col)? {
                Some((agg, t)) => vec![
                    row.clone(),
                    col.clone(),
                    agg.n.to_string(),
                    format!("{:.6}", agg.mean),
                    format!("{:.6}", agg.std),
                    t.map(|t| format!("{t:.6}")).unwrap_or_default(),
                    agg.values
                        .iter()
                        .map(|v| format!("{v:.6}"))
                        .collect::<Vec<_>>()
                        .join(";"),
                ],
                None => vec![row.clone(), col.clone(), "0".into(), String::new(), String::new(), String::new(), String::new()],
            };
            w.write_record(&rec)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Format(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Accuracy-vs-epoch line plot.
pub fn render_curves_svg(title: &str, curves: &[Curve]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (50.0, 150.0, 30.0, 40.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let max_epoch = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.0))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let x = |e: f64| left + pw * e / max_epoch;
    let y = |a: f64| top + ph * (1.0 - a.clamp(0.0, 100.0) / 100.0);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{left}" y="18" font-family="sans-serif" font-size="14">{}</text>"#,
        xml_escape(title)
    )
    .unwrap();
    writeln!(
        s,
        r#"<path d="M{left:.2} {top:.2} V{:.2} H{:.2}" stroke="black" fill="none"/>"#,
        top + ph,
        left + pw
    )
    .unwrap();
    for tick in (0..=100).step_by(20) {
        let ty = y(tick as f64);
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{tick}</text>"#,
            left - 4.0,
            ty + 3.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">epoch (max {max_epoch})</text>"#,
        left + pw / 2.0,
        h - 10.0
    )
    .unwrap();
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|&(e, a)| format!("{:.2},{:.2}", x(e as f64), y(a)))
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
            pts.join(" ")
        )
        .unwrap();
        let ly = top + 14.0 * i as f64 + 10.0;
        writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            left + pw + 10.0,
            xml_escape(&c.label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    title: &'a str,
    config_hashes: &'a [String],
    method_notes: &'a [&'a str],
    cells: Vec<SummaryCell<'a>>,
}

#[derive(Serialize)]
struct SummaryCell<'a> {
    row: &'a str,
    col: &'a str,
    aggregate: Option<Aggregate>,
    teacher_accuracy: Option<f64>,
}

/// Writes `<stem>.md`, `<stem>.csv`, `<stem>.json` and, when curves are
/// present, `<stem>_curves.svg` into `dir`. Returns the written paths.
pub fn emit_report(set: &ExperimentSet, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut cells = Vec::new();
    for row in &set.rows {
        for col in &set.cols {
            let s = set.summary(row, col)?;
            cells.push(SummaryCell {
                row,
                col,
                teacher_accuracy: s.as_ref().and_then(|x| x.1),
                aggregate: s.map(|x| x.0),
            });
        }
    }
    let summary = Summary {
        schema_version: REPORT_SCHEMA_VERSION,
        title: &set.title,
        config_hashes: &set.config_hashes,
        method_notes: METHOD_NOTES,
        cells,
    };
    let mut files = vec![
        (format!("{stem}.md"), render_markdown(set)?),
        (format!("{stem}.csv"), render_csv(set)?),
        (format!("{stem}.json"), serde_json::to_string_pretty(&summary)? + "\n"),
    ];
    if !set.curves.is_empty() {
        files.push((format!("{stem}_curves.svg"), render_curves_svg(&set.title, &set.curves)));
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
