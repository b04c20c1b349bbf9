use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kdsense_core::distill::{read_metrics, read_summary};
use kdsense_core::eval::{aggregate, emit_report, welch_ttest, Curve, ExperimentSet, GridCell};
use kdsense_core::Error;

use super::evaluate::read_eval;
use crate::grid::{CellEntry, CellStatus, Manifest};

const SCRATCH: &str = "scratch";

#[derive(Default)]
struct Acc {
    accuracy: Vec<f64>,
    ece: Vec<f64>,
    teacher: Vec<f64>,
    hashes: Vec<String>,
}

/// Renders accuracy and ECE tables plus teacher learning curves for a sweep.
pub fn run(manifest_path: &Path, out: Option<&Path>) -> anyhow::Result<Vec<PathBuf>> {
    let m = Manifest::read(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let out = out.map_or_else(|| root.join("report"), Path::to_path_buf);

    let mut rows: Vec<String> = Vec::new();
    let mut cols: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(String, String), Acc> = BTreeMap::new();
    for cell in m.cells.iter().filter(|c| c.role != "teacher" && c.status == CellStatus::Done) {
        let summary = read_summary(&root.join(&cell.run_dir))?;
        for (view, file) in &cell.evals {
            let eval = read_eval(&root.join(file))?;
            let key = |axis: &str| key_value(cell, axis, view);
            let row = m.report.rows.iter().map(|a| key(a)).collect::<Vec<_>>().join(" / ");
            let col = key(&m.report.cols);
            if !rows.contains(&row) {
                rows.push(row.clone());
            }
            if !cols.contains(&col) {
                cols.push(col.clone());
            }
            let acc = cells.entry((row, col)).or_default();
            acc.accuracy.push(eval.accuracy);
            acc.ece.push(eval.ece);
            acc.teacher.extend(summary.teacher_accuracy);
            acc.hashes.push(cell.config_hash.clone());
        }
    }
    let mut hashes: Vec<String> = cells.values().flat_map(|a| a.hashes.clone()).collect();
    hashes.sort();
    hashes.dedup();

    let row_label = m.report.rows.join(" / ");
    let build = |title: &str, pick: fn(&Acc) -> &Vec<f64>, with_teacher: bool| ExperimentSet {
        title: title.to_string(),
        row_label: row_label.clone(),
        rows: rows.clone(),
        cols: cols.clone(),
        cells: cells
            .iter()
            .map(|((r, c), a)| GridCell {
                row: r.clone(),
                col: c.clone(),
                values: pick(a).clone(),
                teacher_accuracy: (with_teacher && !a.teacher.is_empty())
                    .then(|| a.teacher.iter().sum::<f64>() / a.teacher.len() as f64),
            })
            .collect(),
        curves: Vec::new(),
        notes: Vec::new(),
        config_hashes: hashes.clone(),
    };

    let mut accuracy = build(&format!("{}: test accuracy (%)", m.name), |a| &a.accuracy, true);
    accuracy.notes = significance_notes(&accuracy, &m.report.rows)?;
    accuracy.curves = teacher_curves(&m, root)?;
    let ece = build(&format!("{}: expected calibration error", m.name), |a| &a.ece, false);

    let mut written = emit_report(&accuracy, &out, "accuracy")?;
    written.extend(emit_report(&ece, &out, "ece")?);
    for p in &written {
        log::info!("wrote {}", p.display());
    }
    Ok(written)
}

fn key_value(cell: &CellEntry, axis: &str, view: &str) -> String {
    if axis == "test_aug" {
        return view.to_string();
    }
    cell.values.get(axis).cloned().unwrap_or_else(|| "-".into())
}

/// Welch tests of every distilled row against its scratch counterpart in
/// the same column, where both have at least two values.
fn significance_notes(set: &ExperimentSet, axes: &[String]) -> anyhow::Result<Vec<String>> {
    let mut notes = Vec::new();
    let find = |r: &str, c: &str| set.cells.iter().find(|x| x.row == r && x.col == c);
    let scratch_of = |row: &str| {
        row.split(" / ")
            .zip(axes)
            .map(|(v, axis)| match axis.as_str() {
                "teacher" => SCRATCH,
                "tau" | "lam" | "teacher_aug" => "-",
                _ => v,
            })
            .collect::<Vec<_>>()
            .join(" / ")
    };
    for row in &set.rows {
        let base_row = scratch_of(row);
        if *row == base_row {
            continue;
        }
        for col in &set.cols {
            let (Some(cell), Some(base)) = (find(row, col), find(&base_row, col)) else {
                continue;
            };
            if cell.values.len() < 2 || base.values.len() < 2 {
                continue;
            }
            match welch_ttest(&cell.values, &base.values) {
                Ok(t) => notes.push(format!(
                    "{row} vs {base_row}, {col}: difference {:+.2}, t = {:.3}, df = {:.1}, p = {:.4}",
                    aggregate(&cell.values)?.mean - aggregate(&base.values)?.mean,
                    t.t,
                    t.df,
                    t.p
                )),
                Err(Error::Degenerate(why)) => {
                    notes.push(format!("{row} vs {base_row}, {col}: no test ({why})"))
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(notes)
}

/// Mean per-epoch test accuracy of the teachers, one curve per teacher
/// architecture and augmentation.
fn teacher_curves(m: &Manifest, root: &Path) -> anyhow::Result<Vec<Curve>> {
    let mut groups: BTreeMap<String, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for cell in m.cells.iter().filter(|c| c.role == "teacher" && c.status == CellStatus::Done) {
        let label = format!(
            "{} ({})",
            key_value(cell, "teacher", ""),
            key_value(cell, "teacher_aug", "")
        );
        let g = groups.entry(label).or_default();
        for r in read_metrics(&root.join(&cell.run_dir))? {
            g.entry(r.epoch).or_default().push(r.test_accuracy);
        }
    }
    Ok(groups
        .into_iter()
        .map(|(label, pts)| Curve {
            label,
            points: pts
                .into_iter()
                .map(|(e, v)| (e, v.iter().sum::<f64>() / v.len() as f64))
                .collect(),
        })
        .collect())
}
