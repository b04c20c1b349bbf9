//! Sweep grids: a base experiment config plus axes to expand, and the
//! manifest that records every cell of a sweep.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use kdsense_core::augment::{AugmentKind, AugmentationPolicy};
use kdsense_core::ExperimentConfig;
use serde::{Deserialize, Serialize};

use crate::layout::run_dir;
use crate::{user_error, Role};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "grid_manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugProfile {
    #[default]
    Geneactiv,
    Pamap2,
}

impl AugProfile {
    pub fn policy(self, kind: AugmentKind) -> AugmentationPolicy {
        match self {
            AugProfile::Geneactiv => AugmentationPolicy::geneactiv(kind),
            AugProfile::Pamap2 => AugmentationPolicy::pamap2(kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    /// Teacher architectures; defaults to the base config's teacher.
    #[serde(default)]
    pub teacher: Vec<String>,
    #[serde(default)]
    pub tau: Vec<f64>,
    #[serde(default)]
    pub lam: Vec<f64>,
    #[serde(default)]
    pub teacher_aug: Vec<AugmentKind>,
    #[serde(default)]
    pub student_aug: Vec<AugmentKind>,
    #[serde(default = "none_only")]
    pub test_aug: Vec<AugmentKind>,
    /// Defaults to the base config's seeds.
    #[serde(default)]
    pub seed: Vec<u64>,
    #[serde(default = "fold_zero")]
    pub fold: Vec<usize>,
}

fn none_only() -> Vec<AugmentKind> {
    vec![AugmentKind::None]
}

fn fold_zero() -> Vec<usize> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportLayout {
    /// Axes joined into the row label.
    pub rows: Vec<String>,
    /// Axis used for the columns.
    pub cols: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub name: String,
    /// Base experiment config, relative to the grid file.
    pub base: PathBuf,
    #[serde(default)]
    pub aug_profile: AugProfile,
    /// Also train the student from scratch for every student augmentation.
    #[serde(default = "yes")]
    pub scratch_baseline: bool,
    pub axes: Axes,
    pub report: ReportLayout,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    /// Also the run directory name.
    pub id: String,
    pub role: String,
    pub seed: u64,
    pub values: BTreeMap<String, String>,
    pub config_hash: String,
    /// Relative to the sweep output directory.
    pub config: PathBuf,
    pub run_dir: PathBuf,
    #[serde(default)]
    pub teacher: Option<String>,
    pub status: CellStatus,
    /// Test view name -> eval file, relative to the sweep output directory.
    #[serde(default)]
    pub evals: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    pub report: ReportLayout,
    pub test_aug: Vec<String>,
    pub cells: Vec<CellEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| user_error(format!("cannot read manifest {}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| user_error(format!("{}: not a sweep manifest: {e}", path.display())))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(user_error(format!(
                "{}: manifest schema {} is not supported (expected {MANIFEST_SCHEMA_VERSION})",
                path.display(),
                m.schema_version
            )));
        }
        Ok(m)
    }

    pub fn cell(&self, id: &str) -> Option<&CellEntry> {
        self.cells.iter().find(|c| c.id == id)
    }
}

/// A cell before it has run: its full config and dependencies.
#[derive(Debug, Clone)]
pub struct PlannedCell {
    pub entry: CellEntry,
    pub cfg: ExperimentConfig,
}

impl GridConfig {
    pub fn load(path: &Path) -> anyhow::Result<(Self, ExperimentConfig)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| user_error(format!("cannot read grid {}: {e}", path.display())))?;
        let grid: GridConfig =
            toml::from_str(&text).map_err(|e| user_error(format!("{}: {e}", path.display())))?;
        let base_path = path.parent().unwrap_or(Path::new(".")).join(&grid.base);
        let base = ExperimentConfig::load(&base_path)
            .with_context(|| format!("loading base config {}", base_path.display()))?;
        grid.validate()?;
        Ok((grid, base))
    }

    fn validate(&self) -> anyhow::Result<()> {
        let known = [
            "teacher",
            "tau",
            "lam",
            "teacher_aug",
            "student_aug",
            "test_aug",
        ];
        for axis in self.report.rows.iter().chain([&self.report.cols]) {
            if !known.contains(&axis.as_str()) {
                return Err(user_error(format!(
                    "report axis {axis:?} must be one of {}",
                    known.join(", ")
                )));
            }
        }
        if self.report.rows.contains(&self.report.cols) {
            return Err(user_error("report rows and cols share an axis"));
        }
        if self.axes.fold.is_empty() || self.axes.test_aug.is_empty() {
            return Err(user_error("fold and test_aug axes cannot be empty"));
        }
        Ok(())
    }

    /// Expands the grid into teacher, scratch and student cells. Identical
    /// runs collapse into one cell.
    pub fn expand(&self, base: &ExperimentConfig) -> anyhow::Result<Vec<PlannedCell>> {
        let a = &self.axes;
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let teachers = if a.teacher.is_empty() {
            vec![base.models.teacher.clone()]
        } else {
            a.teacher.clone()
        };
        let taus = or(&a.tau, base.kd.tau);
        let lams = or(&a.lam, base.kd.lam);
        let teacher_augs = if a.teacher_aug.is_empty() {
            vec![base.augment.teacher.kind]
        } else {
            a.teacher_aug.clone()
        };
        let student_augs = if a.student_aug.is_empty() {
            vec![base.augment.student.kind]
        } else {
            a.student_aug.clone()
        };
        let seeds = if a.seed.is_empty() { base.seeds.clone() } else { a.seed.clone() };

        // Axes with several values that the layout does not show would be
        // silently averaged together.
        let lens = [
            ("teacher", teachers.len()),
            ("tau", taus.len()),
            ("lam", lams.len()),
            ("teacher_aug", teacher_augs.len()),
            ("student_aug", student_augs.len()),
            ("test_aug", a.test_aug.len()),
        ];
        for (axis, n) in lens {
            let shown = self.report.rows.iter().any(|r| r == axis) || self.report.cols == axis;
            if n > 1 && !shown {
                return Err(user_error(format!(
                    "axis {axis} has {n} values but is not a report row or column"
                )));
            }
        }

        let mut cells: Vec<PlannedCell> = Vec::new();
        let mut push = |cell: PlannedCell| {
            if !cells.iter().any(|c| c.entry.id == cell.entry.id) {
                cells.push(cell);
            }
        };
        let cell_cfg = |seed: u64, fold: usize| {
            let mut cfg = base.clone();
            cfg.seeds = vec![seed];
            cfg.dataset.fold = fold;
            cfg.augment.test = self.aug_profile.policy(AugmentKind::None);
            cfg
        };
        for &fold in &a.fold {
            for &seed in &seeds {
                if self.scratch_baseline {
                    for &sa in &student_augs {
                        let mut cfg = cell_cfg(seed, fold);
                        cfg.augment.student = self.aug_profile.policy(sa);
                        cfg.validate()?;
                        let values = BTreeMap::from([
                            ("teacher".to_string(), "scratch".to_string()),
                            ("tau".to_string(), "-".to_string()),
                            ("lam".to_string(), "-".to_string()),
                            ("teacher_aug".to_string(), "-".to_string()),
                            ("student_aug".to_string(), sa.to_string()),
                        ]);
                        push(planned(cfg, Role::Scratch, seed, fold, values, None)?);
                    }
                }
                for teacher in &teachers {
                    for &ta in &teacher_augs {
                        let mut tcfg = cell_cfg(seed, fold);
                        tcfg.models.teacher = teacher.clone();
                        tcfg.augment.teacher = self.aug_profile.policy(ta);
                        tcfg.validate()?;
                        let tvalues = BTreeMap::from([
                            ("teacher".to_string(), teacher.clone()),
                            ("teacher_aug".to_string(), ta.to_string()),
                        ]);
                        let tcell = planned(tcfg.clone(), Role::Teacher, seed, fold, tvalues.clone(), None)?;
                        let tid = tcell.entry.id.clone();
                        push(tcell);
                        for &tau in &taus {
                            for &lam in &lams {
                                for &sa in &student_augs {
                                    let mut cfg = tcfg.clone();
                                    cfg.kd.tau = tau;
                                    cfg.kd.lam = lam;
                                    cfg.augment.student = self.aug_profile.policy(sa);
                                    cfg.validate()?;
                                    let mut values = tvalues.clone();
                                    values.insert("tau".into(), fmt_num(tau));
                                    values.insert("lam".into(), fmt_num(lam));
                                    values.insert("student_aug".into(), sa.to_string());
                                    push(planned(cfg, Role::Student, seed, fold, values, Some(tid.clone()))?);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

pub fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn planned(
    cfg: ExperimentConfig,
    role: Role,
    seed: u64,
    fold: usize,
    mut values: BTreeMap<String, String>,
    teacher: Option<String>,
) -> anyhow::Result<PlannedCell> {
    values.insert("seed".into(), seed.to_string());
    values.insert("fold".into(), fold.to_string());
    let dir = run_dir(&cfg, role, seed)?;
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .context("run directory has no name")?
        .to_string();
    Ok(PlannedCell {
        entry: CellEntry {
            config: PathBuf::from("cells").join(format!("{id}.toml")),
            run_dir: PathBuf::from("runs").join(&id),
            id,
            role: role.as_str().into(),
            seed,
            values,
            config_hash: cfg.config_hash()?,
            teacher,
            status: CellStatus::Pending,
            evals: BTreeMap::new(),
            error: None,
        },
        cfg,
    })
}
