use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use kdsense_core::distill::read_summary;

use super::prepare;
use crate::grid::{CellStatus, GridConfig, Manifest, MANIFEST_FILE, MANIFEST_SCHEMA_VERSION};
use crate::layout::{eval_file, write_atomic};
use crate::user_error;

struct Job {
    cell: usize,
    args: Vec<String>,
    log: PathBuf,
    /// Set when the job evaluates a test view instead of training.
    eval: Option<String>,
}

pub fn run(
    grid_path: &Path,
    out: Option<&Path>,
    workers: Option<usize>,
    resume: bool,
) -> anyhow::Result<()> {
    let (grid, mut base) = GridConfig::load(grid_path)?;
    if let Some(out) = out {
        base.output_dir = out.to_path_buf();
    }
    let out = std::path::absolute(&base.output_dir)?;
    base.output_dir = out.clone();
    base.cache_dir = Some(std::path::absolute(base.cache_dir())?);

    let planned = grid.expand(&base)?;
    let manifest_path = out.join(MANIFEST_FILE);
    let mut manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        name: if grid.name.is_empty() { base.name.clone() } else { grid.name.clone() },
        report: grid.report.clone(),
        test_aug: grid.axes.test_aug.iter().map(|k| k.to_string()).collect(),
        cells: planned.iter().map(|p| p.entry.clone()).collect(),
    };
    if manifest_path.exists() {
        if !resume {
            return Err(user_error(format!(
                "{} already exists; pass --resume to continue it or choose another --out",
                manifest_path.display()
            )));
        }
        let old = Manifest::read(&manifest_path)?;
        for cell in &mut manifest.cells {
            if let Some(prev) = old.cell(&cell.id) {
                if prev.status == CellStatus::Done && read_summary(&out.join(&prev.run_dir)).is_ok() {
                    cell.status = CellStatus::Done;
                    cell.evals = prev
                        .evals
                        .iter()
                        .filter(|(_, f)| out.join(f).is_file())
                        .map(|(k, f)| (k.clone(), f.clone()))
                        .collect();
                }
            }
        }
    }

    std::fs::create_dir_all(out.join("logs"))?;
    for p in &planned {
        let text = p.cfg.to_toml_string()?;
        write_atomic(&out.join(&p.entry.config), text.as_bytes())?;
    }
    write_manifest(&manifest_path, &manifest)?;
    prepare::run(&base)?;

    let workers = workers
        .unwrap_or_else(num_cpus::get_physical)
        .max(1);
    let done = manifest.cells.iter().filter(|c| c.status == CellStatus::Done).count();
    log::info!(
        "sweep {}: {} cells ({done} already done), {workers} worker(s), output {}",
        manifest.name,
        manifest.cells.len(),
        out.display()
    );

    let manifest = Mutex::new(manifest);
    let exe = std::env::current_exe().context("locating the kdsense executable")?;

    // teachers and scratch runs, then students, then evaluations
    for phase in 0..3 {
        let jobs = {
            let m = manifest.lock().unwrap();
            plan_phase(phase, &m, &out)
        };
        run_jobs(&exe, &out, &jobs, workers, &manifest, &manifest_path);
    }

    let m = manifest.into_inner().unwrap();
    let failed: Vec<&str> = m
        .cells
        .iter()
        .filter(|c| c.status != CellStatus::Done || m.test_aug.iter().any(|v| !c.evals.contains_key(v)))
        .map(|c| c.id.as_str())
        .collect();
    if !failed.is_empty() {
        anyhow::bail!(
            "{} cell(s) did not finish: {}; see {}/logs and rerun with --resume",
            failed.len(),
            failed.join(", "),
            out.display()
        );
    }
    log::info!("sweep complete; manifest at {}", manifest_path.display());
    Ok(())
}

fn plan_phase(phase: usize, m: &Manifest, out: &Path) -> Vec<Job> {
    let mut jobs = Vec::new();
    for (i, cell) in m.cells.iter().enumerate() {
        let cfg_path = out.join(&cell.config).display().to_string();
        let base_args = |cmd: &str| {
            vec![
                cmd.to_string(),
                "--config".into(),
                cfg_path.clone(),
                "--out".into(),
                out.display().to_string(),
            ]
        };
        match phase {
            0 | 1 => {
                let is_student = cell.role == "student";
                if (phase == 1) != is_student || cell.status == CellStatus::Done {
                    continue;
                }
                let mut args = base_args("train");
                args.extend(["--role".into(), cell.role.clone(), "--seed".into(), cell.seed.to_string()]);
                if let Some(t) = &cell.teacher {
                    let teacher = m.cell(t).expect("teacher cell planned");
                    args.extend(["--teacher".into(), out.join(&teacher.run_dir).display().to_string()]);
                }
                jobs.push(Job {
                    cell: i,
                    args,
                    log: out.join("logs").join(format!("{}.train.log", cell.id)),
                    eval: None,
                });
            }
            _ => {
                if cell.status != CellStatus::Done {
                    continue;
                }
                for view in &m.test_aug {
                    if cell.evals.contains_key(view) {
                        continue;
                    }
                    let mut args = base_args("evaluate");
                    args.extend([
                        "--run".into(),
                        out.join(&cell.run_dir).display().to_string(),
                        "--test-aug".into(),
                        view.clone(),
                    ]);
                    jobs.push(Job {
                        cell: i,
                        args,
                        log: out.join("logs").join(format!("{}.eval-{view}.log", cell.id)),
                        eval: Some(view.clone()),
                    });
                }
            }
        }
    }
    jobs
}

fn run_jobs(
    exe: &Path,
    out: &Path,
    jobs: &[Job],
    workers: usize,
    manifest: &Mutex<Manifest>,
    manifest_path: &Path,
) {
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers.min(jobs.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(k) else { break };
                let blocked = {
                    let m = manifest.lock().unwrap();
                    let cell = &m.cells[job.cell];
                    cell.teacher
                        .as_ref()
                        .filter(|_| job.eval.is_none())
                        .and_then(|t| m.cell(t))
                        .filter(|t| t.status != CellStatus::Done)
                        .map(|t| t.id.clone())
                };
                let result = match blocked {
                    Some(t) => Err(format!("teacher {t} did not finish")),
                    None => spawn(exe, job),
                };
                let mut m = manifest.lock().unwrap();
                let cell = &mut m.cells[job.cell];
                match (&result, &job.eval) {
                    (Ok(()), None) => {
                        cell.status = CellStatus::Done;
                        cell.error = None;
                    }
                    (Ok(()), Some(view)) => {
                        let rel = eval_file(&cell.run_dir, view);
                        if out.join(&rel).is_file() {
                            cell.evals.insert(view.clone(), rel);
                        }
                    }
                    (Err(e), _) => {
                        log::error!("{}: {e}", cell.id);
                        if job.eval.is_none() {
                            cell.status = CellStatus::Failed;
                        }
                        cell.error = Some(e.clone());
                    }
                }
                log::info!("[{}/{}] {} {}", k + 1, jobs.len(), cell.id, if result.is_ok() { "ok" } else { "FAILED" });
                if let Err(e) = write_manifest(manifest_path, &m) {
                    log::error!("writing manifest: {e:#}");
                }
            });
        }
    });
}

fn spawn(exe: &Path, job: &Job) -> Result<(), String> {
    let log = std::fs::File::create(&job.log).map_err(|e| format!("{}: {e}", job.log.display()))?;
    let err = log.try_clone().map_err(|e| e.to_string())?;
    let status = Command::new(exe)
        .args(&job.args)
        .stdin(Stdio::null())
        .stdout(log)
        .stderr(err)
        .status()
        .map_err(|e| format!("spawning {}: {e}", exe.display()))?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("exited with {status}; log {}", job.log.display()))
    }
}

fn write_manifest(path: &Path, m: &Manifest) -> anyhow::Result<()> {
    let mut json = serde_json::to_string_pretty(m)?;
    json.push('\n');
    write_atomic(path, json.as_bytes())
}
