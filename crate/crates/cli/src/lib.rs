//! `kdsense` command-line driver: dataset preparation, training, sweeps,
//! evaluation, reports and latency benchmarks.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod grid;
pub mod layout;

pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

/// A problem with the invocation or its inputs rather than with the tool.
#[derive(Debug)]
pub struct UserError(pub String);

impl std::fmt::Display for UserError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

pub fn user_error(msg: impl Into<String>) -> anyhow::Error {
    UserError(msg.into()).into()
}

/// 1 for user errors (bad config, missing inputs), 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use kdsense_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UserError>() {
            return EXIT_USER;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidArgument(_)
                | E::Ingestion { .. }
                | E::MalformedRow { .. }
                | E::SchemaMismatch { .. }
                | E::InvalidSpec(_)
                | E::ShapeMismatch(_)
                | E::Format(_)
                | E::Io { .. } => EXIT_USER,
                _ => EXIT_INTERNAL,
            };
        }
    }
    EXIT_INTERNAL
}

#[derive(Debug, Parser)]
#[command(name = "kdsense", version, about = "Knowledge distillation for wearable-sensor activity recognition")]
pub struct Cli {
    /// Experiment (or grid, for `sweep`) configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for `train`; defaults to the first seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parallel worker processes for `sweep`; defaults to the physical core count.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Continue an existing sweep, skipping completed cells.
    #[arg(long, global = true)]
    pub resume: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Role {
    Teacher,
    Scratch,
    Student,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Teacher => "teacher",
            Role::Scratch => "scratch",
            Role::Student => "student",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Window, split and cache a dataset.
    PrepareData,
    /// Train one model for one seed.
    Train {
        #[arg(long, value_enum)]
        role: Role,
        /// Teacher run directory for `--role student`; defaults to the
        /// teacher run of the same config and seed.
        #[arg(long)]
        teacher: Option<PathBuf>,
    },
    /// Run a grid of teacher/student cells as separate processes.
    Sweep,
    /// Evaluate runs on a (possibly augmented) test view.
    Evaluate {
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        /// Augmentation applied to the test windows.
        #[arg(long, default_value = "none")]
        test_aug: String,
    },
    /// Render tables and curves from a sweep manifest.
    Report {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Batch-size-1 inference latency of checkpoints.
    Benchmark {
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long, default_value = "cpu")]
        device: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 50)]
        warmup: usize,
        /// Window length of the random inputs when no `--config` is given.
        #[arg(long, default_value_t = 128)]
        window_len: usize,
    },
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::PrepareData => {
            let cfg = load_config(&cli)?;
            commands::prepare::run(&cfg).map(|_| ())
        }
        Command::Train { role, teacher } => {
            let cfg = load_config(&cli)?;
            commands::train::run(&cfg, *role, cli.seed, teacher.as_deref()).map(|_| ())
        }
        Command::Sweep => {
            let path = require_config(&cli)?;
            commands::sweep::run(path, cli.out.as_deref(), cli.workers, cli.resume)
        }
        Command::Evaluate { runs, test_aug } => {
            let cfg = cli.config.as_ref().map(|_| load_config(&cli)).transpose()?;
            commands::evaluate::run(runs, test_aug, cfg.as_ref()).map(|_| ())
        }
        Command::Report { manifest } => {
            commands::report::run(manifest, cli.out.as_deref()).map(|_| ())
        }
        Command::Benchmark {
            checkpoints,
            device,
            samples,
            warmup,
            window_len,
        } => {
            let cfg = cli.config.as_ref().map(|_| load_config(&cli)).transpose()?;
            let opts = commands::benchmark::Options {
                device: device.clone(),
                samples: *samples,
                warmup: *warmup,
                window_len: *window_len,
                out: cli.out.clone(),
            };
            commands::benchmark::run(checkpoints, cfg.as_ref(), &opts).map(|_| ())
        }
    }
}

fn require_config(cli: &Cli) -> anyhow::Result<&Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| user_error("--config is required for this command"))
}

/// Loads the experiment config with environment overrides, then `--out`.
pub fn load_config(cli: &Cli) -> anyhow::Result<kdsense_core::ExperimentConfig> {
    let path = require_config(cli)?;
    let mut cfg = kdsense_core::ExperimentConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}
