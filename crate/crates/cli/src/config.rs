//! Run configuration: TOML file, command-line overrides, defaults and
//! validation.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use pathkernel::registry::ModelSpec;
use pathkernel::ParamFlavor;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Finite,
    Ergodic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Overflow {
    #[default]
    Abort,
    Tolerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Run,
    Sweep,
    Lyapunov,
    Oracle,
}

/// Flags shared by every subcommand. Each one overrides the matching key of
/// `--config`.
#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// lorenz96, ou or gauss.
    #[arg(long)]
    pub model: Option<String>,
    /// drift, diffusion or initial (also gamma0, gamma1, gamma2).
    #[arg(long)]
    pub param: Option<ParamFlavor>,
    /// mean, x or x2.
    #[arg(long)]
    pub observable: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Horizon in time units.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Kernel window in time units (ergodic mode).
    #[arg(long = "W")]
    pub window: Option<f64>,
    /// Spin-up steps discarded before averaging.
    #[arg(long)]
    pub mpre: Option<usize>,
    /// Sample paths (finite mode).
    #[arg(long = "L")]
    pub paths: Option<usize>,
    /// Independent orbits (ergodic mode).
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Batch length in steps for batch-means errors.
    #[arg(long)]
    pub batch: Option<usize>,
    /// const:<alpha>, zero, kernel or bel.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Results CSV; metadata goes to `<out>.meta.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// Comma-separated, strictly increasing gamma values (sweep).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Option<Vec<f64>>,
    /// Append noiseless observable averages to an ergodic Lorenz 96 sweep.
    #[arg(long)]
    pub deterministic: bool,
    /// Finite-difference step (oracle).
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, value_enum)]
    pub overflow: Option<Overflow>,
    /// Write the state of path 0 to this CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Record every n-th step of the trace.
    #[arg(long)]
    pub trace_every: Option<usize>,
    /// Steps between tangent renormalizations (lyapunov).
    #[arg(long)]
    pub renorm: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileModel {
    name: Option<String>,
    param: Option<ParamFlavor>,
    dim: Option<usize>,
    sigma0: Option<f64>,
    rate: Option<f64>,
    sigma: Option<f64>,
    x0: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mode: Option<Mode>,
    #[serde(default)]
    model: FileModel,
    observable: Option<String>,
    gamma: Option<f64>,
    dt: Option<f64>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    #[serde(rename = "W")]
    window: Option<f64>,
    mpre: Option<usize>,
    #[serde(rename = "L")]
    paths: Option<usize>,
    replicates: Option<usize>,
    batch: Option<usize>,
    schedule: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    grid: Option<Vec<f64>>,
    deterministic: Option<bool>,
    h: Option<f64>,
    overflow: Option<Overflow>,
    trace: Option<PathBuf>,
    trace_every: Option<usize>,
    renorm: Option<usize>,
}

/// Fully resolved settings, echoed into the metadata sidecar.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub mode: Mode,
    pub model: ModelSpec,
    pub observable: String,
    pub gamma: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub steps: usize,
    /// Window length in steps.
    pub window: Option<usize>,
    pub spinup: usize,
    pub paths: usize,
    pub replicates: usize,
    pub batch: Option<usize>,
    pub schedule: String,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub grid: Vec<f64>,
    pub deterministic: bool,
    pub h: f64,
    pub overflow: Overflow,
    pub trace: Option<PathBuf>,
    pub trace_every: usize,
    pub renorm: usize,
}

pub const DEFAULT_DT: f64 = 0.002;
pub const DEFAULT_PATHS: usize = 1000;
pub const DEFAULT_SCHEDULE: &str = "const:10";
pub const DEFAULT_RENORM: usize = 10;
pub const DEFAULT_ORACLE_REPLICATES: usize = 8;

fn read_file(path: &Path) -> Result<FileConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Steps in `span` time units of size `dt`; `span` must be a whole number of
/// steps.
fn whole_steps(name: &str, span: f64, dt: f64) -> Result<usize> {
    ensure!(
        span.is_finite() && span > 0.0,
        "{name} must be positive, got {span}"
    );
    let steps = (span / dt).round();
    ensure!(
        steps >= 1.0,
        "{name} = {span} is shorter than one step of {dt}"
    );
    ensure!(
        (steps * dt - span).abs() <= 1e-9 * span.max(1.0),
        "{name} = {span} is not a whole number of steps of {dt}"
    );
    Ok(steps as usize)
}

impl RunConfig {
    pub fn resolve(command: Command, flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let m = &file.model;
        let model = ModelSpec {
            name: flags
                .model
                .clone()
                .or(m.name.clone())
                .unwrap_or_else(|| "lorenz96".into()),
            param: flags.param.or(m.param).unwrap_or(ParamFlavor::Drift),
            dim: flags.dim.or(m.dim),
            sigma0: flags.sigma0.or(m.sigma0),
            rate: flags.rate.or(m.rate),
            sigma: flags.sigma.or(m.sigma),
            x0: flags.x0.or(m.x0),
        };
        let mode = flags.mode.or(file.mode).unwrap_or(Mode::Finite);
        let dt = flags.dt.or(file.dt).unwrap_or(DEFAULT_DT);
        ensure!(dt.is_finite() && dt > 0.0, "dt must be positive, got {dt}");
        let horizon = flags.horizon.or(file.horizon).unwrap_or(1.0);
        let steps = whole_steps("T", horizon, dt)?;
        let window = match flags.window.or(file.window) {
            Some(w) => Some(whole_steps("W", w, dt)?),
            None => None,
        };
        if mode == Mode::Ergodic && command != Command::Lyapunov && command != Command::Oracle {
            ensure!(window.is_some(), "ergodic mode needs a window --W");
        }
        let gamma = flags.gamma.or(file.gamma).unwrap_or(0.0);
        ensure!(gamma.is_finite(), "gamma must be finite");
        let grid = match flags.grid.clone().or(file.grid) {
            Some(g) => g,
            None => vec![gamma],
        };
        ensure!(!grid.is_empty(), "gamma grid is empty");
        ensure!(
            grid.iter().all(|g| g.is_finite()),
            "gamma grid has non-finite values"
        );
        ensure!(
            grid.windows(2).all(|w| w[0] < w[1]),
            "gamma grid must be strictly increasing"
        );

        let replicates = flags
            .replicates
            .or(file.replicates)
            .unwrap_or(match (command, mode) {
                (Command::Oracle, Mode::Ergodic) => DEFAULT_ORACLE_REPLICATES,
                _ => 1,
            });
        ensure!(replicates >= 1, "replicates must be at least 1");
        let paths = flags.paths.or(file.paths).unwrap_or(DEFAULT_PATHS);
        if mode == Mode::Finite && command != Command::Lyapunov {
            ensure!(paths >= 2, "need at least 2 paths, got {paths}");
        }
        let h = flags
            .h
            .or(file.h)
            .unwrap_or(pathkernel::oracle::FdOracleConfig::DEFAULT_H);
        ensure!(h.is_finite() && h > 0.0, "h must be positive, got {h}");
        let out = match flags.out.clone().or(file.out) {
            Some(o) => o,
            None => bail!("no output path; pass --out"),
        };
        let deterministic = flags.deterministic || file.deterministic.unwrap_or(false);
        if deterministic {
            ensure!(
                command == Command::Sweep && mode == Mode::Ergodic && model.name == "lorenz96",
                "the deterministic column is only available for ergodic lorenz96 sweeps"
            );
        }
        let trace_every = flags.trace_every.or(file.trace_every).unwrap_or(1);
        ensure!(trace_every >= 1, "trace_every must be at least 1");
        let renorm = flags.renorm.or(file.renorm).unwrap_or(DEFAULT_RENORM);
        ensure!(renorm >= 1, "renorm must be at least 1");
        let workers = flags.workers.or(file.workers);
        if let Some(w) = workers {
            ensure!(w >= 1, "workers must be at least 1");
        }

        Ok(Self {
            command,
            mode,
            model,
            observable: flags
                .observable
                .clone()
                .or(file.observable)
                .unwrap_or_else(|| "mean".into()),
            gamma,
            dt,
            horizon,
            steps,
            window,
            spinup: flags.mpre.or(file.mpre).unwrap_or(0),
            paths,
            replicates,
            batch: flags.batch.or(file.batch),
            schedule: flags
                .schedule
                .clone()
                .or(file.schedule)
                .unwrap_or_else(|| DEFAULT_SCHEDULE.into()),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            out,
            workers,
            grid,
            deterministic,
            h,
            overflow: flags.overflow.or(file.overflow).unwrap_or_default(),
            trace: flags.trace.clone().or(file.trace),
            trace_every,
            renorm,
        })
    }

    /// The finite horizon, when the run has one.
    pub fn finite_horizon(&self) -> Option<f64> {
        (self.mode == Mode::Finite).then_some(self.horizon)
    }
}
