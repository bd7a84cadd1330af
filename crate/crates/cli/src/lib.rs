//! Command-line front-end: `train`, `eval-bandit`, `sweep`, `export-trajectories`
//! and `export-reward-map`. Every output is a CSV, TOML or JSON file; plotting
//! is left to external tools.

pub mod commands;
pub mod config;
pub mod sweep;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lq_core::nn::load_checkpoint;

use commands::{PolicySettings, TraceSpec};
use config::RunConfig;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or config; nothing was run.
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "lq",
    version,
    about = "Actor-free Q-learning with Langevin action sampling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML run config; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated seeds, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    pub seed: Vec<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key=value, applied in order after the config file (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Shorthand for --override train.algorithm=<ALG>.
    #[arg(long)]
    pub algorithm: Option<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).map_err(usage)?,
            None => RunConfig::default(),
        };
        cfg.apply_overrides(&self.overrides).map_err(usage)?;
        if let Some(alg) = &self.algorithm {
            cfg.set("train.algorithm", alg).map_err(usage)?;
        }
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Critic checkpoint directory.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Run config to take sampler and schedule settings from.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Temperature w, overriding the config.
    #[arg(long)]
    pub temperature: Option<f32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl PolicyArgs {
    fn settings(&self) -> Result<PolicySettings, CliError> {
        let cfg = self
            .config
            .as_deref()
            .map(RunConfig::load)
            .transpose()
            .map_err(usage)?;
        let mut s = PolicySettings::from_config(cfg.as_ref());
        if let Some(w) = self.temperature {
            if !(w > 0.0 && w.is_finite()) {
                return Err(usage(format!("temperature must be positive, got {w}")));
            }
            s.sampler.temperature = w;
        }
        Ok(s)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one run per seed into <out>/seed_<n>/.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also write trajectories.csv from a 20x20 grid of starting actions.
        #[arg(long)]
        dump_trajectories: bool,
    },
    /// Sample a bandit checkpoint and report mode coverage and mean reward.
    EvalBandit {
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// CSV of every sample (x, y, reward).
        #[arg(long, default_value = "eval_samples.csv")]
        out: PathBuf,
    },
    /// Train the cartesian product of grid axes for every seed.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// key=v1,v2 or k1:k2=a1:b1,a2:b2 (repeatable).
        #[arg(long = "grid", value_name = "SPEC")]
        grid: Vec<String>,
    },
    /// Per-step Langevin iterates from a grid of starting actions.
    ExportTrajectories {
        #[command(flatten)]
        policy: PolicyArgs,
        /// Grid points per action dimension.
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        low: f32,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        high: f32,
        /// Noise levels L (default 10; plain critics run L*T steps at one level).
        #[arg(long, default_value_t = 10)]
        levels: usize,
        /// Steps per level T (default 1).
        #[arg(long, default_value_t = 1)]
        steps_per_level: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bandit reward on a regular grid (x, y, reward).
    ExportRewardMap {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 201)]
        resolution: usize,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        low: f32,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        high: f32,
    },
}

/// Parses `args` (including the program name) and runs the command.
/// Help and version requests print and return `Ok`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}").map_err(anyhow::Error::from)?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    execute(cli.command, out)
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Train {
            config,
            dump_trajectories,
        } => {
            let cfg = config.resolve()?;
            commands::cmd_train(&cfg, dump_trajectories, out)?;
        }
        Command::EvalBandit {
            policy,
            samples,
            out: csv,
        } => {
            let settings = policy.settings()?;
            commands::cmd_eval_bandit(
                &policy.checkpoint,
                samples,
                &settings,
                policy.seed,
                &csv,
                out,
            )?;
        }
        Command::Sweep { config, grid } => {
            let cfg = config.resolve()?;
            let axes = grid
                .iter()
                .map(|g| sweep::parse_axis(g))
                .collect::<Result<Vec<_>, _>>()
                .map_err(usage)?;
            let runs = sweep::plan(&cfg, &axes).map_err(usage)?;
            let summary = commands::cmd_sweep(&runs, &axes, &cfg.out, out)?;
            writeln!(out, "summary -> {}", summary.display()).map_err(anyhow::Error::from)?;
        }
        Command::ExportTrajectories {
            policy,
            grid,
            low,
            high,
            levels,
            steps_per_level,
            out: path,
        } => {
            let mut settings = policy.settings()?;
            settings.schedule.levels = levels;
            settings.schedule.steps_per_level = steps_per_level;
            if grid == 0 || !(low < high) {
                return Err(usage("need --grid >= 1 and --low < --high"));
            }
            let schedule = settings
                .schedule
                .build(settings.sampler.epsilon)
                .map_err(usage)?;
            let q = load_checkpoint(&policy.checkpoint).map_err(anyhow::Error::from)?;
            let spec = TraceSpec {
                per_side: grid,
                low,
                high,
                seed: policy.seed,
            };
            let file = std::fs::File::create(&path)
                .map_err(|e| anyhow::anyhow!("creating {}: {e}", path.display()))?;
            let state = vec![0.0; q.state_dim()];
            let rows = commands::write_trajectories(
                std::io::BufWriter::new(file),
                &q,
                &state,
                &settings.sampler,
                &schedule,
                &spec,
            )?;
            writeln!(
                out,
                "{rows} rows ({}) -> {}",
                commands::method_name(&q),
                path.display()
            )
            .map_err(anyhow::Error::from)?;
        }
        Command::ExportRewardMap {
            out: path,
            resolution,
            low,
            high,
        } => {
            commands::cmd_export_reward_map(&path, low, high, resolution)?;
            writeln!(
                out,
                "{} rows -> {}",
                resolution * resolution,
                path.display()
            )
            .map_err(anyhow::Error::from)?;
        }
    }
    Ok(())
}
