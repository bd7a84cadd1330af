use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use lq_core::agent::{
    policy_actions, train, Algorithm, CsvMetrics, MetricsRecord, MetricsSink, SamplerSettings,
    ScheduleSettings, TrainOutcome,
};
use lq_core::env::{
    format_num, mode_coverage, write_reward_map, ActionEvaluation, BanditEnv, Environment,
    COVERAGE_RADIUS,
};
use lq_core::nn::{load_checkpoint, save_checkpoint, QNetwork};
use lq_core::sampler::{
    run_langevin, schedule_levels, ActionInit, Level, NoiseSchedule, TraceEvent,
};
use ndarray::Array2;
use serde::Serialize;

use crate::config::RunConfig;
use crate::sweep::{describe, grid_keys, GridAxis, PlannedRun};

/// Metrics CSV plus numbered checkpoints inside one run directory.
struct RunSink {
    metrics: CsvMetrics<BufWriter<File>>,
    checkpoints: PathBuf,
}

impl MetricsSink for RunSink {
    fn record(&mut self, record: &MetricsRecord) -> lq_core::Result<()> {
        self.metrics.record(record)
    }

    fn checkpoint(&mut self, step: u64, critic: &QNetwork) -> lq_core::Result<()> {
        save_checkpoint(&self.checkpoints.join(format!("step_{step:08}")), critic)
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub env_steps: u64,
    pub episodes: u64,
    pub updates: u64,
    pub evaluation: Option<EvaluationReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub mean_reward: f64,
    pub std_reward: f64,
    /// Top, right, bottom, left.
    pub coverage: Option<[f64; 4]>,
    pub coverage_sum: Option<f64>,
    pub samples: usize,
}

impl EvaluationReport {
    fn from(eval: &ActionEvaluation, samples: usize) -> Self {
        Self {
            mean_reward: eval.mean_reward,
            std_reward: eval.std_reward,
            coverage: eval.coverage.as_ref().map(|c| c.proportions),
            coverage_sum: eval.coverage.as_ref().map(|c| c.sum),
            samples,
        }
    }
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

/// Trains one seed into `dir`: `config.toml`, `metrics.csv`, `checkpoints/`,
/// `checkpoint/` (final critic) and `report.json`.
pub fn train_one(
    cfg: &RunConfig,
    seed: u64,
    dir: &Path,
    dump_trajectories: bool,
) -> anyhow::Result<TrainOutcome> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let snapshot = RunConfig {
        seeds: vec![seed],
        ..cfg.clone()
    };
    fs::write(dir.join("config.toml"), snapshot.to_toml())?;
    let mut sink = RunSink {
        metrics: CsvMetrics::new(BufWriter::new(File::create(dir.join("metrics.csv"))?))?,
        checkpoints: dir.join("checkpoints"),
    };
    let mut env = cfg.env.build();
    let outcome = train(&cfg.train, env.as_mut(), seed, &mut sink)
        .with_context(|| format!("training seed {seed} (partial log in {})", dir.display()))?;
    save_checkpoint(&dir.join("checkpoint"), outcome.agent.critic())?;

    let report = RunReport {
        seed,
        algorithm: cfg.train.algorithm,
        env_steps: outcome.env_steps,
        episodes: outcome.episodes,
        updates: outcome.agent.updates(),
        evaluation: outcome
            .final_evaluation
            .as_ref()
            .map(|e| EvaluationReport::from(e, cfg.train.eval_samples)),
    };
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;

    if dump_trajectories {
        let schedule = cfg.train.schedule.build(cfg.train.sampler.epsilon)?;
        let trace = TraceSpec {
            per_side: 20,
            low: env.action_box().low[0],
            high: env.action_box().high[0],
            seed,
        };
        let file = BufWriter::new(File::create(dir.join("trajectories.csv"))?);
        write_trajectories(
            file,
            outcome.agent.critic(),
            &env.initial_state(),
            &cfg.train.sampler,
            &schedule,
            &trace,
        )?;
    }
    Ok(outcome)
}

pub fn cmd_train(
    cfg: &RunConfig,
    dump_trajectories: bool,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    for &seed in &cfg.seeds {
        let dir = seed_dir(&cfg.out, seed);
        let outcome = train_one(cfg, seed, &dir, dump_trajectories)?;
        write!(out, "seed {seed}: {} updates", outcome.agent.updates())?;
        if let Some(e) = &outcome.final_evaluation {
            write!(
                out,
                ", mean reward {} ± {}",
                format_num(e.mean_reward),
                format_num(e.std_reward)
            )?;
            if let Some(c) = &e.coverage {
                write!(out, ", coverage sum {}", format_num(c.sum))?;
            }
        }
        writeln!(out, " -> {}", dir.display())?;
    }
    Ok(())
}

/// Sampler and schedule to use with a stored critic.
#[derive(Debug, Clone)]
pub struct PolicySettings {
    pub sampler: SamplerSettings,
    pub schedule: ScheduleSettings,
}

impl PolicySettings {
    pub fn from_config(cfg: Option<&RunConfig>) -> Self {
        let train = cfg.map(|c| c.train.clone()).unwrap_or_default();
        Self {
            sampler: train.sampler,
            schedule: train.schedule,
        }
    }
}

pub fn method_name(q: &QNetwork) -> &'static str {
    if q.is_noise_conditioned() {
        "NC-LQL"
    } else {
        "LQL"
    }
}

pub fn cmd_eval_bandit(
    checkpoint: &Path,
    samples: usize,
    settings: &PolicySettings,
    seed: u64,
    samples_csv: &Path,
    out: &mut dyn Write,
) -> anyhow::Result<EvaluationReport> {
    if samples == 0 {
        bail!("need at least one sample");
    }
    let q = load_checkpoint(checkpoint)?;
    let env = BanditEnv::new();
    if q.state_dim() != env.state_dim() || q.action_dim() != env.action_dim() {
        bail!(
            "checkpoint expects state/action widths {}/{}, the bandit has {}/{}",
            q.state_dim(),
            q.action_dim(),
            env.state_dim(),
            env.action_dim()
        );
    }
    let schedule = settings.schedule.build(settings.sampler.epsilon)?;
    let cfg = settings.sampler.to_config(seed, env.action_box());
    let states = Array2::zeros((samples, env.state_dim()));
    let actions = policy_actions(&q, states.view(), &schedule, &cfg)?;

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(samples_csv)?));
    w.write_record(["x", "y", "reward"])?;
    let mut points = Vec::with_capacity(samples);
    for a in actions.rows() {
        w.write_record([
            format_num(a[0] as f64),
            format_num(a[1] as f64),
            format_num(env.reward(&[a[0], a[1]])),
        ])?;
        points.push([a[0], a[1]]);
    }
    w.flush()?;
    let eval = env
        .evaluate_actions(actions.view())
        .expect("bandit always scores actions");
    let cov = mode_coverage(&points, COVERAGE_RADIUS)?;

    writeln!(
        out,
        "{:<8} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "method", "top", "right", "bottom", "left", "sum"
    )?;
    write!(out, "{:<8}", method_name(&q))?;
    for p in cov.proportions {
        write!(out, " {:>9}", format_num(p))?;
    }
    writeln!(out, " {:>9}", format_num(cov.sum))?;
    writeln!(
        out,
        "mean reward {} ± {} over {samples} samples (w = {})",
        format_num(eval.mean_reward),
        format_num(eval.std_reward),
        format_num(settings.sampler.temperature as f64)
    )?;
    Ok(EvaluationReport::from(&eval, samples))
}

/// Grid of chain starting points for a trajectory export.
#[derive(Debug, Clone)]
pub struct TraceSpec {
    pub per_side: usize,
    pub low: f32,
    pub high: f32,
    pub seed: u64,
}

pub const TRAJECTORY_HEADER: [&str; 4] = ["chain", "level", "step", "sigma"];

/// One row per (chain, level, step) after each Langevin update, chains
/// starting on a `per_side^d` grid. Noise-conditioned critics walk the
/// schedule; plain critics run `levels * steps_per_level` steps at one level.
pub fn write_trajectories<W: Write>(
    out: W,
    q: &QNetwork,
    state: &[f32],
    sampler: &SamplerSettings,
    schedule: &NoiseSchedule,
    spec: &TraceSpec,
) -> anyhow::Result<usize> {
    let dim = q.action_dim();
    let chains = spec
        .per_side
        .checked_pow(dim as u32)
        .context("trajectory grid is too large")?;
    let bounds = lq_core::env::ActionBox::new(vec![spec.low; dim], vec![spec.high; dim])?;
    let mut cfg = sampler.to_config(spec.seed, &bounds);
    cfg.init = ActionInit::UniformGrid {
        per_side: spec.per_side,
        low: spec.low,
        high: spec.high,
    };
    let (levels, steps) = if q.is_noise_conditioned() {
        (schedule_levels(schedule), schedule.steps_per_level())
    } else {
        let level = Level {
            sigma: schedule.min_sigma() as f32,
            step_size: sampler.epsilon,
        };
        (vec![level], schedule.total_evaluations())
    };
    let states = Array2::from_shape_fn((chains, state.len()), |(_, j)| state[j]);

    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = TRAJECTORY_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|j| format!("a{j}")));
    w.write_record(&header)?;
    let mut rows = 0usize;
    let mut failure: Option<csv::Error> = None;
    let mut write_event = |e: &TraceEvent<'_>| {
        for (k, a) in e.actions.rows().into_iter().enumerate() {
            let mut rec = vec![
                k.to_string(),
                e.level.to_string(),
                e.step.to_string(),
                format_num(e.sigma as f64),
            ];
            rec.extend(a.iter().map(|&x| format_num(x as f64)));
            if let Err(err) = w.write_record(&rec) {
                failure.get_or_insert(err);
            }
            rows += 1;
        }
    };
    run_langevin(
        q,
        states.view(),
        &levels,
        steps,
        &cfg,
        Some(&mut write_event),
    )?;
    if let Some(err) = failure {
        return Err(err.into());
    }
    w.flush()?;
    Ok(rows)
}

pub fn cmd_export_reward_map(
    path: &Path,
    low: f32,
    high: f32,
    resolution: usize,
) -> anyhow::Result<()> {
    if resolution < 2 || !(low < high) {
        bail!("need resolution >= 2 and low < high");
    }
    let file =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_reward_map(file, &BanditEnv::new(), low, high, resolution)?;
    Ok(())
}

pub const SUMMARY_TAIL: [&str; 9] = [
    "updates",
    "mean_reward",
    "std_reward",
    "coverage_top",
    "coverage_right",
    "coverage_bottom",
    "coverage_left",
    "coverage_sum",
    "dir",
];

/// Runs every planned config for every seed under `out/run_<i>/seed_<s>`
/// and writes `out/summary.csv`.
pub fn cmd_sweep(
    runs: &[PlannedRun],
    axes: &[GridAxis],
    out_dir: &Path,
    out: &mut dyn Write,
) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let summary_path = out_dir.join("summary.csv");
    let mut summary = csv::Writer::from_writer(BufWriter::new(File::create(&summary_path)?));
    let keys = grid_keys(axes);
    let mut header = vec!["run".to_owned(), "seed".to_owned()];
    header.extend(keys.iter().cloned());
    header.extend(SUMMARY_TAIL.iter().map(|s| s.to_string()));
    summary.write_record(&header)?;

    for (i, (assignment, cfg)) in runs.iter().enumerate() {
        for &seed in &cfg.seeds {
            let dir = seed_dir(&out_dir.join(format!("run_{i:03}")), seed);
            writeln!(out, "run {i} seed {seed}: {}", describe(assignment))?;
            let outcome = train_one(cfg, seed, &dir, false)?;
            let mut rec = vec![i.to_string(), seed.to_string()];
            rec.extend(assignment.iter().map(|(_, v)| v.clone()));
            rec.push(outcome.agent.updates().to_string());
            let eval = outcome.final_evaluation.as_ref();
            let cov = eval.and_then(|e| e.coverage.as_ref());
            let num = |x: Option<f64>| x.map(format_num).unwrap_or_default();
            rec.push(num(eval.map(|e| e.mean_reward)));
            rec.push(num(eval.map(|e| e.std_reward)));
            for k in 0..4 {
                rec.push(num(cov.map(|c| c.proportions[k])));
            }
            rec.push(num(cov.map(|c| c.sum)));
            rec.push(dir.display().to_string());
            summary.write_record(&rec)?;
            summary.flush()?;
        }
    }
    Ok(summary_path)
}
