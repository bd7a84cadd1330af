//! Replay buffer, TD and noise-smoothing updates, and the interaction loop.

mod buffer;
mod config;
mod metrics;
mod update;

pub use buffer::{Batch, ReplayBuffer, Transition};
pub use config::{Algorithm, CriticSettings, SamplerSettings, ScheduleSettings, TrainConfig};
pub use metrics::{CsvMetrics, MetricsRecord, MetricsSink, NullSink, METRICS_HEADER};
pub use update::{
    lql_update, nclql_update, perturb_actions, policy_actions, smoothing_update, td_targets,
    LossReport, UpdateContext,
};

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionBox, ActionEvaluation, Environment};
use crate::error::Result;
use crate::nn::{AdamState, QNetwork, TargetCopy};

/// Critic, target copy, optimizer and buffer of one training run.
#[derive(Debug, Clone)]
pub struct Agent {
    algorithm: Algorithm,
    batch_size: usize,
    ctx: UpdateContext,
    critic: QNetwork,
    optimizer: AdamState,
    target: TargetCopy,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    updates: u64,
}

impl Agent {
    pub fn new(
        cfg: &TrainConfig,
        state_dim: usize,
        action_box: ActionBox,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = cfg.critic.spec(state_dim, action_box.dim(), cfg.algorithm);
        let critic = QNetwork::new(&spec, &mut rng)?;
        Ok(Self {
            algorithm: cfg.algorithm,
            batch_size: cfg.batch_size,
            optimizer: AdamState::new(critic.mlp(), cfg.critic.adam()),
            target: TargetCopy::new(&critic, cfg.tau)?,
            buffer: ReplayBuffer::new(
                cfg.buffer_capacity,
                state_dim,
                action_box.dim(),
                cfg.reward_scale,
            )?,
            ctx: UpdateContext::new(cfg, action_box)?,
            critic,
            rng,
            updates: 0,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn critic(&self) -> &QNetwork {
        &self.critic
    }

    pub fn target(&self) -> &QNetwork {
        self.target.network()
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn context(&self) -> &UpdateContext {
        &self.ctx
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Uniform action in the action box.
    pub fn random_action(&mut self) -> Vec<f32> {
        let b = &self.ctx.action_box;
        b.low
            .iter()
            .zip(&b.high)
            .map(|(&lo, &hi)| self.rng.random_range(lo..=hi))
            .collect()
    }

    /// Samples an action from the online critic's soft policy.
    pub fn act(&mut self, state: &[f32]) -> Result<Vec<f32>> {
        let seed = self.rng.random();
        let s =
            ArrayView2::from_shape((1, state.len()), state).map_err(|_| crate::Error::Shape {
                context: "policy state",
                expected: self.critic.state_dim(),
                actual: state.len(),
            })?;
        let a = policy_actions(
            &self.critic,
            s,
            &self.ctx.schedule,
            &self.ctx.sampler_config(seed),
        )?;
        Ok(a.row(0).to_vec())
    }

    /// `n` independent policy samples at `state`; does not touch the agent's stream.
    pub fn sample_actions(&self, state: &[f32], n: usize, seed: u64) -> Result<Array2<f32>> {
        let states = Array2::from_shape_fn((n, state.len()), |(_, j)| state[j]);
        policy_actions(
            &self.critic,
            states.view(),
            &self.ctx.schedule,
            &self.ctx.sampler_config(seed),
        )
    }

    pub fn observe(&mut self, t: &Transition) -> Result<()> {
        self.buffer.push(t)
    }

    /// One gradient step on a fresh minibatch, then a Polyak step of the target.
    pub fn update(&mut self) -> Result<LossReport> {
        let batch = self.buffer.sample(self.batch_size, &mut self.rng)?;
        let target = self.target.network();
        let report = match self.algorithm {
            Algorithm::Lql => lql_update(
                &mut self.critic,
                &mut self.optimizer,
                target,
                &batch,
                &self.ctx,
                &mut self.rng,
            )?,
            Algorithm::Nclql => nclql_update(
                &mut self.critic,
                &mut self.optimizer,
                target,
                &batch,
                &self.ctx,
                &mut self.rng,
            )?,
        };
        self.target.update(&self.critic)?;
        self.updates += 1;
        Ok(report)
    }

    /// Policy samples at the environment's initial state, scored by the environment.
    pub fn evaluate(
        &self,
        env: &dyn Environment,
        n: usize,
        seed: u64,
    ) -> Result<Option<ActionEvaluation>> {
        if !env.can_evaluate() {
            return Ok(None);
        }
        let actions = self.sample_actions(&env.initial_state(), n, seed)?;
        Ok(env.evaluate_actions(actions.view()))
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub env_steps: u64,
    pub episodes: u64,
    pub final_evaluation: Option<ActionEvaluation>,
}

/// Seed of the evaluation sampler at `step`, independent of the training stream.
pub fn evaluation_seed(seed: u64, step: u64) -> u64 {
    seed ^ step.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

#[derive(Default)]
struct Interval {
    returns: (f64, u64),
    td: f64,
    smooth: f64,
    mean_q: f64,
    grad_norm: f64,
    updates: u64,
}

impl Interval {
    fn add(&mut self, r: &LossReport) {
        self.td += r.td_loss as f64;
        self.smooth += r.smooth_loss as f64;
        self.mean_q += r.mean_q as f64;
        self.grad_norm += r.grad_norm as f64;
        self.updates += 1;
    }

    fn record(
        &self,
        step: u64,
        episodes: u64,
        updates: u64,
        evaluation: Option<ActionEvaluation>,
    ) -> MetricsRecord {
        let n = self.updates as f64;
        let mean = |x: f64| (self.updates > 0).then(|| x / n);
        MetricsRecord {
            step,
            episodes,
            updates,
            episode_return: (self.returns.1 > 0).then(|| self.returns.0 / self.returns.1 as f64),
            td_loss: mean(self.td),
            smooth_loss: mean(self.smooth),
            mean_q: mean(self.mean_q),
            grad_norm: mean(self.grad_norm),
            evaluation,
        }
    }
}

/// Runs the interaction loop: uniform actions for the first `warmup` steps,
/// then soft-policy actions from the online critic with `updates_per_step`
/// gradient steps after each environment step.
///
/// Metrics rows are emitted every `log_interval` steps and at the last step;
/// an error aborts the run after whatever the sink has already persisted.
pub fn train(
    cfg: &TrainConfig,
    env: &mut dyn Environment,
    seed: u64,
    sink: &mut dyn MetricsSink,
) -> Result<TrainOutcome> {
    let mut agent = Agent::new(cfg, env.state_dim(), env.action_box().clone(), seed)?;
    let total = cfg.total_env_steps as u64;
    let mut state = env.reset();
    let mut episode_return = 0.0f64;
    let mut episodes = 0u64;
    let mut interval = Interval::default();
    let mut final_evaluation = None;

    for step in 1..=total {
        let mut action = if step <= cfg.warmup as u64 {
            agent.random_action()
        } else {
            agent.act(&state)?
        };
        env.action_box().clip(&mut action);
        let out = env.step(&action)?;
        agent.observe(&Transition {
            state: std::mem::take(&mut state),
            action,
            reward: out.reward,
            next_state: out.next_state.clone(),
            done: out.done,
        })?;
        episode_return += out.reward as f64;
        if out.done {
            episodes += 1;
            interval.returns.0 += episode_return;
            interval.returns.1 += 1;
            episode_return = 0.0;
            state = env.reset();
        } else {
            state = out.next_state;
        }

        if step > cfg.warmup as u64 {
            for _ in 0..cfg.updates_per_step {
                let report = agent.update()?;
                interval.add(&report);
            }
        }

        let last = step == total;
        if step % cfg.log_interval as u64 == 0 || last {
            let due = cfg.eval_interval > 0 && step % cfg.eval_interval as u64 == 0;
            let evaluation = if due || last {
                agent.evaluate(env, cfg.eval_samples, evaluation_seed(seed, step))?
            } else {
                None
            };
            if last {
                final_evaluation = evaluation.clone();
            }
            sink.record(&interval.record(step, episodes, agent.updates(), evaluation))?;
            interval = Interval::default();
        }
        if cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval as u64 == 0 {
            sink.checkpoint(step, agent.critic())?;
        }
    }

    Ok(TrainOutcome {
        agent,
        env_steps: total,
        episodes,
        final_evaluation,
    })
}
