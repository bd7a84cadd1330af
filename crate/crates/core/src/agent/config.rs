use serde::{Deserialize, Serialize};

use crate::env::ActionBox;
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamConfig, QNetworkSpec};
use crate::sampler::{ActionInit, NoiseSchedule, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// TD learning with a single-level Langevin policy.
    Lql,
    /// Noise-conditioned critic, TD at the smallest level plus the smoothing loss.
    Nclql,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "lql" => Ok(Self::Lql),
            "nclql" => Ok(Self::Nclql),
            other => Err(Error::Config(format!(
                "unknown algorithm '{other}' (expected lql or nclql)"
            ))),
        }
    }
}

/// Sampler knobs that live in a config file. Seeds and bounds are filled in
/// per call by the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSettings {
    pub temperature: f32,
    pub epsilon: f64,
    pub normalize_score: bool,
    #[serde(default)]
    pub normalize_after_temperature: bool,
    /// Clip emitted actions to the environment's action box.
    pub clip_actions: bool,
    /// Project every Langevin iterate onto the action box, not just the last.
    #[serde(default)]
    pub clip_iterates: bool,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            temperature: 500.0,
            epsilon: 1e-4,
            normalize_score: true,
            normalize_after_temperature: false,
            clip_actions: true,
            clip_iterates: false,
        }
    }
}

impl SamplerSettings {
    pub fn to_config(&self, seed: u64, action_box: &ActionBox) -> SamplerConfig {
        SamplerConfig {
            temperature: self.temperature,
            epsilon: self.epsilon,
            init: ActionInit::StdNormal,
            normalize_score: self.normalize_score,
            normalize_after_temperature: self.normalize_after_temperature,
            clip: self.clip_actions.then(|| action_box.clone()),
            clip_iterates: self.clip_iterates,
            seed,
        }
    }
}

/// Geometric noise ladder. The step size comes from [`SamplerSettings::epsilon`].
///
/// LQL has no ladder: it runs `levels * steps_per_level` plain Langevin steps,
/// so both algorithms spend the same number of critic evaluations per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSettings {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub levels: usize,
    pub steps_per_level: usize,
}

impl Default for ScheduleSettings {
    fn default() -> Self {
        Self {
            sigma_max: 0.1,
            sigma_min: 0.001,
            levels: 10,
            steps_per_level: 2,
        }
    }
}

impl ScheduleSettings {
    pub fn build(&self, epsilon: f64) -> Result<NoiseSchedule> {
        NoiseSchedule::geometric(
            self.sigma_max,
            self.sigma_min,
            self.levels,
            self.steps_per_level,
            epsilon,
        )
    }

    pub fn budget(&self) -> usize {
        self.levels * self.steps_per_level
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticSettings {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f32,
}

impl Default for CriticSettings {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256, 256],
            activation: Activation::Mish,
            learning_rate: 1e-4,
        }
    }
}

impl CriticSettings {
    pub fn spec(&self, state_dim: usize, action_dim: usize, algorithm: Algorithm) -> QNetworkSpec {
        QNetworkSpec {
            state_dim,
            action_dim,
            hidden: self.hidden.clone(),
            activation: self.activation,
            noise_conditioned: algorithm == Algorithm::Nclql,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// Everything that determines a training run apart from the environment and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub gamma: f32,
    pub tau: f32,
    pub reward_scale: f32,
    pub buffer_capacity: usize,
    pub warmup: usize,
    pub batch_size: usize,
    pub updates_per_step: usize,
    pub total_env_steps: usize,
    /// Env steps between metrics rows.
    pub log_interval: usize,
    /// Env steps between policy evaluations; 0 evaluates only at the end.
    pub eval_interval: usize,
    pub eval_samples: usize,
    /// Env steps between checkpoints; 0 disables intermediate checkpoints.
    pub checkpoint_interval: usize,
    pub critic: CriticSettings,
    pub sampler: SamplerSettings,
    pub schedule: ScheduleSettings,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Nclql,
            gamma: 0.99,
            tau: 0.005,
            reward_scale: 0.2,
            buffer_capacity: 1_000_000,
            warmup: 30_000,
            batch_size: 256,
            updates_per_step: 1,
            total_env_steps: 1_000_000,
            log_interval: 1_000,
            eval_interval: 0,
            eval_samples: 10_000,
            checkpoint_interval: 0,
            critic: CriticSettings::default(),
            sampler: SamplerSettings::default(),
            schedule: ScheduleSettings::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("tau must be in (0, 1], got {}", self.tau));
        }
        if !self.reward_scale.is_finite() {
            return fail("reward_scale must be finite".into());
        }
        if self.batch_size == 0 || self.batch_size > self.warmup {
            return fail(format!(
                "batch_size must be in 1..=warmup ({}), got {}",
                self.warmup, self.batch_size
            ));
        }
        if self.warmup > self.total_env_steps {
            return fail(format!(
                "warmup ({}) exceeds total_env_steps ({})",
                self.warmup, self.total_env_steps
            ));
        }
        if self.buffer_capacity < self.batch_size {
            return fail("buffer_capacity is smaller than batch_size".into());
        }
        if self.updates_per_step == 0 || self.log_interval == 0 || self.eval_samples == 0 {
            return fail("updates_per_step, log_interval and eval_samples must be positive".into());
        }
        if self.critic.hidden.contains(&0) {
            return fail("hidden widths must be positive".into());
        }
        if !(self.critic.learning_rate > 0.0) {
            return fail("learning_rate must be positive".into());
        }
        self.sampler
            .to_config(0, &ActionBox::symmetric(1, 1.0))
            .validate()?;
        self.schedule.build(self.sampler.epsilon)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_carry_table_values() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        let s = c.schedule.build(c.sampler.epsilon).unwrap();
        assert_eq!(s.step_size(0) / s.step_size(9), 1e4);
        assert_eq!(c.schedule.budget(), 20);
    }

    #[test]
    fn invariants_are_enforced() {
        let mut c = TrainConfig::default();
        c.batch_size = c.warmup + 1;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.warmup = c.total_env_steps + 1;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.schedule.sigma_min = 0.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn algorithm_parses_loosely() {
        assert_eq!("NC-LQL".parse::<Algorithm>().unwrap(), Algorithm::Nclql);
        assert_eq!("lql".parse::<Algorithm>().unwrap(), Algorithm::Lql);
        assert!("sac".parse::<Algorithm>().is_err());
    }
}
