//! Langevin soft policies: actions are drawn from `exp(w Q(s, .))` by running
//! Langevin dynamics on the critic's action gradient, either at one noise level
//! or annealed through a decreasing noise schedule.

pub mod analytic;
mod langevin;
mod schedule;

pub use langevin::{
    annealed_langevin_policy, chain_rng, langevin_policy, run_langevin, schedule_levels, score,
    Level, TraceEvent, SCORE_NORM_EPS,
};
pub use schedule::NoiseSchedule;

use ndarray::{Array2, ArrayView2};

use crate::env::ActionBox;
use crate::error::Result;
use crate::nn::{NoiseLevel, QNetwork};

/// Anything that can supply `dQ/da` at a noise level.
pub trait ActionValue {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// `dQ(s, a, sigma)/da` for each row of `actions`.
    fn action_gradients(
        &self,
        states: ArrayView2<f32>,
        actions: ArrayView2<f32>,
        sigma: f32,
    ) -> Result<Array2<f32>>;
}

impl ActionValue for QNetwork {
    fn state_dim(&self) -> usize {
        QNetwork::state_dim(self)
    }

    fn action_dim(&self) -> usize {
        QNetwork::action_dim(self)
    }

    fn action_gradients(
        &self,
        states: ArrayView2<f32>,
        actions: ArrayView2<f32>,
        sigma: f32,
    ) -> Result<Array2<f32>> {
        Ok(QNetwork::action_gradients(self, states, actions, NoiseLevel::Shared(sigma))?.1)
    }
}

impl<T: ActionValue + ?Sized> ActionValue for &T {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }

    fn action_dim(&self) -> usize {
        (**self).action_dim()
    }

    fn action_gradients(
        &self,
        states: ArrayView2<f32>,
        actions: ArrayView2<f32>,
        sigma: f32,
    ) -> Result<Array2<f32>> {
        (**self).action_gradients(states, actions, sigma)
    }
}

/// Where chains start.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionInit {
    /// `a_0 ~ N(0, I)`, drawn from each chain's own stream.
    StdNormal,
    /// A regular grid with `per_side` points per dimension over `[low, high]`;
    /// chain `k` takes grid point `k` in row-major order (first coordinate fastest).
    UniformGrid {
        per_side: usize,
        low: f32,
        high: f32,
    },
    /// Every chain starts at the same point.
    Fixed(Vec<f32>),
}

/// Runtime settings of a Langevin soft policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// `w` in `pi ~ exp(w Q)`.
    pub temperature: f32,
    /// Step size of plain Langevin; annealed sampling takes it from the schedule.
    pub epsilon: f64,
    pub init: ActionInit,
    /// Divide `dQ/da` by `|dQ/da| + 1e-8` before scaling by the temperature.
    pub normalize_score: bool,
    /// Normalize after scaling by the temperature instead. The temperature then
    /// drops out of the drift.
    pub normalize_after_temperature: bool,
    /// Bounds applied to the emitted action.
    pub clip: Option<ActionBox>,
    /// Also project every intermediate iterate onto `clip`.
    pub clip_iterates: bool,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(temperature: f32, epsilon: f64) -> Self {
        Self {
            temperature,
            epsilon,
            init: ActionInit::StdNormal,
            normalize_score: false,
            normalize_after_temperature: false,
            clip: None,
            clip_iterates: false,
            seed: 0,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "step size must be positive, got {}",
                self.epsilon
            )));
        }
        if let ActionInit::UniformGrid {
            per_side,
            low,
            high,
        } = self.init
        {
            if per_side == 0 || !(low <= high) {
                return Err(Error::Config(
                    "grid init needs per_side >= 1 and low <= high".into(),
                ));
            }
        }
        Ok(())
    }
}
