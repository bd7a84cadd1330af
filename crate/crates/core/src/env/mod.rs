//! Desk-scale environments.

mod bandit;
mod coverage;
mod point_mass;

pub use bandit::{BanditEnv, BANDIT_MODE_STD};
pub use coverage::{mode_coverage, ModeCoverageReport, COVERAGE_RADIUS};
pub use point_mass::PointMassEnv;

use std::io::Write;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Axis-aligned action bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBox {
    pub low: Vec<f32>,
    pub high: Vec<f32>,
}

impl ActionBox {
    pub fn new(low: Vec<f32>, high: Vec<f32>) -> Result<Self> {
        check_len("action box bounds", low.len(), high.len())?;
        if low.iter().zip(&high).any(|(l, h)| !(l < h)) {
            return Err(Error::Config(
                "action box needs low < high in every dimension".into(),
            ));
        }
        Ok(Self { low, high })
    }

    pub fn symmetric(dim: usize, limit: f32) -> Self {
        Self {
            low: vec![-limit; dim],
            high: vec![limit; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn clip(&self, action: &mut [f32]) {
        for ((a, &lo), &hi) in action.iter_mut().zip(&self.low).zip(&self.high) {
            *a = a.clamp(lo, hi);
        }
    }

    pub fn contains(&self, action: &[f32]) -> bool {
        action
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .all(|(a, (lo, hi))| (lo..=hi).contains(&a))
    }
}

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: Vec<f32>,
    pub reward: f32,
    pub done: bool,
}

/// Summary of a batch of policy samples, when the environment can score them.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionEvaluation {
    pub mean_reward: f64,
    pub std_reward: f64,
    pub coverage: Option<ModeCoverageReport>,
}

pub trait Environment {
    fn state_dim(&self) -> usize;
    fn action_box(&self) -> &ActionBox;
    /// State that `reset` returns, without resetting.
    fn initial_state(&self) -> Vec<f32>;
    fn reset(&mut self) -> Vec<f32>;
    /// Clips `action` to the action box, then advances the environment.
    fn step(&mut self, action: &[f32]) -> Result<Step>;

    fn action_dim(&self) -> usize {
        self.action_box().dim()
    }

    /// Whether [`Environment::evaluate_actions`] returns anything.
    fn can_evaluate(&self) -> bool {
        false
    }

    /// Scores actions sampled at the initial state, if meaningful for this environment.
    fn evaluate_actions(&self, _actions: ArrayView2<f32>) -> Option<ActionEvaluation> {
        None
    }
}

/// Writes `x,y,reward` rows of the bandit reward on a `resolution x resolution` grid.
pub fn write_reward_map<W: Write>(
    out: W,
    env: &BanditEnv,
    low: f32,
    high: f32,
    resolution: usize,
) -> Result<()> {
    if resolution < 2 || !(low < high) {
        return Err(Error::Config(
            "reward map needs resolution >= 2 and low < high".into(),
        ));
    }
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["x", "y", "reward"])?;
    for j in 0..resolution {
        let y = grid_coord(low, high, resolution, j);
        for i in 0..resolution {
            let x = grid_coord(low, high, resolution, i);
            let r = env.reward(&[x, y]);
            writer.write_record([format_num(x as f64), format_num(y as f64), format_num(r)])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub(crate) fn grid_coord(low: f32, high: f32, resolution: usize, i: usize) -> f32 {
    (low as f64 + (high - low) as f64 * i as f64 / (resolution - 1) as f64) as f32
}

/// Plain decimal with at least six significant digits.
pub fn format_num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 30) as usize;
    format!("{x:.decimals$}")
}
