use super::{ActionBox, BanditEnv, Environment, Step};
use crate::error::{check_len, Result};

/// Per-step displacement per unit action.
pub const STEP_SCALE: f32 = 0.1;
/// Steps per episode.
pub const HORIZON: usize = 20;
/// Position bounds, `[-2, 2]` in each coordinate.
pub const POSITION_LIMIT: f32 = 2.0;

/// A point in the plane pushed by bounded actions; the per-step reward is the
/// bandit reward at the new position. Episodes start at the origin and stop
/// after [`HORIZON`] steps.
///
/// These constants are fixed choices for a small multi-step test bed.
#[derive(Debug, Clone)]
pub struct PointMassEnv {
    position: [f32; 2],
    elapsed: usize,
    reward_field: BanditEnv,
    action_box: ActionBox,
}

impl Default for PointMassEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl PointMassEnv {
    pub fn new() -> Self {
        Self {
            position: [0.0; 2],
            elapsed: 0,
            reward_field: BanditEnv::new(),
            action_box: ActionBox::symmetric(2, 1.0),
        }
    }

    /// Starts an episode at `position` instead of the origin.
    pub fn with_position(position: [f32; 2]) -> Self {
        Self {
            position,
            ..Self::new()
        }
    }

    pub fn position(&self) -> [f32; 2] {
        self.position
    }
}

impl Environment for PointMassEnv {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_box(&self) -> &ActionBox {
        &self.action_box
    }

    fn initial_state(&self) -> Vec<f32> {
        vec![0.0; 2]
    }

    fn reset(&mut self) -> Vec<f32> {
        self.position = [0.0; 2];
        self.elapsed = 0;
        self.position.to_vec()
    }

    fn step(&mut self, action: &[f32]) -> Result<Step> {
        check_len("point-mass action", 2, action.len())?;
        let mut a = action.to_vec();
        self.action_box.clip(&mut a);
        for (p, da) in self.position.iter_mut().zip(&a) {
            *p = (*p + STEP_SCALE * da).clamp(-POSITION_LIMIT, POSITION_LIMIT);
        }
        self.elapsed += 1;
        Ok(Step {
            next_state: self.position.to_vec(),
            reward: self.reward_field.reward(&self.position) as f32,
            done: self.elapsed >= HORIZON,
        })
    }
}
