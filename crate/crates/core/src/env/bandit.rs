use std::f64::consts::SQRT_2;

use ndarray::ArrayView2;

use super::{mode_coverage, ActionBox, ActionEvaluation, Environment, Step, COVERAGE_RADIUS};
use crate::error::Result;

/// Standard deviation of every mixture component.
pub const BANDIT_MODE_STD: f64 = 0.3;

const ACTION_LIMIT: f32 = 2.0;

/// Mode centers on the circle of radius sqrt(2), counter-clockwise from +x.
pub(crate) const MODE_CENTERS: [[f64; 2]; 8] = [
    [SQRT_2, 0.0],
    [1.0, 1.0],
    [0.0, SQRT_2],
    [-1.0, 1.0],
    [-SQRT_2, 0.0],
    [-1.0, -1.0],
    [0.0, -SQRT_2],
    [1.0, -1.0],
];

/// Heavy modes sit on the axes.
pub(crate) const MODE_WEIGHTS: [f64; 8] = [2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0];

/// One-step 2D bandit whose reward is an eight-mode Gaussian mixture density,
/// scaled so its maximum is exactly 1.
///
/// The state is a constant zero vector of width 1 and every step terminates.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    normalizer: f64,
    action_box: ActionBox,
}

impl Default for BanditEnv {
    fn default() -> Self {
        Self::new()
    }
}

fn mixture(a: [f64; 2]) -> f64 {
    let inv_two_var = 1.0 / (2.0 * BANDIT_MODE_STD * BANDIT_MODE_STD);
    MODE_CENTERS
        .iter()
        .zip(MODE_WEIGHTS)
        .map(|(c, w)| {
            let d2 = (a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2);
            w * (-d2 * inv_two_var).exp()
        })
        .sum()
}

/// Maximum of the unnormalized mixture. By symmetry every heavy mode attains it;
/// the peak sits slightly inside the (sqrt(2), 0) center, pulled by the two
/// light neighbours. Mean-shift from the center converges to it.
fn mixture_peak() -> ([f64; 2], f64) {
    let inv_two_var = 1.0 / (2.0 * BANDIT_MODE_STD * BANDIT_MODE_STD);
    let mut a = MODE_CENTERS[0];
    for _ in 0..200 {
        let mut num = [0.0; 2];
        let mut den = 0.0;
        for (c, w) in MODE_CENTERS.iter().zip(MODE_WEIGHTS) {
            let d2 = (a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2);
            let r = w * (-d2 * inv_two_var).exp();
            num[0] += r * c[0];
            num[1] += r * c[1];
            den += r;
        }
        a = [num[0] / den, num[1] / den];
    }
    (a, mixture(a))
}

impl BanditEnv {
    pub fn new() -> Self {
        let (_, peak) = mixture_peak();
        Self {
            normalizer: peak,
            action_box: ActionBox::symmetric(2, ACTION_LIMIT),
        }
    }

    /// Location of the reward maximum nearest `(sqrt(2), 0)`.
    pub fn peak_location() -> [f64; 2] {
        mixture_peak().0
    }

    /// Normalized mixture density at `a`, in `[0, 1]`. Defined on all of R^2.
    pub fn reward(&self, a: &[f32]) -> f64 {
        self.reward_f64([a[0] as f64, a[1] as f64])
    }

    pub fn reward_f64(&self, a: [f64; 2]) -> f64 {
        (mixture(a) / self.normalizer).min(1.0)
    }

    /// The constant state every episode starts from.
    pub fn dummy_state() -> Vec<f32> {
        vec![0.0]
    }
}

impl Environment for BanditEnv {
    fn state_dim(&self) -> usize {
        1
    }

    fn action_box(&self) -> &ActionBox {
        &self.action_box
    }

    fn initial_state(&self) -> Vec<f32> {
        Self::dummy_state()
    }

    fn reset(&mut self) -> Vec<f32> {
        Self::dummy_state()
    }

    fn can_evaluate(&self) -> bool {
        true
    }

    fn step(&mut self, action: &[f32]) -> Result<Step> {
        crate::error::check_len("bandit action", 2, action.len())?;
        let mut a = action.to_vec();
        self.action_box.clip(&mut a);
        Ok(Step {
            next_state: Self::dummy_state(),
            reward: self.reward(&a) as f32,
            done: true,
        })
    }

    fn evaluate_actions(&self, actions: ArrayView2<f32>) -> Option<ActionEvaluation> {
        if actions.nrows() == 0 || actions.ncols() != 2 {
            return None;
        }
        let rewards: Vec<f64> = actions
            .rows()
            .into_iter()
            .map(|r| self.reward(&[r[0], r[1]]))
            .collect();
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        let points: Vec<[f32; 2]> = actions.rows().into_iter().map(|r| [r[0], r[1]]).collect();
        Some(ActionEvaluation {
            mean_reward: mean,
            std_reward: var.sqrt(),
            coverage: mode_coverage(&points, COVERAGE_RADIUS).ok(),
        })
    }
}
