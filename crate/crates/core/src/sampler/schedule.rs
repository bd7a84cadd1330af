use crate::error::{Error, Result};

/// Decreasing noise scales `sigma_1 > ... > sigma_L > 0`, the number of Langevin
/// steps run at each, and the base step size `epsilon`.
///
/// Level `i` uses step size `alpha_i = epsilon * sigma_i^2 / sigma_L^2`, so the
/// last level runs at exactly `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    sigmas: Vec<f64>,
    steps_per_level: usize,
    epsilon: f64,
}

impl NoiseSchedule {
    pub fn new(sigmas: Vec<f64>, steps_per_level: usize, epsilon: f64) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::Config(
                "noise schedule needs at least one level".into(),
            ));
        }
        if sigmas.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Config(
                "noise levels must be positive and finite".into(),
            ));
        }
        if sigmas.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::Config(
                "noise levels must be strictly decreasing".into(),
            ));
        }
        if steps_per_level == 0 {
            return Err(Error::Config(
                "steps per noise level must be at least 1".into(),
            ));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "step size must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            sigmas,
            steps_per_level,
            epsilon,
        })
    }

    /// `levels` scales spaced geometrically from `sigma_max` down to `sigma_min`.
    /// A single level uses `sigma_min` and only needs `sigma_max >= sigma_min`.
    pub fn geometric(
        sigma_max: f64,
        sigma_min: f64,
        levels: usize,
        steps_per_level: usize,
        epsilon: f64,
    ) -> Result<Self> {
        let ordered = sigma_max > sigma_min || (levels == 1 && sigma_max == sigma_min);
        if !(ordered && sigma_min > 0.0) {
            return Err(Error::Config(format!(
                "need sigma_max > sigma_min > 0, got {sigma_max} and {sigma_min}"
            )));
        }
        if levels == 0 {
            return Err(Error::Config(
                "noise schedule needs at least one level".into(),
            ));
        }
        let sigmas = if levels == 1 {
            vec![sigma_min]
        } else {
            let ratio = sigma_min / sigma_max;
            (0..levels)
                .map(|i| match i {
                    0 => sigma_max,
                    i if i == levels - 1 => sigma_min,
                    i => sigma_max * ratio.powf(i as f64 / (levels - 1) as f64),
                })
                .collect()
        };
        Self::new(sigmas, steps_per_level, epsilon)
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn levels(&self) -> usize {
        self.sigmas.len()
    }

    pub fn steps_per_level(&self) -> usize {
        self.steps_per_level
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigmas[0]
    }

    pub fn min_sigma(&self) -> f64 {
        *self.sigmas.last().unwrap()
    }

    /// Step size at zero-based level `level`.
    pub fn step_size(&self, level: usize) -> f64 {
        let ratio = self.sigmas[level] / self.min_sigma();
        self.epsilon * (ratio * ratio)
    }

    pub fn step_sizes(&self) -> Vec<f64> {
        (0..self.levels()).map(|i| self.step_size(i)).collect()
    }

    /// Score evaluations per sampled action.
    pub fn total_evaluations(&self) -> usize {
        self.levels() * self.steps_per_level
    }
}
