//! Closed-form critics for checking samplers against known targets.

use ndarray::{Array2, ArrayView2};

use super::ActionValue;
use crate::error::{check_len, Result};

/// `Q(s, a) = -|a|^2 / (2 v)`; with `w = 1` the Boltzmann target is `N(0, v I)`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticValue {
    pub dim: usize,
    pub variance: f64,
}

impl ActionValue for QuadraticValue {
    fn state_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        self.dim
    }

    fn action_gradients(
        &self,
        _states: ArrayView2<f32>,
        actions: ArrayView2<f32>,
        _sigma: f32,
    ) -> Result<Array2<f32>> {
        check_len("quadratic critic action width", self.dim, actions.ncols())?;
        let scale = (1.0 / self.variance) as f32;
        Ok(actions.mapv(|a| -a * scale))
    }
}

/// One-dimensional critic with `Q(a) = ln p(a)` for a Gaussian mixture `p`.
///
/// At noise level `sigma` the gradient is that of `ln (p * N(0, sigma^2))`,
/// i.e. every component's variance grows by `sigma^2`.
#[derive(Debug, Clone)]
pub struct GaussianMixture1d {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl GaussianMixture1d {
    /// Density of the mixture smoothed at `sigma` (use 0 for the clean density).
    pub fn density(&self, a: f64, sigma: f64) -> f64 {
        let total: f64 = self.weights.iter().sum();
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((w, m), s)| {
                let var = s * s + sigma * sigma;
                w / total * (-(a - m).powi(2) / (2.0 * var)).exp()
                    / (2.0 * std::f64::consts::PI * var).sqrt()
            })
            .sum()
    }

    /// `d/da ln p_sigma(a)`, evaluated with log-sum-exp weights.
    pub fn smoothed_score(&self, a: f64, sigma: f64) -> f64 {
        let terms: Vec<(f64, f64)> = self
            .weights
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((w, m), s)| {
                let var = s * s + sigma * sigma;
                let log_r = w.ln() - 0.5 * var.ln() - (a - m).powi(2) / (2.0 * var);
                (log_r, -(a - m) / var)
            })
            .collect();
        let max = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let (num, den) = terms.iter().fold((0.0, 0.0), |(n, d), &(lr, g)| {
            let r = (lr - max).exp();
            (n + r * g, d + r)
        });
        num / den
    }
}

impl ActionValue for GaussianMixture1d {
    fn state_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn action_gradients(
        &self,
        _states: ArrayView2<f32>,
        actions: ArrayView2<f32>,
        sigma: f32,
    ) -> Result<Array2<f32>> {
        check_len("mixture critic action width", 1, actions.ncols())?;
        Ok(actions.mapv(|a| self.smoothed_score(a as f64, sigma as f64) as f32))
    }
}
