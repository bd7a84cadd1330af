use serde::{Deserialize, Serialize};

use super::{Mlp, ParamSet};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f32,
    #[serde(default = "default_beta1")]
    pub beta1: f32,
    #[serde(default = "default_beta2")]
    pub beta2: f32,
    #[serde(default = "default_eps")]
    pub eps: f32,
}

fn default_beta1() -> f32 {
    0.9
}
fn default_beta2() -> f32 {
    0.999
}
fn default_eps() -> f32 {
    1e-8
}

impl Default for AdamConfig {
    /// Critic learning rate 1e-4 with the usual moment decay rates.
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

/// Adam moment accumulators, shaped like the network they optimize.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first: ParamSet,
    second: ParamSet,
    step: u64,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        Self {
            config,
            first: ParamSet::zeros_like(net),
            second: ParamSet::zeros_like(net),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `net` along `grads`.
    ///
    /// Non-finite gradients are rejected before any state is touched.
    pub fn step(&mut self, net: &mut Mlp, grads: &ParamSet) -> Result<()> {
        check_len(
            "adam layer count",
            self.first.layers.len(),
            grads.layers.len(),
        )?;
        for (m, g) in self.first.layers.iter().zip(&grads.layers) {
            if m.weight.dim() != g.weight.dim() || m.bias.len() != g.bias.len() {
                return Err(Error::Shape {
                    context: "adam parameter shape",
                    expected: m.weight.len() + m.bias.len(),
                    actual: g.weight.len() + g.bias.len(),
                });
            }
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient passed to Adam".into()));
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - (beta1 as f64).powi(t);
        let bc2 = 1.0 - (beta2 as f64).powi(t);
        let step_size = (learning_rate as f64 / bc1) as f32;
        let bc2_sqrt = bc2.sqrt() as f32;

        let params = net.param_slices_mut();
        let moments = self.first.slices_mut().zip(self.second.slices_mut());
        for ((p, g), (m, v)) in params.zip(grads.slices()).zip(moments) {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                p[i] -= step_size * m[i] / (v[i].sqrt() / bc2_sqrt + eps);
            }
        }
        Ok(())
    }
}
