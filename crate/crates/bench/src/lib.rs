//! Fixtures shared by the benchmarks: bandit-shaped critics and batches.

use lq_core::agent::{Algorithm, Batch, TrainConfig, UpdateContext};
use lq_core::env::{BanditEnv, Environment};
use lq_core::nn::QNetwork;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference training settings for `algorithm`.
pub fn config(algorithm: Algorithm) -> TrainConfig {
    TrainConfig {
        algorithm,
        ..TrainConfig::default()
    }
}

/// A freshly initialized bandit critic with the reference architecture.
pub fn critic(algorithm: Algorithm, seed: u64) -> QNetwork {
    let cfg = config(algorithm);
    let env = BanditEnv::new();
    let spec = cfg
        .critic
        .spec(env.state_dim(), env.action_dim(), algorithm);
    QNetwork::new(&spec, &mut ChaCha8Rng::seed_from_u64(seed)).expect("valid spec")
}

pub fn context(algorithm: Algorithm) -> UpdateContext {
    UpdateContext::new(&config(algorithm), BanditEnv::new().action_box().clone())
        .expect("valid config")
}

/// Random bandit-shaped transitions marked non-terminal, so TD targets
/// exercise the target-policy sampler as in a multi-step task.
pub fn batch(n: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actions = Array2::from_shape_fn((n, 2), |_| rng.random_range(-2.0f32..2.0));
    let env = BanditEnv::new();
    let rewards: Array1<f32> = actions
        .rows()
        .into_iter()
        .map(|a| 0.2 * env.reward(a.as_slice().unwrap()) as f32)
        .collect();
    Batch {
        states: Array2::zeros((n, 1)),
        actions,
        rewards,
        next_states: Array2::zeros((n, 1)),
        dones: Array1::zeros(n),
    }
}
