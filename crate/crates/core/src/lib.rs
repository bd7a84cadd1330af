//! Actor-free reinforcement learning: actions are drawn from the Boltzmann
//! distribution `exp(w Q(s, a))` of a learned critic by (annealed) Langevin
//! dynamics, without a policy network.
//!
//! * [`nn`]: critic networks, gradients, optimizer, target copies.
//! * [`env`]: the 2D multimodal bandit and a point-mass MDP.
//! * [`sampler`]: plain and annealed Langevin soft policies.
//! * [`agent`]: replay buffer, TD and noise-smoothing losses, training loop.

pub mod agent;
pub mod env;
pub mod error;
pub mod nn;
pub mod sampler;

pub use agent::{train, Agent, Algorithm, TrainConfig, TrainOutcome};
pub use env::{ActionBox, BanditEnv, Environment, PointMassEnv};
pub use error::{Error, Result};
pub use nn::{QNetwork, QNetworkSpec};
pub use sampler::{ActionValue, NoiseSchedule, SamplerConfig};
