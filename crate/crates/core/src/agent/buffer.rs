use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::Rng;

use crate::error::{check_len, Error, Result};

/// One environment transition, reward unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f32>,
    pub action: Vec<f32>,
    pub reward: f32,
    pub next_state: Vec<f32>,
    pub done: bool,
}

/// A minibatch, one row per transition. Rewards are already scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f32>,
    pub actions: Array2<f32>,
    pub rewards: Array1<f32>,
    pub next_states: Array2<f32>,
    /// 1.0 for terminal transitions, 0.0 otherwise.
    pub dones: Array1<f32>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity FIFO ring of transitions stored column-wise.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    reward_scale: f32,
    states: Vec<f32>,
    actions: Vec<f32>,
    rewards: Vec<f32>,
    next_states: Vec<f32>,
    dones: Vec<f32>,
    len: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(
        capacity: usize,
        state_dim: usize,
        action_dim: usize,
        reward_scale: f32,
    ) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config(
                "replay buffer capacity must be positive".into(),
            ));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            reward_scale,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            len: 0,
            cursor: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stores `t`, overwriting the oldest entry when full. The reward is
    /// multiplied by the reward scale on the way in.
    pub fn push(&mut self, t: &Transition) -> Result<()> {
        check_len("transition state", self.state_dim, t.state.len())?;
        check_len("transition next state", self.state_dim, t.next_state.len())?;
        check_len("transition action", self.action_dim, t.action.len())?;
        let reward = t.reward * self.reward_scale;
        let done = if t.done { 1.0 } else { 0.0 };
        if self.len < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.next_states.extend_from_slice(&t.next_state);
            self.rewards.push(reward);
            self.dones.push(done);
            self.len += 1;
        } else {
            let i = self.cursor;
            let (sd, ad) = (self.state_dim, self.action_dim);
            self.states[i * sd..(i + 1) * sd].copy_from_slice(&t.state);
            self.actions[i * ad..(i + 1) * ad].copy_from_slice(&t.action);
            self.next_states[i * sd..(i + 1) * sd].copy_from_slice(&t.next_state);
            self.rewards[i] = reward;
            self.dones[i] = done;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Stored transition `i` (insertion slot order, not age order), reward scaled.
    pub fn get(&self, i: usize) -> Option<Transition> {
        (i < self.len).then(|| {
            let (sd, ad) = (self.state_dim, self.action_dim);
            Transition {
                state: self.states[i * sd..(i + 1) * sd].to_vec(),
                action: self.actions[i * ad..(i + 1) * ad].to_vec(),
                reward: self.rewards[i],
                next_state: self.next_states[i * sd..(i + 1) * sd].to_vec(),
                done: self.dones[i] != 0.0,
            }
        })
    }

    /// Uniform minibatch without replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        if batch_size == 0 || batch_size > self.len {
            return Err(Error::BufferTooSmall {
                len: self.len,
                requested: batch_size,
            });
        }
        let picks = index::sample(rng, self.len, batch_size);
        let (sd, ad) = (self.state_dim, self.action_dim);
        let mut batch = Batch {
            states: Array2::zeros((batch_size, sd)),
            actions: Array2::zeros((batch_size, ad)),
            rewards: Array1::zeros(batch_size),
            next_states: Array2::zeros((batch_size, sd)),
            dones: Array1::zeros(batch_size),
        };
        for (row, i) in picks.iter().enumerate() {
            batch
                .states
                .row_mut(row)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&self.states[i * sd..(i + 1) * sd]);
            batch
                .actions
                .row_mut(row)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&self.actions[i * ad..(i + 1) * ad]);
            batch
                .next_states
                .row_mut(row)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&self.next_states[i * sd..(i + 1) * sd]);
            batch.rewards[row] = self.rewards[i];
            batch.dones[row] = self.dones[i];
        }
        Ok(batch)
    }
}
