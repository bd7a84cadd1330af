use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;

use super::{Activation, ForwardCache, Mlp};
use crate::error::{check_len, Error, Result};

/// Shape of a critic: state and action widths plus the hidden stack.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetworkSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub noise_conditioned: bool,
}

/// Noise level(s) fed to a noise-conditioned critic.
#[derive(Debug, Clone, Copy)]
pub enum NoiseLevel<'a> {
    Shared(f32),
    PerRow(&'a [f32]),
}

/// Critic `Q(s, a)` or, when noise-conditioned, `Q(s, a, sigma)`.
///
/// Inputs are laid out as `[state | action | ln(sigma)]`; the last column is
/// present only for noise-conditioned networks.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    mlp: Mlp,
    state_dim: usize,
    action_dim: usize,
    noise_conditioned: bool,
}

impl QNetwork {
    pub fn new<R: Rng + ?Sized>(spec: &QNetworkSpec, rng: &mut R) -> Result<Self> {
        let mut widths = vec![Self::input_width_for(
            spec.state_dim,
            spec.action_dim,
            spec.noise_conditioned,
        )];
        widths.extend_from_slice(&spec.hidden);
        widths.push(1);
        let mlp = Mlp::new(&widths, spec.activation, rng)?;
        Self::from_mlp(mlp, spec.state_dim, spec.action_dim, spec.noise_conditioned)
    }

    pub fn from_mlp(
        mlp: Mlp,
        state_dim: usize,
        action_dim: usize,
        noise_conditioned: bool,
    ) -> Result<Self> {
        if action_dim == 0 {
            return Err(Error::Config("action dimension must be positive".into()));
        }
        check_len(
            "critic input width",
            Self::input_width_for(state_dim, action_dim, noise_conditioned),
            mlp.input_width(),
        )?;
        check_len("critic output width", 1, mlp.output_width())?;
        Ok(Self {
            mlp,
            state_dim,
            action_dim,
            noise_conditioned,
        })
    }

    fn input_width_for(state_dim: usize, action_dim: usize, noise_conditioned: bool) -> usize {
        state_dim + action_dim + usize::from(noise_conditioned)
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub(crate) fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn is_noise_conditioned(&self) -> bool {
        self.noise_conditioned
    }

    /// Packs states, actions and noise levels into network input rows.
    pub fn assemble_inputs(
        &self,
        states: ArrayView2<f32>,
        actions: ArrayView2<f32>,
        noise: NoiseLevel<'_>,
    ) -> Result<Array2<f32>> {
        let rows = actions.nrows();
        check_len("critic state width", self.state_dim, states.ncols())?;
        check_len("critic action width", self.action_dim, actions.ncols())?;
        check_len("critic state rows", rows, states.nrows())?;
        let mut x = Array2::zeros((rows, self.mlp.input_width()));
        x.slice_mut(s![.., ..self.state_dim]).assign(&states);
        x.slice_mut(s![.., self.state_dim..self.state_dim + self.action_dim])
            .assign(&actions);
        if self.noise_conditioned {
            let col = self.state_dim + self.action_dim;
            match noise {
                NoiseLevel::Shared(sigma) => {
                    check_sigma(sigma)?;
                    x.column_mut(col).fill(sigma.ln());
                }
                NoiseLevel::PerRow(sigmas) => {
                    check_len("per-row noise levels", rows, sigmas.len())?;
                    for (dst, &sigma) in x.column_mut(col).iter_mut().zip(sigmas) {
                        check_sigma(sigma)?;
                        *dst = sigma.ln();
                    }
                }
            }
        }
        Ok(x)
    }

    /// `Q` for each row. The noise level is ignored by unconditioned critics.
    pub fn values(
        &self,
        states: ArrayView2<f32>,
        actions: ArrayView2<f32>,
        noise: NoiseLevel<'_>,
    ) -> Result<Array1<f32>> {
        let x = self.assemble_inputs(states, actions, noise)?;
        Ok(self.mlp.forward_batch(x.view())?.column(0).to_owned())
    }

    /// Single-point convenience wrapper around [`QNetwork::values`].
    pub fn value(&self, state: &[f32], action: &[f32], sigma: f32) -> Result<f32> {
        let s = ArrayView2::from_shape((1, state.len()), state).expect("contiguous");
        let a = ArrayView2::from_shape((1, action.len()), action).expect("contiguous");
        Ok(self.values(s, a, NoiseLevel::Shared(sigma))?[0])
    }

    /// `Q` and `dQ/da` per row. State and noise blocks of the input gradient are dropped.
    pub fn action_gradients(
        &self,
        states: ArrayView2<f32>,
        actions: ArrayView2<f32>,
        noise: NoiseLevel<'_>,
    ) -> Result<(Array1<f32>, Array2<f32>)> {
        let x = self.assemble_inputs(states, actions, noise)?;
        let (q, grad) = self.mlp.input_gradients(x.view())?;
        let action_grad = grad
            .slice(s![.., self.state_dim..self.state_dim + self.action_dim])
            .to_owned();
        Ok((q, action_grad))
    }

    pub(crate) fn forward_cached(&self, x: ArrayView2<f32>) -> Result<(Array1<f32>, ForwardCache)> {
        let (out, cache) = self.mlp.forward_cached(x)?;
        Ok((out.column(0).to_owned(), cache))
    }
}

fn check_sigma(sigma: f32) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "noise level must be positive, got {sigma}"
        )))
    }
}
