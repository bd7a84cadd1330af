use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::Activation;
use crate::error::{check_len, Error, Result};

// Batches up to this size use mat-vec loops instead of GEMM packing.
const SMALL_BATCH: usize = 4;

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    // Eight independent accumulators so the loop vectorizes.
    let mut acc = [0.0f32; 8];
    let (a8, b8) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = a8
        .remainder()
        .iter()
        .zip(b8.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in a8.zip(b8) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f32>() + tail
}

/// One affine layer. `weight` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f32>,
    pub bias: Array1<f32>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub(crate) fn slices(&self) -> [&[f32]; 2] {
        [
            self.weight.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }

    pub(crate) fn slices_mut(&mut self) -> [&mut [f32]; 2] {
        [
            self.weight.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Parameter-shaped storage: gradients, optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub layers: Vec<Dense>,
}

impl ParamSet {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    pub fn slices(&self) -> impl Iterator<Item = &[f32]> {
        self.layers.iter().flat_map(|l| l.slices())
    }

    pub fn slices_mut(&mut self) -> impl Iterator<Item = &mut [f32]> {
        self.layers.iter_mut().flat_map(|l| l.slices_mut())
    }

    pub fn l2_norm(&self) -> f32 {
        self.slices()
            .flat_map(|s| s.iter())
            .map(|&g| (g as f64) * (g as f64))
            .sum::<f64>()
            .sqrt() as f32
    }

    pub fn is_finite(&self) -> bool {
        self.slices().flat_map(|s| s.iter()).all(|g| g.is_finite())
    }

    pub fn fill(&mut self, value: f32) {
        self.slices_mut().for_each(|s| s.fill(value));
    }
}

/// Multilayer perceptron with a shared hidden activation and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    layers: Vec<Dense>,
    activation: Activation,
}

/// Intermediate values retained by [`Mlp::forward_cached`] for the reverse pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    // inputs[k] is the input to layer k.
    inputs: Vec<Array2<f32>>,
    // derivs[k] is the activation derivative after hidden layer k.
    derivs: Vec<Array2<f32>>,
}

impl Mlp {
    /// Builds a network with fan-in scaled uniform initialization,
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and biases.
    pub fn new<R: Rng + ?Sized>(
        widths: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        Self::validate_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f32).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                let mut layer = Dense::zeros(w[0], w[1]);
                layer.weight.iter_mut().for_each(|x| *x = dist.sample(rng));
                layer.bias.iter_mut().for_each(|x| *x = dist.sample(rng));
                layer
            })
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            layers,
            activation,
        })
    }

    /// Builds a network from explicit layers. Widths are inferred and must chain.
    pub fn from_layers(layers: Vec<Dense>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        let mut widths = vec![layers[0].inputs()];
        for layer in &layers {
            check_len("layer input width", *widths.last().unwrap(), layer.inputs())?;
            check_len("layer bias length", layer.outputs(), layer.bias.len())?;
            widths.push(layer.outputs());
        }
        Self::validate_widths(&widths)?;
        Ok(Self {
            widths,
            layers,
            activation,
        })
    }

    fn validate_widths(widths: &[usize]) -> Result<()> {
        if widths.len() < 2 {
            return Err(Error::Config(
                "network needs input and output widths".into(),
            ));
        }
        if widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub(crate) fn param_slices(&self) -> impl Iterator<Item = &[f32]> {
        self.layers.iter().flat_map(|l| l.slices())
    }

    pub(crate) fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut [f32]> {
        self.layers.iter_mut().flat_map(|l| l.slices_mut())
    }

    /// FNV-1a over the raw parameter bits.
    pub fn fingerprint(&self) -> u64 {
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        for x in self.param_slices().flat_map(|s| s.iter()) {
            for b in x.to_bits().to_le_bytes() {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x0100_0000_01b3);
            }
        }
        hash
    }

    fn check_batch(&self, x: &ArrayView2<f32>) -> Result<()> {
        check_len("network input", self.input_width(), x.ncols())
    }

    fn affine(layer: &Dense, x: &ArrayView2<f32>) -> Array2<f32> {
        if x.nrows() <= SMALL_BATCH {
            let mut z = Array2::zeros((x.nrows(), layer.outputs()));
            for (mut out, row) in z.rows_mut().into_iter().zip(x.rows()) {
                let row = row.to_vec();
                for ((o, w), b) in out.iter_mut().zip(layer.weight.rows()).zip(&layer.bias) {
                    *o = dot(w.as_slice().expect("standard layout"), &row) + b;
                }
            }
            return z;
        }
        let mut z = x.dot(&layer.weight.t());
        z += &layer.bias;
        z
    }

    // delta . W, i.e. the gradient pushed back through the weights.
    fn pull_back(layer: &Dense, delta: &Array2<f32>) -> Array2<f32> {
        if delta.nrows() <= SMALL_BATCH {
            let mut up = Array2::zeros((delta.nrows(), layer.inputs()));
            for (mut out, d) in up.rows_mut().into_iter().zip(delta.rows()) {
                let out = out.as_slice_mut().expect("standard layout");
                for (&di, w) in d.iter().zip(layer.weight.rows()) {
                    for (o, &wj) in out.iter_mut().zip(w.as_slice().expect("standard layout")) {
                        *o += di * wj;
                    }
                }
            }
            return up;
        }
        delta.dot(&layer.weight)
    }

    /// Evaluates a batch, one row per example.
    pub fn forward_batch(&self, x: ArrayView2<f32>) -> Result<Array2<f32>> {
        self.check_batch(&x)?;
        let mut h = Self::affine(&self.layers[0], &x);
        for layer in self.layers.iter().skip(1) {
            self.activation
                .apply_slice(h.as_slice_mut().expect("standard layout"));
            h = Self::affine(layer, &h.view());
        }
        Ok(h)
    }

    /// Evaluates a single input vector.
    pub fn forward(&self, input: &[f32]) -> Result<Vec<f32>> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("contiguous");
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Forward pass that keeps what the reverse pass needs.
    pub fn forward_cached(&self, x: ArrayView2<f32>) -> Result<(Array2<f32>, ForwardCache)> {
        self.check_batch(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut derivs = Vec::with_capacity(self.layers.len() - 1);
        inputs.push(x.to_owned());
        let mut h = Self::affine(&self.layers[0], &x);
        for layer in self.layers.iter().skip(1) {
            let mut d = Array2::zeros(h.raw_dim());
            self.activation.apply_with_derivative(
                h.as_slice_mut().expect("standard layout"),
                d.as_slice_mut().expect("standard layout"),
            );
            let next = Self::affine(layer, &h.view());
            inputs.push(h);
            derivs.push(d);
            h = next;
        }
        Ok((h, ForwardCache { inputs, derivs }))
    }

    /// Reverse pass. `grad_output` is dLoss/dOutput for each row. Parameter
    /// gradients are accumulated into `param_grads` when given; the return value
    /// is dLoss/dInput.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: ArrayView2<f32>,
        mut param_grads: Option<&mut ParamSet>,
    ) -> Result<Array2<f32>> {
        check_len(
            "output gradient width",
            self.output_width(),
            grad_output.ncols(),
        )?;
        check_len(
            "output gradient rows",
            cache.inputs[0].nrows(),
            grad_output.nrows(),
        )?;
        let mut delta = grad_output.to_owned();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            if let Some(grads) = param_grads.as_deref_mut() {
                let g = &mut grads.layers[k];
                ndarray::linalg::general_mat_mul(
                    1.0,
                    &delta.t(),
                    &cache.inputs[k],
                    1.0,
                    &mut g.weight,
                );
                g.bias += &delta.sum_axis(Axis(0));
            }
            let mut upstream = Self::pull_back(layer, &delta);
            if k > 0 {
                upstream *= &cache.derivs[k - 1];
            }
            delta = upstream;
        }
        Ok(delta)
    }

    /// Gradient of a scalar output with respect to every input coordinate.
    pub fn grad_wrt_input(&self, input: &[f32]) -> Result<Vec<f32>> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("contiguous");
        Ok(self.input_gradients(x)?.1.into_raw_vec_and_offset().0)
    }

    /// Scalar outputs and their input gradients for a batch of rows.
    pub fn input_gradients(&self, x: ArrayView2<f32>) -> Result<(Array1<f32>, Array2<f32>)> {
        if self.output_width() != 1 {
            return Err(Error::Shape {
                context: "input gradient requires scalar output",
                expected: 1,
                actual: self.output_width(),
            });
        }
        let (out, cache) = self.forward_cached(x)?;
        let ones = Array2::ones((x.nrows(), 1));
        let grad = self.backward(&cache, ones.view(), None)?;
        Ok((out.column(0).to_owned(), grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn affine_net() -> Mlp {
        let layer = Dense {
            weight: array![[1.0, -2.0, 0.5]],
            bias: array![0.25],
        };
        Mlp::from_layers(vec![layer], Activation::Identity).unwrap()
    }

    #[test]
    fn zero_weights_output_last_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::new(&[3, 8, 8, 2], Activation::Mish, &mut rng).unwrap();
        for layer in net.layers.iter_mut() {
            layer.weight.fill(0.0);
        }
        net.layers[2].bias = array![0.7, -1.5];
        assert_eq!(net.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![0.7, -1.5]);
    }

    #[test]
    fn affine_forward_and_gradient() {
        let net = affine_net();
        let y = net.forward(&[2.0, 1.0, 4.0]).unwrap();
        assert_eq!(y, vec![2.0 - 2.0 + 2.0 + 0.25]);
        assert_eq!(
            net.grad_wrt_input(&[9.0, -3.0, 0.1]).unwrap(),
            vec![1.0, -2.0, 0.5]
        );
    }

    #[test]
    fn constant_net_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::new(&[4, 16, 1], Activation::Mish, &mut rng).unwrap();
        net.layers[1].weight.fill(0.0);
        let g = net.grad_wrt_input(&[0.3, -0.2, 1.0, 2.0]).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = affine_net();
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn vector_output_rejects_input_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[2, 4, 2], Activation::Relu, &mut rng).unwrap();
        assert!(net.grad_wrt_input(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn from_layers_rejects_broken_chain() {
        let a = Dense::zeros(3, 4);
        let b = Dense::zeros(5, 1);
        assert!(Mlp::from_layers(vec![a, b], Activation::Mish).is_err());
    }

    #[test]
    fn parameter_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&[3, 6, 5, 1], Activation::Mish, &mut rng).unwrap();
        let x = array![[0.3f32, -0.7, 1.1], [-1.0, 0.2, 0.4]];
        let (_, cache) = net.forward_cached(x.view()).unwrap();
        let mut grads = ParamSet::zeros_like(&net);
        net.backward(&cache, Array2::ones((2, 1)).view(), Some(&mut grads))
            .unwrap();

        let sum_out = |n: &Mlp| -> f64 {
            n.forward_batch(x.view())
                .unwrap()
                .iter()
                .map(|&v| v as f64)
                .sum()
        };
        let h = 1e-2f32;
        for (layer, i, j) in [(0usize, 1usize, 2usize), (1, 4, 0), (2, 0, 3)] {
            let mut plus = net.clone();
            plus.layers[layer].weight[[i, j]] += h;
            let mut minus = net.clone();
            minus.layers[layer].weight[[i, j]] -= h;
            let fd = (sum_out(&plus) - sum_out(&minus)) / (2.0 * h as f64);
            let analytic = grads.layers[layer].weight[[i, j]] as f64;
            assert!(
                (fd - analytic).abs() < 1e-3,
                "layer {layer}: fd {fd} vs {analytic}"
            );
        }
    }

    #[test]
    fn forward_is_bit_identical_on_repeat() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::new(&[4, 32, 32, 1], Activation::Mish, &mut rng).unwrap();
        let x = Array2::from_shape_fn((17, 4), |(i, j)| (i as f32 * 0.37 - j as f32).sin());
        let a = net.forward_batch(x.view()).unwrap();
        let b = net.forward_batch(x.view()).unwrap();
        assert!(a
            .iter()
            .zip(b.iter())
            .all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
