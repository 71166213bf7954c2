//! Fully connected layers with hand-written reverse-mode gradients.

use serde::{Deserialize, Serialize};

use super::loss::{LossKind, Target};
use super::matrix::Matrix;
use super::params::Parameters;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z` and output `a = apply(z)`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// `y = σ(W x + b)` with `W` stored as `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::DimensionMismatch {
                expected: weight.rows(),
                actual: bias.len(),
                context: "dense bias length",
            });
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weight: Matrix::zeros(output, input),
            bias: vec![0.0; output],
            activation,
        }
    }

    /// Uniform in `[-1/√fan_in, 1/√fan_in]` for weights and biases.
    pub fn fan_in_uniform(input: usize, output: usize, activation: Activation, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        Self::uniform(input, output, activation, bound, rng)
    }

    pub fn uniform(input: usize, output: usize, activation: Activation, bound: f64, rng: &mut RngStream) -> Self {
        let mut layer = Self::zeros(input, output, activation);
        for w in layer.weight.data_mut() {
            *w = rng.uniform(-bound, bound);
        }
        for b in &mut layer.bias {
            *b = rng.uniform(-bound, bound);
        }
        layer
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// An MLP. With zero layers it is the identity on `input_dim` features.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    input_dim: usize,
    layers: Vec<DenseLayer>,
}

/// Values recorded by a forward pass, needed for [`DenseParams::backward`].
#[derive(Clone, Debug)]
pub struct DenseTrace {
    /// `inputs[l]` is the input of layer `l`; the final entry is the output.
    activations: Vec<Matrix>,
    pre: Vec<Matrix>,
}

impl DenseTrace {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("trace holds the input at least")
    }

    pub fn input(&self) -> &Matrix {
        &self.activations[0]
    }
}

impl DenseParams {
    pub fn new(input_dim: usize, layers: Vec<DenseLayer>) -> Result<Self> {
        let mut dim = input_dim;
        for l in &layers {
            if l.input_dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: l.input_dim(),
                    context: "dense layer chaining",
                });
            }
            dim = l.output_dim();
        }
        Ok(Self { input_dim, layers })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            input_dim: dim,
            layers: Vec::new(),
        }
    }

    /// Fan-in uniform initialisation; `activations[i]` applies to layer `i`.
    pub fn init(dims: &[usize], activations: &[Activation], rng: &mut RngStream) -> Result<Self> {
        Self::init_with(dims, activations, rng, None)
    }

    /// Like [`init`](Self::init) but with a fixed uniform bound when given.
    pub fn init_with(
        dims: &[usize],
        activations: &[Activation],
        rng: &mut RngStream,
        bound: Option<f64>,
    ) -> Result<Self> {
        if dims.is_empty() || activations.len() + 1 != dims.len() {
            return Err(Error::InvalidArgument(
                "dense init needs one activation per layer".into(),
            ));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| match bound {
                Some(b) => DenseLayer::uniform(w[0], w[1], act, b, rng),
                None => DenseLayer::fan_in_uniform(w[0], w[1], act, rng),
            })
            .collect();
        Self::new(dims[0], layers)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, DenseLayer::output_dim)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn push(&mut self, layer: DenseLayer) -> Result<()> {
        if layer.input_dim() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                actual: layer.input_dim(),
                context: "dense layer chaining",
            });
        }
        self.layers.push(layer);
        Ok(())
    }

    /// Forward pass over a batch (one sample per row).
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.trace_batch(x).map(|t| t.activations.into_iter().last().expect("nonempty"))
    }

    pub fn trace_batch(&self, x: &Matrix) -> Result<DenseTrace> {
        if x.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.cols(),
                context: "dense input width",
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        activations.push(x.clone());
        for layer in &self.layers {
            let mut z = activations.last().expect("nonempty").matmul_t(&layer.weight);
            for i in 0..z.rows() {
                for (v, b) in z.row_mut(i).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            let mut a = z.clone();
            for v in a.data_mut() {
                *v = layer.activation.apply(*v);
            }
            pre.push(z);
            activations.push(a);
        }
        Ok(DenseTrace { activations, pre })
    }

    /// Reverse pass: gradients of the parameters and of the input, given the
    /// gradient of the scalar objective with respect to the output.
    pub fn backward(&self, trace: &DenseTrace, d_out: &Matrix) -> Result<(DenseParams, Matrix)> {
        let out = trace.output();
        if (d_out.rows(), d_out.cols()) != (out.rows(), out.cols()) {
            return Err(Error::DimensionMismatch {
                expected: out.cols(),
                actual: d_out.cols(),
                context: "dense output gradient shape",
            });
        }
        let mut grads = self.zeros_like();
        let mut delta = d_out.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let z = &trace.pre[l];
            let a = &trace.activations[l + 1];
            for ((d, &zv), &av) in delta.data_mut().iter_mut().zip(z.data()).zip(a.data()) {
                *d *= layer.activation.derivative(zv, av);
            }
            let g = &mut grads.layers[l];
            delta.add_t_matmul_into(&trace.activations[l], &mut g.weight);
            for (gb, s) in g.bias.iter_mut().zip(delta.column_sums()) {
                *gb += s;
            }
            delta = delta.matmul(&layer.weight);
        }
        Ok((grads, delta))
    }

    pub fn zeros_like(&self) -> DenseParams {
        DenseParams {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.input_dim(), l.output_dim(), l.activation))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

impl Parameters for DenseParams {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
            .collect()
    }
}

/// Single-vector forward pass.
pub fn mlp_forward(params: &DenseParams, x: &[f64]) -> Result<Vec<f64>> {
    params
        .forward_batch(&Matrix::row_vector(x))
        .map(Matrix::into_data)
}

/// Gradient of `loss(output, target)` for a recorded single-example (or
/// batch) forward pass.
pub fn backprop(
    params: &DenseParams,
    trace: &DenseTrace,
    loss: LossKind,
    target: &Target,
) -> Result<DenseParams> {
    let (_, d_out) = loss.value_and_grad(trace.output(), target)?;
    params.backward(trace, &d_out).map(|(g, _)| g)
}
