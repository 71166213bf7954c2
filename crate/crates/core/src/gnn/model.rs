use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::neural::{Activation, DenseParams, DenseTrace, LossKind, Matrix, Parameters, Target};
use crate::rng::RngStream;

/// Hidden node vectors, one row per node.
pub type NodeStates = Matrix;

/// `h_v' = σ(W2 h_v + Σ_{u∈N(v)} W1 h_u + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageLayer {
    /// Neighbour weights, `out × in`.
    pub w1: Matrix,
    /// Self weights, `out × in`.
    pub w2: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl MessageLayer {
    pub fn new(w1: Matrix, w2: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if (w1.rows(), w1.cols()) != (w2.rows(), w2.cols()) {
            return Err(Error::DimensionMismatch {
                expected: w1.rows() * w1.cols(),
                actual: w2.rows() * w2.cols(),
                context: "message layer W1/W2 shapes",
            });
        }
        if bias.len() != w1.rows() {
            return Err(Error::DimensionMismatch {
                expected: w1.rows(),
                actual: bias.len(),
                context: "message layer bias length",
            });
        }
        Ok(Self { w1, w2, bias, activation })
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            w1: Matrix::zeros(output, input),
            w2: Matrix::zeros(output, input),
            bias: vec![0.0; output],
            activation,
        }
    }

    fn uniform(input: usize, output: usize, activation: Activation, bound: f64, rng: &mut RngStream) -> Self {
        let mut l = Self::zeros(input, output, activation);
        for v in l
            .w1
            .data_mut()
            .iter_mut()
            .chain(l.w2.data_mut().iter_mut())
            .chain(l.bias.iter_mut())
        {
            *v = rng.uniform(-bound, bound);
        }
        l
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w1.rows()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    /// Graph-level: sum node vectors before the head.
    Sum,
    /// Node-level: the head runs on every node.
    None,
}

impl Readout {
    pub fn name(self) -> &'static str {
        match self {
            Readout::Sum => "sum",
            Readout::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sum" => Some(Readout::Sum),
            "none" => Some(Readout::None),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    pub readout: Readout,
    pub mlp: DenseParams,
}

/// Message layers, then a node-wise suffix, then named heads. Each head
/// carries its own readout so a graph-level task and a node-level task can
/// share one trunk.
#[derive(Clone, Debug, PartialEq)]
pub struct GnnModel {
    input_dim: usize,
    layers: Vec<MessageLayer>,
    suffix: DenseParams,
    heads: BTreeMap<String, Head>,
}

/// Shape of a freshly initialised model with a single `main` head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnnArch {
    pub input_dim: usize,
    /// Output width of each message layer.
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub readout: Readout,
    /// Hidden widths of the head MLP (its output layer is linear).
    pub head_hidden: Vec<usize>,
    pub output_dim: usize,
}

impl GnnArch {
    /// `depth` message layers of `width`, sum readout, two-layer head.
    pub fn standard(input_dim: usize, depth: usize, width: usize, readout: Readout) -> Self {
        Self {
            input_dim,
            widths: vec![width; depth],
            activation: Activation::Relu,
            readout,
            head_hidden: vec![width],
            output_dim: 1,
        }
    }
}

pub const MAIN_HEAD: &str = "main";

impl GnnModel {
    pub fn new(
        input_dim: usize,
        layers: Vec<MessageLayer>,
        suffix: DenseParams,
        heads: BTreeMap<String, Head>,
    ) -> Result<Self> {
        let mut dim = input_dim;
        for l in &layers {
            if l.input_dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: l.input_dim(),
                    context: "message layer chaining",
                });
            }
            dim = l.output_dim();
        }
        if suffix.input_dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: suffix.input_dim(),
                context: "suffix input width",
            });
        }
        for h in heads.values() {
            if h.mlp.input_dim() != suffix.output_dim() {
                return Err(Error::DimensionMismatch {
                    expected: suffix.output_dim(),
                    actual: h.mlp.input_dim(),
                    context: "head input width",
                });
            }
        }
        Ok(Self {
            input_dim,
            layers,
            suffix,
            heads,
        })
    }

    /// Fan-in uniform initialisation.
    pub fn init(arch: &GnnArch, rng: &mut RngStream) -> Result<Self> {
        Self::build(arch, rng, None)
    }

    fn build(arch: &GnnArch, rng: &mut RngStream, bound: Option<f64>) -> Result<Self> {
        if arch.input_dim == 0 || arch.widths.contains(&0) || arch.output_dim == 0 {
            return Err(Error::InvalidArgument("architecture widths must be positive".into()));
        }
        let mut dim = arch.input_dim;
        let mut layers = Vec::with_capacity(arch.widths.len());
        for &w in &arch.widths {
            let b = bound.unwrap_or(1.0 / (dim as f64).sqrt());
            layers.push(MessageLayer::uniform(dim, w, arch.activation, b, rng));
            dim = w;
        }
        let mut model = Self::new(arch.input_dim, layers, DenseParams::identity(dim), BTreeMap::new())?;
        model.add_head_with(MAIN_HEAD, arch.readout, &arch.head_hidden, arch.output_dim, arch.activation, rng, bound)?;
        Ok(model)
    }

    /// Adds (or replaces) a head: hidden layers with `activation`, linear output.
    pub fn add_head(
        &mut self,
        name: &str,
        readout: Readout,
        hidden: &[usize],
        output_dim: usize,
        activation: Activation,
        rng: &mut RngStream,
    ) -> Result<()> {
        self.add_head_with(name, readout, hidden, output_dim, activation, rng, None)
    }

    #[allow(clippy::too_many_arguments)]
    fn add_head_with(
        &mut self,
        name: &str,
        readout: Readout,
        hidden: &[usize],
        output_dim: usize,
        activation: Activation,
        rng: &mut RngStream,
        bound: Option<f64>,
    ) -> Result<()> {
        let mut dims = vec![self.suffix.output_dim()];
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        let mut acts = vec![activation; hidden.len()];
        acts.push(Activation::Identity);
        let mlp = DenseParams::init_with(&dims, &acts, rng, bound)?;
        self.heads.insert(name.to_string(), Head { readout, mlp });
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[MessageLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [MessageLayer] {
        &mut self.layers
    }

    pub fn suffix(&self) -> &DenseParams {
        &self.suffix
    }

    pub fn heads(&self) -> &BTreeMap<String, Head> {
        &self.heads
    }

    pub fn head(&self, name: &str) -> Result<&Head> {
        self.heads.get(name).ok_or_else(|| Error::UnknownHead(name.to_string()))
    }

    pub fn head_mut(&mut self, name: &str) -> Result<&mut Head> {
        self.heads.get_mut(name).ok_or_else(|| Error::UnknownHead(name.to_string()))
    }

    pub fn trunk_width(&self) -> usize {
        self.layers.last().map_or(self.input_dim, MessageLayer::output_dim)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| MessageLayer::zeros(l.input_dim(), l.output_dim(), l.activation))
                .collect(),
            suffix: self.suffix.zeros_like(),
            heads: self
                .heads
                .iter()
                .map(|(k, h)| {
                    (
                        k.clone(),
                        Head {
                            readout: h.readout,
                            mlp: h.mlp.zeros_like(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Trainable mask over [`Parameters::tensors`]: trunk (message layers and
    /// suffix) plus the listed heads.
    pub fn trainable_mask(&self, trunk: bool, heads: &[&str]) -> Vec<bool> {
        let mut mask = vec![trunk; 3 * self.layers.len() + self.suffix.tensors().len()];
        for (name, h) in &self.heads {
            let on = heads.contains(&name.as_str());
            mask.extend(std::iter::repeat(on).take(h.mlp.tensors().len()));
        }
        mask
    }

    /// Flat values of the message layers and suffix.
    pub fn trunk_flat(&self) -> Vec<f64> {
        let n = 3 * self.layers.len() + self.suffix.tensors().len();
        self.tensors()[..n].concat()
    }

    /// Node outputs (`n × out`) for node-level heads, a single row for
    /// graph-level heads.
    pub fn forward(&self, g: &Graph, head: &str) -> Result<Matrix> {
        Ok(self.trace(g, head)?.output().clone())
    }

    pub fn trace(&self, g: &Graph, head: &str) -> Result<GnnTrace> {
        let h = self.head(head)?;
        let mut states = Vec::with_capacity(self.layers.len() + 1);
        let mut aggregated = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        states.push(init_features(g, self.input_dim)?);
        for layer in &self.layers {
            let hprev = states.last().expect("nonempty");
            let agg = neighbor_sum(g, hprev);
            let z = layer_pre_activation(layer, hprev, &agg);
            let mut out = z.clone();
            for v in out.data_mut() {
                *v = layer.activation.apply(*v);
            }
            aggregated.push(agg);
            pre.push(z);
            states.push(out);
        }
        let suffix = self.suffix.trace_batch(states.last().expect("nonempty"))?;
        let readout_in = suffix.output();
        let head_in = match h.readout {
            Readout::Sum => Matrix::row_vector(&readout_in.column_sums()),
            Readout::None => readout_in.clone(),
        };
        let head_trace = h.mlp.trace_batch(&head_in)?;
        Ok(GnnTrace {
            head: head.to_string(),
            states,
            aggregated,
            pre,
            suffix,
            head_trace,
        })
    }

    /// Reverse pass from `d_out` (gradient w.r.t. the head output).
    pub fn backward(&self, g: &Graph, trace: &GnnTrace, d_out: &Matrix) -> Result<GnnModel> {
        let h = self.head(&trace.head)?;
        let mut grads = self.zeros_like();
        let (g_head, d_head_in) = h.mlp.backward(&trace.head_trace, d_out)?;
        grads.heads.get_mut(&trace.head).expect("same keys").mlp = g_head;
        let n = g.num_nodes();
        let d_suffix_out = match h.readout {
            Readout::Sum => {
                let row = d_head_in.row(0).to_vec();
                let mut m = Matrix::zeros(n, row.len());
                for v in 0..n {
                    m.row_mut(v).copy_from_slice(&row);
                }
                m
            }
            Readout::None => d_head_in,
        };
        let (g_suffix, mut d_h) = self.suffix.backward(&trace.suffix, &d_suffix_out)?;
        grads.suffix = g_suffix;
        for t in (0..self.layers.len()).rev() {
            let layer = &self.layers[t];
            let z = &trace.pre[t];
            let a = &trace.states[t + 1];
            for ((d, &zv), &av) in d_h.data_mut().iter_mut().zip(z.data()).zip(a.data()) {
                *d *= layer.activation.derivative(zv, av);
            }
            let gl = &mut grads.layers[t];
            d_h.add_t_matmul_into(&trace.states[t], &mut gl.w2);
            d_h.add_t_matmul_into(&trace.aggregated[t], &mut gl.w1);
            for (gb, s) in gl.bias.iter_mut().zip(d_h.column_sums()) {
                *gb += s;
            }
            if t > 0 {
                // A is symmetric, so the adjoint of the neighbour sum is itself.
                let through_neighbors = neighbor_sum(g, &d_h.matmul(&layer.w1));
                let mut next = d_h.matmul(&layer.w2);
                next.add_assign(&through_neighbors);
                d_h = next;
            }
        }
        Ok(grads)
    }
}

/// Values recorded by [`GnnModel::trace`].
#[derive(Clone, Debug)]
pub struct GnnTrace {
    head: String,
    states: Vec<NodeStates>,
    aggregated: Vec<NodeStates>,
    pre: Vec<NodeStates>,
    suffix: DenseTrace,
    head_trace: DenseTrace,
}

impl GnnTrace {
    pub fn output(&self) -> &Matrix {
        self.head_trace.output()
    }

    /// Node states after message layer `t` (0 is the input features).
    pub fn states(&self, t: usize) -> &NodeStates {
        &self.states[t]
    }
}

impl Parameters for GnnModel {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.extend([l.w1.data(), l.w2.data(), l.bias.as_slice()]);
        }
        out.extend(self.suffix.tensors());
        for h in self.heads.values() {
            out.extend(h.mlp.tensors());
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.w1.data_mut());
            out.push(l.w2.data_mut());
            out.push(l.bias.as_mut_slice());
        }
        out.extend(self.suffix.tensors_mut());
        for h in self.heads.values_mut() {
            out.extend(h.mlp.tensors_mut());
        }
        out
    }
}

/// One-hot feature classes, zero-padded to `width`.
pub fn init_features(g: &Graph, width: usize) -> Result<NodeStates> {
    if width < g.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "feature width {width} below class count {}",
            g.num_classes()
        )));
    }
    let mut h = Matrix::zeros(g.num_nodes(), width);
    for v in 0..g.num_nodes() {
        h[(v, g.feature(v))] = 1.0;
    }
    Ok(h)
}

fn neighbor_sum(g: &Graph, h: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(h.rows(), h.cols());
    for v in 0..g.num_nodes() {
        let row = out.row_mut(v);
        for &u in g.neighbors(v) {
            for (o, x) in row.iter_mut().zip(h.row(u)) {
                *o += x;
            }
        }
    }
    out
}

fn layer_pre_activation(layer: &MessageLayer, h: &Matrix, agg: &Matrix) -> Matrix {
    let mut z = h.matmul_t(&layer.w2);
    z.add_assign(&agg.matmul_t(&layer.w1));
    for i in 0..z.rows() {
        for (v, b) in z.row_mut(i).iter_mut().zip(&layer.bias) {
            *v += b;
        }
    }
    z
}

pub fn gnn_layer_forward(layer: &MessageLayer, g: &Graph, h: &NodeStates) -> Result<NodeStates> {
    if h.cols() != layer.input_dim() || h.rows() != g.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: layer.input_dim(),
            actual: h.cols(),
            context: "node state width",
        });
    }
    let mut z = layer_pre_activation(layer, h, &neighbor_sum(g, h));
    for v in z.data_mut() {
        *v = layer.activation.apply(*v);
    }
    Ok(z)
}

pub fn gnn_forward(model: &GnnModel, g: &Graph, head: &str) -> Result<Matrix> {
    model.forward(g, head)
}

/// Loss value and gradients for one graph.
pub fn gnn_gradients(
    model: &GnnModel,
    g: &Graph,
    head: &str,
    loss: LossKind,
    target: &Target,
) -> Result<(f64, GnnModel)> {
    let trace = model.trace(g, head)?;
    let (value, d_out) = loss.value_and_grad(trace.output(), target)?;
    Ok((value, model.backward(g, &trace, &d_out)?))
}

/// Teacher network: every weight and bias i.i.d. uniform on [-0.1, 0.1].
pub fn sample_teacher(arch: &GnnArch, seed: u64) -> Result<GnnModel> {
    let mut rng = RngStream::new(seed, 0x7eac_4e55);
    GnnModel::build(arch, &mut rng, Some(0.1))
}
