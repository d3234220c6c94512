use serde::{Deserialize, Serialize};

use super::graph::{Activation, Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DenseLayer<T: Scalar> {
    /// `[out, in]`
    pub weight: Tensor<T>,
    /// `[out]`
    pub bias: Tensor<T>,
    pub activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }
}

/// Feedforward network of dense layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DenseNet<T: Scalar> {
    layers: Vec<DenseLayer<T>>,
}

/// Parameter leaves of one network inside a graph.
#[derive(Clone, Debug)]
pub struct Binding {
    params: Vec<(NodeId, NodeId)>,
}

impl Binding {
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.params.iter().flat_map(|(w, b)| [*w, *b])
    }
}

impl<T: Scalar> DenseNet<T> {
    /// Builds a network through the widths in `dims`, with `hidden` on every
    /// layer except the last, which uses `output`. Weights are scaled-normal
    /// (variance 1/fan_in), biases zero.
    pub fn new(dims: &[usize], hidden: Activation, output: Activation, rng: &mut RngStream) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Parameter(format!("invalid layer widths {dims:?}")));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, pair) in dims.windows(2).enumerate() {
            let (inp, out) = (pair[0], pair[1]);
            let scale = T::of(1.0 / (inp as f64).sqrt());
            let w: Vec<T> = (0..inp * out).map(|_| rng.normal::<T>() * scale).collect();
            let activation = if i + 2 == dims.len() { output } else { hidden };
            layers.push(DenseLayer {
                weight: Tensor::new(vec![out, inp], w)?,
                bias: Tensor::zeros(vec![out]),
                activation,
            });
        }
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Parameter("network needs at least one layer".into()));
        }
        for l in &layers {
            if l.weight.shape().len() != 2 || l.bias.len() != l.output_dim() {
                return Err(Error::Dimension("layer weight/bias shapes disagree".into()));
            }
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Dimension(format!(
                    "layer output {} does not chain into input {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// Registers the parameters as gradient-tracked leaves.
    pub fn bind(&self, g: &mut Graph<T>) -> Binding {
        let params = self
            .layers
            .iter()
            .map(|l| (g.variable(l.weight.clone()), g.variable(l.bias.clone())))
            .collect();
        Binding { params }
    }

    /// Forward pass over a `[B, input_dim]` node using existing parameter leaves.
    pub fn forward_bound(&self, g: &mut Graph<T>, binding: &Binding, x: NodeId) -> Result<NodeId> {
        let width = *g.value(x).shape().last().unwrap_or(&0);
        if width != self.input_dim() {
            return Err(Error::Dimension(format!(
                "network expects input width {}, got {width}",
                self.input_dim()
            )));
        }
        let mut h = x;
        for (layer, (w, b)) in self.layers.iter().zip(&binding.params) {
            let z = g.linear(h, *w, *b)?;
            h = if layer.activation == Activation::Identity {
                z
            } else {
                g.activate(z, layer.activation)
            };
        }
        Ok(h)
    }

    pub fn forward(&self, g: &mut Graph<T>, x: NodeId) -> Result<(NodeId, Binding)> {
        let binding = self.bind(g);
        let y = self.forward_bound(g, &binding, x)?;
        Ok((y, binding))
    }

    /// Graph-free evaluation of `[B, input_dim]` rows.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let xi = g.constant(x.clone());
        let binding = self.bind(&mut g);
        let y = self.forward_bound(&mut g, &binding, xi)?;
        Ok(g.value(y).detached())
    }

    /// Adds the graph gradients of the bound leaves into the parameter buffers.
    pub fn accumulate_grads(&mut self, binding: &Binding, grads: &super::graph::Gradients<T>) -> Result<()> {
        for (layer, (w, b)) in self.layers.iter_mut().zip(&binding.params) {
            let gw = grads.get_or_zero(*w, layer.weight.len());
            let gb = grads.get_or_zero(*b, layer.bias.len());
            layer.weight.accumulate_grad(&gw)?;
            layer.bias.accumulate_grad(&gb)?;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.clear_grad();
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params().all(Tensor::all_finite)
    }
}
