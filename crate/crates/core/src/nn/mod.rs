//! Tensors, reverse-mode autodiff, dense networks, and optimizers.

mod checkpoint;
mod graph;
mod net;
mod optim;
mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use graph::{Activation, Gradients, Graph, NodeId};
pub use net::{Binding, DenseLayer, DenseNet};
pub use optim::{Method, OptimState, Parameterized};
pub use tensor::Tensor;
