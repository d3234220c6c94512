//! Generative models whose samples pass through an exact combinatorial
//! solver, so every output satisfies the hard constraints by construction.
//!
//! The numeric core is generic over [`scalar::Scalar`]; the aliases below fix
//! it to `f64`, which is what the orchestration layer and CLI use.

pub mod diffsolver;
pub mod error;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod solve;
pub mod train;

pub use error::{Error, Result};

pub type TensorF = nn::Tensor<f64>;
pub type GraphF = nn::Graph<f64>;
pub type DenseNetF = nn::DenseNet<f64>;
pub type OptimStateF = nn::OptimState<f64>;
pub type CheckpointF = nn::Checkpoint<f64>;
pub type GeneratorF = train::Generator<f64>;
pub type GanStateF = train::GanState<f64>;
pub type VqvaeF = train::Vqvae<f64>;
pub type VqvaeStateF = train::VqvaeState<f64>;
