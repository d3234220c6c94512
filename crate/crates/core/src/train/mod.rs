//! Training regimes: constrained GAN, penalized generator, constrained
//! VQVAE, and the postprocess baseline.

mod config;
mod gan;
mod objective;
mod vqvae;

pub use config::{AdversaryMode, GanTrainConfig, IndividualLoss, VqvaeTrainConfig};
pub use gan::{
    constrained_gan_epoch, critic_input_grad, critic_step, genco_step, generate_levels, generate_maps,
    penalized_gan_epoch, postprocess_baseline_epoch, solve_rows, GanState, Generator, GroupFn, Head, IndividualFn,
    StepStats,
};
pub use objective::path_objective;
pub use vqvae::{vqvae_epoch, vqvae_step, Codebook, Vqvae, VqvaeState, VqvaeStats};
