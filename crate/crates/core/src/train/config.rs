use serde::{Deserialize, Serialize};

use crate::diffsolver::{SolverLayerConfig, DEFAULT_LEVEL_LAMBDA};
use crate::error::{Error, Result};
use crate::nn::Method;
use crate::solve::{DEFAULT_COST_TABLE, NUM_CLASSES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversaryMode {
    /// The critic keeps its initial weights.
    Fixed,
    /// The critic is trained alongside the generator.
    Updated,
}

/// Per-sample quality term weighted by `gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndividualLoss {
    /// Cost of the corner-to-corner shortest path through the cost map.
    ShortestPath,
    /// Mean cost over all cells.
    Semantic,
}

/// Settings shared by the adversarial regimes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanTrainConfig {
    pub noise_dim: usize,
    pub gen_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    /// Critic updates per generator update.
    pub critic_steps: usize,
    pub w_clip: f64,
    pub gen_lr: f64,
    pub critic_lr: f64,
    pub optimizer: Method,
    pub solver: SolverLayerConfig,
    pub adversary_mode: AdversaryMode,
    /// Weight of the individual loss; zero disables it.
    pub gamma: f64,
    pub individual: IndividualLoss,
    pub cost_table: [f64; NUM_CLASSES],
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            noise_dim: 16,
            gen_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            batch_size: 16,
            epochs: 100,
            critic_steps: 5,
            w_clip: 0.01,
            gen_lr: 1e-3,
            critic_lr: 5e-4,
            optimizer: Method::Adam,
            solver: SolverLayerConfig::blackbox(DEFAULT_LEVEL_LAMBDA),
            adversary_mode: AdversaryMode::Updated,
            gamma: 0.0,
            individual: IndividualLoss::ShortestPath,
            cost_table: DEFAULT_COST_TABLE,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive, got {v}")))
    }
}

fn widths(name: &str, w: &[usize]) -> Result<()> {
    if w.contains(&0) {
        return Err(Error::Parameter(format!("{name} has a zero-width layer")));
    }
    Ok(())
}

fn table_ok(t: &[f64; NUM_CLASSES]) -> Result<()> {
    if t.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
        return Err(Error::Parameter(
            "cost table entries must be finite and non-negative".into(),
        ));
    }
    Ok(())
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.noise_dim == 0 || self.batch_size == 0 {
            return Err(Error::Parameter("noise_dim and batch_size must be at least 1".into()));
        }
        if self.adversary_mode == AdversaryMode::Updated && self.critic_steps == 0 {
            return Err(Error::Parameter("an updated adversary needs critic_steps >= 1".into()));
        }
        widths("gen_hidden", &self.gen_hidden)?;
        widths("critic_hidden", &self.critic_hidden)?;
        positive("gen_lr", self.gen_lr)?;
        positive("critic_lr", self.critic_lr)?;
        positive("w_clip", self.w_clip)?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        table_ok(&self.cost_table)?;
        self.solver.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VqvaeTrainConfig {
    pub codebook_size: usize,
    pub embed_dim: usize,
    /// Cells on each side of a cell seen by the encoder.
    pub patch_radius: usize,
    pub enc_hidden: Vec<usize>,
    pub dec_hidden: Vec<usize>,
    /// Weight of the codebook and commitment terms.
    pub beta1: f64,
    /// Weight of the objective term.
    pub beta2: f64,
    pub gamma_commit: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub optimizer: Method,
    pub solver: SolverLayerConfig,
    pub use_recon: bool,
    pub use_objective: bool,
    /// Re-seed codes left unused by an epoch.
    pub reset_dead_codes: bool,
    pub cost_table: [f64; NUM_CLASSES],
}

impl Default for VqvaeTrainConfig {
    fn default() -> Self {
        Self {
            codebook_size: 16,
            embed_dim: 8,
            patch_radius: 1,
            enc_hidden: vec![64],
            dec_hidden: vec![64],
            beta1: 0.25,
            beta2: 0.1,
            gamma_commit: 0.25,
            batch_size: 10,
            epochs: 30,
            lr: 3e-3,
            optimizer: Method::Adam,
            solver: SolverLayerConfig::blackbox(DEFAULT_LEVEL_LAMBDA),
            use_recon: true,
            use_objective: false,
            reset_dead_codes: true,
            cost_table: DEFAULT_COST_TABLE,
        }
    }
}

impl VqvaeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.codebook_size < 2 {
            return Err(Error::Parameter("codebook needs at least 2 vectors".into()));
        }
        if self.embed_dim == 0 || self.batch_size == 0 {
            return Err(Error::Parameter("embed_dim and batch_size must be at least 1".into()));
        }
        widths("enc_hidden", &self.enc_hidden)?;
        widths("dec_hidden", &self.dec_hidden)?;
        positive("lr", self.lr)?;
        for (name, v) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("gamma_commit", self.gamma_commit),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        table_ok(&self.cost_table)?;
        self.solver.validate()
    }
}
