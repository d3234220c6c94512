//! Run configuration, read from and written to TOML.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::{LevelStyle, TerrainStyle};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_K;
use crate::solve::LevelSpec;
use crate::train::{GanTrainConfig, VqvaeTrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ConstrainedGan,
    PenalizedGan,
    Vqvae,
    BaselinePostprocess,
}

impl Regime {
    pub fn uses_terrain(self) -> bool {
        self == Regime::PenalizedGan
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::ConstrainedGan => "constrained-gan",
            Regime::PenalizedGan => "penalized-gan",
            Regime::Vqvae => "vqvae",
            Regime::BaselinePostprocess => "baseline-postprocess",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Regime::ConstrainedGan,
            Regime::PenalizedGan,
            Regime::Vqvae,
            Regime::BaselinePostprocess,
        ]
        .into_iter()
        .find(|r| r.name() == s)
        .ok_or_else(|| Error::Parameter(format!("unknown regime {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelDataConfig {
    pub height: usize,
    pub width: usize,
    /// Training levels.
    pub count: usize,
    /// Levels after the training ones, used for held-out reconstruction.
    pub held_out: usize,
    pub seed: u64,
    /// Existing dataset; synthesised from `style` when absent.
    pub manifest: Option<PathBuf>,
    pub style: LevelStyle,
}

impl Default for LevelDataConfig {
    fn default() -> Self {
        Self {
            height: 5,
            width: 5,
            count: 50,
            held_out: 20,
            seed: 7,
            manifest: None,
            style: LevelStyle::default(),
        }
    }
}

impl LevelDataConfig {
    pub fn spec(&self) -> LevelSpec {
        LevelSpec::new(self.height, self.width)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainDataConfig {
    pub height: usize,
    pub width: usize,
    pub count: usize,
    pub seed: u64,
    pub manifest: Option<PathBuf>,
    pub style: TerrainStyle,
}

impl Default for TerrainDataConfig {
    fn default() -> Self {
        Self {
            height: 6,
            width: 6,
            count: 100,
            seed: 3,
            manifest: None,
            style: TerrainStyle::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Samples drawn for the final report.
    pub n_samples: usize,
    pub k: usize,
    /// Samples drawn after every epoch for the metric log.
    pub epoch_samples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            k: DEFAULT_K,
            epoch_samples: 32,
        }
    }
}

pub const DEFAULT_GAMMAS: [f64; 6] = [0.0, 1e-4, 1e-3, 3e-3, 5e-3, 1e-2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub gammas: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            gammas: DEFAULT_GAMMAS.to_vec(),
        }
    }
}

impl SweepConfig {
    /// The middle rung of the ladder.
    pub fn mid(&self) -> f64 {
        self.gammas[self.gammas.len() / 2]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub regime: Regime,
    pub seed: u64,
    /// Checkpoint whose generator and critic seed a GAN run.
    pub init_from: Option<PathBuf>,
    pub levels: LevelDataConfig,
    pub terrain: TerrainDataConfig,
    pub gan: GanTrainConfig,
    pub vqvae: VqvaeTrainConfig,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            regime: Regime::ConstrainedGan,
            seed: 0,
            init_from: None,
            levels: LevelDataConfig::default(),
            terrain: TerrainDataConfig::default(),
            gan: GanTrainConfig::default(),
            vqvae: VqvaeTrainConfig::default(),
            eval: EvalConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn for_regime(regime: Regime) -> Self {
        Self {
            regime,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.levels;
        if l.height == 0 || l.width == 0 || l.count == 0 {
            return Err(Error::Parameter(
                "level data needs positive dimensions and count".into(),
            ));
        }
        l.spec().validate()?;
        let t = &self.terrain;
        if t.height == 0 || t.width == 0 || t.count == 0 {
            return Err(Error::Parameter(
                "terrain data needs positive dimensions and count".into(),
            ));
        }
        t.style.validate()?;
        if self.regime == Regime::Vqvae && l.held_out == 0 {
            return Err(Error::Parameter("vqvae runs need held-out levels".into()));
        }
        if self.eval.n_samples == 0 || self.eval.k == 0 {
            return Err(Error::Parameter("eval needs n_samples >= 1 and k >= 1".into()));
        }
        if self.sweep.gammas.is_empty() || self.sweep.gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::Parameter(
                "sweep gammas must be a non-empty list of non-negative values".into(),
            ));
        }
        if self.sweep.gammas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter("sweep gammas must be strictly increasing".into()));
        }
        if self.init_from.is_some() && self.regime == Regime::Vqvae {
            return Err(Error::Parameter("init_from applies to GAN regimes only".into()));
        }
        self.gan.validate()?;
        self.vqvae.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}
