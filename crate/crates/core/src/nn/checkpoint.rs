//! Text checkpoints: network shapes and flat parameter arrays as JSON.
//! Floats are written in shortest round-trip form, so reloads are bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::DenseNet;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "genco-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Checkpoint<T: Scalar> {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub step: u64,
    pub nets: BTreeMap<String, DenseNet<T>>,
    #[serde(default)]
    pub tensors: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(seed: u64, step: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed,
            step,
            nets: BTreeMap::new(),
            tensors: BTreeMap::new(),
        }
    }

    pub fn with_net(mut self, name: &str, net: &DenseNet<T>) -> Self {
        self.nets.insert(name.into(), net.clone());
        self
    }

    pub fn with_tensor(mut self, name: &str, t: &Tensor<T>) -> Self {
        self.tensors.insert(name.into(), t.detached());
        self
    }

    pub fn net(&self, name: &str) -> Result<&DenseNet<T>> {
        self.nets
            .get(name)
            .ok_or_else(|| Error::Parse(format!("checkpoint has no network '{name}'")))
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Parse(format!("checkpoint has no tensor '{name}'")))
    }

    pub fn to_text(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        for net in ck.nets.values() {
            for p in net.params() {
                p.validate()?;
            }
            DenseNet::from_layers(net.layers().to_vec())?;
        }
        for t in ck.tensors.values() {
            t.validate()?;
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}
