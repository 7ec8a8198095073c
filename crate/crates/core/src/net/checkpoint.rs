//! Versioned JSON model checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::evidential::NU_MARGIN;

use super::link::{raw_len, CHOL_DIAG_FLOOR, KAPPA_FLOOR};
use super::mlp::{LayerParams, Mlp};
use super::NetError;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// On-disk model document: layer shapes and row-major weights, plus the
/// head layout and the link constants the weights were trained against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub layer_dims: Vec<usize>,
    pub layers: Vec<LayerParams>,
    pub horizon: usize,
    pub dim: usize,
    pub kappa_floor: f64,
    pub chol_diag_floor: f64,
    pub nu_margin: f64,
}

impl Checkpoint {
    pub fn from_model(net: &Mlp, horizon: usize, dim: usize) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            layer_dims: net.layer_dims().to_vec(),
            layers: net.layers().to_vec(),
            horizon,
            dim,
            kappa_floor: KAPPA_FLOOR,
            chol_diag_floor: CHOL_DIAG_FLOOR,
            nu_margin: NU_MARGIN,
        }
    }

    /// Rebuild the model, validating shapes and link constants.
    pub fn into_model(self) -> Result<(Mlp, usize, usize), NetError> {
        if self.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(NetError::SchemaMismatch(format!(
                "checkpoint schema {} unsupported (expected {})",
                self.schema_version, CHECKPOINT_SCHEMA_VERSION
            )));
        }
        if self.kappa_floor != KAPPA_FLOOR
            || self.chol_diag_floor != CHOL_DIAG_FLOOR
            || self.nu_margin != NU_MARGIN
        {
            return Err(NetError::SchemaMismatch(
                "checkpoint link constants differ from this build".into(),
            ));
        }
        let expected = raw_len(self.horizon, self.dim);
        if *self.layer_dims.last().unwrap_or(&0) != expected {
            return Err(NetError::SchemaMismatch(format!(
                "output dim {} does not match horizon {} × dim {}",
                self.layer_dims.last().unwrap_or(&0),
                self.horizon,
                self.dim
            )));
        }
        let net = Mlp::from_layers(self.layer_dims, self.layers)?;
        Ok((net, self.horizon, self.dim))
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
