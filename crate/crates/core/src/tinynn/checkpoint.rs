use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Module;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Layer kinds in parameter order.
    pub layers: Vec<String>,
    pub params: Vec<ParamRecord>,
    pub seed: u64,
    /// Training configuration, stored verbatim.
    pub config: serde_json::Value,
    pub version: String,
}

impl Checkpoint {
    pub fn capture(model: &dyn ModuleDyn, layers: Vec<String>, seed: u64, config: serde_json::Value) -> Self {
        Checkpoint {
            layers,
            params: model
                .params_dyn()
                .into_iter()
                .map(|p| ParamRecord {
                    shape: p.0,
                    values: p.1,
                })
                .collect(),
            seed,
            config,
            version: crate::VERSION.to_string(),
        }
    }

    /// Copies stored values into `model`, which must have the same layout.
    pub fn restore<M: Module + ?Sized>(&self, model: &mut M) -> Result<()> {
        let params = model.params_mut();
        if params.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model has {}",
                self.params.len(),
                params.len()
            )));
        }
        for (i, (p, rec)) in params.into_iter().zip(&self.params).enumerate() {
            if p.value.shape != rec.shape || rec.values.len() != p.value.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor {i}: shape {:?} does not match model {:?}",
                    rec.shape, p.value.shape
                )));
            }
            if !rec.values.iter().all(|v| v.is_finite()) {
                return Err(Error::Checkpoint(format!("tensor {i} has non-finite values")));
            }
            p.value.data.copy_from_slice(&rec.values);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::json("checkpoint", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

/// Object-safe view of a module's parameter values.
pub trait ModuleDyn {
    fn params_dyn(&self) -> Vec<(Vec<usize>, Vec<f64>)>;
}

impl<M: Module> ModuleDyn for M {
    fn params_dyn(&self) -> Vec<(Vec<usize>, Vec<f64>)> {
        self.params()
            .into_iter()
            .map(|p| (p.value.shape.clone(), p.value.data.clone()))
            .collect()
    }
}
