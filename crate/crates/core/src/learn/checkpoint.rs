use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Batch, ModelConfig, ModelKind};
use super::params::ParamSet;
use super::tensor::Matrix;
use crate::error::{Error, Result};
use crate::napast::NapAst;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

/// Learned parameters plus everything needed to encode inputs the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub kind: ModelKind,
    pub config: ModelConfig,
    pub feature_dim: usize,
    pub prune_config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_id: Option<usize>,
    pub node_cap: usize,
    pub params: Vec<NamedTensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl ModelCheckpoint {
    pub fn new(config: ModelConfig, params: &ParamSet, feature_dim: usize, digest: &str, node_cap: usize) -> Self {
        ModelCheckpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            kind: config.kind(),
            config,
            feature_dim,
            prune_config_digest: digest.to_string(),
            cluster_id: None,
            node_cap,
            params: params
                .names
                .iter()
                .zip(&params.values)
                .map(|(n, m)| NamedTensor {
                    name: n.clone(),
                    shape: [m.rows, m.cols],
                    values: m.data.clone(),
                })
                .collect(),
            provenance: None,
        }
    }

    pub fn param_set(&self) -> Result<ParamSet> {
        let mut p = ParamSet::new();
        for t in &self.params {
            p.push(t.name.clone(), Matrix::from_vec(t.shape[0], t.shape[1], t.values.clone())?);
        }
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ModelCheckpoint = serde_json::from_str(text).map_err(|e| Error::json("checkpoint", e))?;
        if c.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: c.format_version,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        if c.kind != c.config.kind() {
            return Err(Error::Config("checkpoint kind disagrees with its config".into()));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::Write {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks that a graph was encoded the way this model expects.
    pub fn check_compatible(&self, nap: &NapAst) -> Result<()> {
        if nap.feature_dim != self.feature_dim {
            return Err(Error::FeatureDimMismatch {
                checkpoint: self.feature_dim,
                encoder: nap.feature_dim,
            });
        }
        if nap.prune_digest != self.prune_config_digest {
            return Err(Error::PruneDigestMismatch {
                checkpoint: self.prune_config_digest.clone(),
                graph: nap.prune_digest.clone(),
            });
        }
        if nap.len() > self.node_cap {
            return Err(Error::CapExceeded {
                nodes: nap.len(),
                cap: self.node_cap,
            });
        }
        Ok(())
    }

    /// Probability of the nullable class for every node of every graph.
    pub fn predict(&self, graphs: &[&NapAst]) -> Result<Vec<Vec<f64>>> {
        for g in graphs {
            self.check_compatible(g)?;
        }
        let params = self.param_set()?;
        let mut out = Vec::with_capacity(graphs.len());
        for chunk in super::train::pack(graphs.iter().map(|g| g.len()), self.node_cap) {
            let members: Vec<&NapAst> = chunk.iter().map(|&i| graphs[i]).collect();
            let batch = Batch::new(&members, self.kind, self.feature_dim)?;
            let logp = self.config.infer(&params, &batch)?;
            for (j, g) in members.iter().enumerate() {
                let base = batch.offsets[j];
                out.push((0..g.len()).map(|i| logp.get(base + i, 1).exp()).collect());
            }
        }
        Ok(out)
    }
}
