//! Model checkpoints: configuration, registry and shapes in a JSON header,
//! parameter values as `f64` blobs in registration order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::{InputShapes, Model};
use crate::container::{self, BlobData};
use crate::error::{Error, Result};
use crate::graph_store::HeteroGraph;
use crate::numerics::{AdamConfig, ParamStore, Tensor};

const MAGIC: &[u8; 8] = b"HLMODEL\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamMeta {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    /// Meta-relation keys in registry order.
    pub relations: Vec<String>,
    pub shapes: InputShapes,
    pub node_fingerprint: String,
    pub params: Vec<ParamMeta>,
    pub optimizer: AdamConfig,
    /// miRNA→disease message-passing edges used in training, present only
    /// when the configuration includes them.
    pub mda_edges: Option<Vec<(usize, usize)>>,
}

impl CheckpointHeader {
    pub fn gnn_param_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.name.starts_with("hgt."))
            .map(|p| p.shape[0] * p.shape[1])
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub node_fingerprint: String,
    pub optimizer: AdamConfig,
    pub mda_edges: Option<Vec<(usize, usize)>>,
}

impl Checkpoint {
    pub fn header(&self) -> CheckpointHeader {
        let model = &self.model;
        CheckpointHeader {
            config: *model.config(),
            relations: model.relations().iter().map(|r| r.key()).collect(),
            shapes: *model.shapes(),
            node_fingerprint: self.node_fingerprint.clone(),
            params: model
                .params()
                .iter()
                .map(|(_, name, t)| ParamMeta {
                    name: name.to_string(),
                    shape: t.shape(),
                })
                .collect(),
            optimizer: self.optimizer,
            mda_edges: self.mda_edges.clone(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let blobs: Vec<(String, BlobData)> = self
            .model
            .params()
            .iter()
            .map(|(_, name, t)| (name.to_string(), BlobData::F64(t.data().to_vec())))
            .collect();
        container::encode(MAGIC, CHECKPOINT_VERSION, &self.header(), &blobs)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let container::Decoded {
            header: h,
            mut blobs,
            ..
        } = container::decode::<CheckpointHeader>(MAGIC, CHECKPOINT_VERSION, bytes)?;
        let mut params = ParamStore::new();
        for meta in &h.params {
            let data = blobs.take(&meta.name)?.into_f64()?;
            params.insert(
                meta.name.clone(),
                Tensor::new(meta.shape[0], meta.shape[1], data)?,
            )?;
        }
        let model = Model::from_params(h.config, h.shapes, params)?;
        let keys: Vec<String> = model.relations().iter().map(|r| r.key()).collect();
        if keys != h.relations {
            return Err(Error::Format(
                "relation registry in header disagrees with configuration".into(),
            ));
        }
        if h.config.graph.include_mda != h.mda_edges.is_some() {
            return Err(Error::Format(
                "MDA edge list must be present exactly when include_mda is set".into(),
            ));
        }
        Ok(Self {
            model,
            node_fingerprint: h.node_fingerprint,
            optimizer: h.optimizer,
            mda_edges: h.mda_edges,
        })
    }

    /// Reads only the header.
    pub fn read_header(path: &Path) -> Result<CheckpointHeader> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let decoded = container::decode::<CheckpointHeader>(MAGIC, CHECKPOINT_VERSION, &bytes)?;
        Ok(decoded.header)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// The message-passing graph this checkpoint was trained on, derived
    /// from the full `base` graph.
    pub fn graph_for(&self, base: &HeteroGraph) -> Result<HeteroGraph> {
        let found = base.nodes().fingerprint();
        if found != self.node_fingerprint {
            return Err(Error::Config(format!(
                "graph node table {found} differs from the checkpoint's {}",
                self.node_fingerprint
            )));
        }
        base.derive(self.model.config().graph, self.mda_edges.as_deref())
    }
}
