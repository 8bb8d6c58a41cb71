//! Serialized graph bundle.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{MirnaSequences, NodeFeatures};
use super::graph::{HeteroGraph, RelationAdjacency};
use super::nodes::{NodeEntry, NodeFragment, NodeTable, NodeType};
use super::relation::{registry, GraphOptions, MetaRelation};
use crate::container::{self, BlobData};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MAGIC: &[u8; 8] = b"HLGRAPH\0";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BundleHeader {
    counts: [usize; 3],
    text_half_width: usize,
    options: GraphOptions,
    relations: Vec<String>,
    edge_counts: Vec<usize>,
    mirna: Vec<NodeEntry>,
    disease: Vec<NodeEntry>,
    pcg: Vec<NodeEntry>,
    mirna_sequences: Vec<MirnaSequences>,
}

impl HeteroGraph {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = BundleHeader {
            counts: self.nodes.counts(),
            text_half_width: self.features.text_half_width,
            options: self.options,
            relations: self.relations.iter().map(|r| r.relation.key()).collect(),
            edge_counts: self.relations.iter().map(|r| r.edge_count()).collect(),
            mirna: self.nodes.fragment(NodeType::Mirna).entries().to_vec(),
            disease: self.nodes.fragment(NodeType::Disease).entries().to_vec(),
            pcg: self.nodes.fragment(NodeType::Pcg).entries().to_vec(),
            mirna_sequences: self.features.mirna.clone(),
        };
        let mut blobs = Vec::new();
        for r in &self.relations {
            let key = r.relation.key();
            blobs.push((
                format!("{key}.offsets"),
                BlobData::U64(r.offsets.iter().map(|&o| o as u64).collect()),
            ));
            let sources = r
                .sources
                .iter()
                .map(|&s| u32::try_from(s).map_err(|_| Error::Format("ordinal exceeds u32".into())))
                .collect::<Result<Vec<_>>>()?;
            blobs.push((format!("{key}.sources"), BlobData::U32(sources)));
        }
        blobs.push((
            "disease.features".into(),
            BlobData::F64(self.features.disease.data().to_vec()),
        ));
        blobs.push((
            "pcg.features".into(),
            BlobData::F64(self.features.pcg.data().to_vec()),
        ));
        container::encode(MAGIC, BUNDLE_VERSION, &header, &blobs)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let container::Decoded {
            header: h,
            blobs: mut decoded,
            ..
        } = container::decode::<BundleHeader>(MAGIC, BUNDLE_VERSION, bytes)?;
        let nodes = NodeTable::new(
            NodeFragment::from_entries(h.mirna)?,
            NodeFragment::from_entries(h.disease)?,
            NodeFragment::from_entries(h.pcg)?,
        );
        if nodes.counts() != h.counts {
            return Err(Error::Format("node counts disagree with header".into()));
        }
        let expected: Vec<String> = registry(&h.options).iter().map(|r| r.key()).collect();
        if expected != h.relations {
            return Err(Error::Format(
                "relation registry disagrees with options".into(),
            ));
        }
        let width = 2 * h.text_half_width;
        let disease = decoded.take("disease.features")?.into_f64()?;
        let pcg = decoded.take("pcg.features")?.into_f64()?;
        let features = NodeFeatures {
            mirna: h.mirna_sequences,
            disease: Tensor::new(h.counts[1], width, disease)?,
            pcg: Tensor::new(h.counts[2], width, pcg)?,
            text_half_width: h.text_half_width,
        };
        features.validate(h.counts)?;
        let mut relations = Vec::with_capacity(h.relations.len());
        for (key, &edges) in h.relations.iter().zip(&h.edge_counts) {
            let rel = MetaRelation::parse_key(key)?;
            let offsets: Vec<usize> = decoded
                .take(&format!("{key}.offsets"))?
                .into_u64()?
                .into_iter()
                .map(|o| o as usize)
                .collect();
            let sources: Vec<usize> = decoded
                .take(&format!("{key}.sources"))?
                .into_u32()?
                .into_iter()
                .map(|s| s as usize)
                .collect();
            if sources.len() != edges || offsets.len() != nodes.count(rel.target) + 1 {
                return Err(Error::Format(format!("adjacency sizes wrong for {rel}")));
            }
            if sources.iter().any(|&s| s >= nodes.count(rel.source)) {
                return Err(Error::Format(format!(
                    "source ordinal out of range in {rel}"
                )));
            }
            relations.push(RelationAdjacency::from_csr(rel, offsets, sources)?);
        }
        Ok(HeteroGraph {
            nodes,
            features,
            options: h.options,
            relations,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
