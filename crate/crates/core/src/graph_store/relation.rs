use std::fmt;

use serde::{Deserialize, Serialize};

use super::nodes::NodeType;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Family,
    FatherSon,
    Group,
    Association,
    RevAssociation,
    #[serde(rename = "self")]
    SelfLoop,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Family => "family",
            EdgeKind::FatherSon => "father-son",
            EdgeKind::Group => "group",
            EdgeKind::Association => "association",
            EdgeKind::RevAssociation => "rev_association",
            EdgeKind::SelfLoop => "self",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "family" => EdgeKind::Family,
            "father-son" | "father_son" => EdgeKind::FatherSon,
            "group" => EdgeKind::Group,
            "association" => EdgeKind::Association,
            "rev_association" => EdgeKind::RevAssociation,
            "self" => EdgeKind::SelfLoop,
            _ => return Err(Error::UnknownRelation(s.to_string())),
        })
    }

    pub fn is_intra_class(self) -> bool {
        matches!(
            self,
            EdgeKind::Family | EdgeKind::FatherSon | EdgeKind::Group
        )
    }
}

/// `⟨source type, edge kind, target type⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MetaRelation {
    pub source: NodeType,
    pub kind: EdgeKind,
    pub target: NodeType,
}

impl MetaRelation {
    pub const fn new(source: NodeType, kind: EdgeKind, target: NodeType) -> Self {
        Self {
            source,
            kind,
            target,
        }
    }

    /// Stable identifier used in parameter names and file headers,
    /// e.g. `miRNA:family:miRNA`.
    pub fn key(&self) -> String {
        format!("{}:{}:{}", self.source, self.kind.as_str(), self.target)
    }

    pub fn parse_key(key: &str) -> Result<Self> {
        let parts: Vec<&str> = key.split(':').collect();
        let [s, k, t] = parts.as_slice() else {
            return Err(Error::UnknownRelation(key.to_string()));
        };
        Ok(Self::new(
            NodeType::parse(s)?,
            EdgeKind::parse(k)?,
            NodeType::parse(t)?,
        ))
    }

    pub fn is_self_loop(&self) -> bool {
        self.kind == EdgeKind::SelfLoop
    }

    /// Whether this relation carries miRNA↔disease association edges.
    pub fn is_mda(&self) -> bool {
        matches!(
            (self.source, self.target),
            (NodeType::Mirna, NodeType::Disease) | (NodeType::Disease, NodeType::Mirna)
        )
    }

    pub fn involves(&self, t: NodeType) -> bool {
        self.source == t || self.target == t
    }
}

impl fmt::Display for MetaRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "<{}, {}, {}>",
            self.source,
            self.kind.as_str(),
            self.target
        )
    }
}

/// Which parts of the heterogeneous graph take part in message passing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphOptions {
    pub use_intra_edges: bool,
    pub use_pcg: bool,
    pub include_mda: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            use_intra_edges: true,
            use_pcg: true,
            include_mda: false,
        }
    }
}

use EdgeKind::*;
use NodeType::*;

/// Every meta-relation the graph can carry, in registry order.
pub const ALL_RELATIONS: [MetaRelation; 12] = [
    MetaRelation::new(Mirna, Family, Mirna),
    MetaRelation::new(Disease, FatherSon, Disease),
    MetaRelation::new(Pcg, Group, Pcg),
    MetaRelation::new(Mirna, Association, Pcg),
    MetaRelation::new(Pcg, RevAssociation, Mirna),
    MetaRelation::new(Pcg, Association, Disease),
    MetaRelation::new(Disease, RevAssociation, Pcg),
    MetaRelation::new(Mirna, SelfLoop, Mirna),
    MetaRelation::new(Disease, SelfLoop, Disease),
    MetaRelation::new(Pcg, SelfLoop, Pcg),
    MetaRelation::new(Mirna, Association, Disease),
    MetaRelation::new(Disease, RevAssociation, Mirna),
];

/// The registered relations under `options`, in registry order.
pub fn registry(options: &GraphOptions) -> Vec<MetaRelation> {
    ALL_RELATIONS
        .iter()
        .copied()
        .filter(|r| {
            if r.is_mda() {
                return options.include_mda;
            }
            if r.kind.is_intra_class() && !options.use_intra_edges {
                return false;
            }
            !(r.involves(Pcg) && !options.use_pcg)
        })
        .collect()
}
