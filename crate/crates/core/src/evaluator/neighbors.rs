use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_store::{HeteroGraph, NodeType};

/// Which neighbor type the common-neighbor statistic counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NeighborType {
    #[serde(rename = "miRNA")]
    Mirna,
    #[serde(rename = "disease")]
    Disease,
    #[serde(rename = "PCG")]
    Pcg,
    #[serde(rename = "all")]
    All,
}

impl NeighborType {
    pub const ALL: [NeighborType; 4] = [
        NeighborType::Mirna,
        NeighborType::Disease,
        NeighborType::Pcg,
        NeighborType::All,
    ];

    fn admits(self, t: NodeType) -> bool {
        match self {
            NeighborType::Mirna => t == NodeType::Mirna,
            NeighborType::Disease => t == NodeType::Disease,
            NeighborType::Pcg => t == NodeType::Pcg,
            NeighborType::All => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NeighborType::Mirna => "miRNA",
            NeighborType::Disease => "disease",
            NeighborType::Pcg => "PCG",
            NeighborType::All => "all",
        }
    }
}

impl fmt::Display for NeighborType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NeighborType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NeighborType::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown neighbor type `{s}`")))
    }
}

/// Typed neighbors of `node`, self-loops excluded. Every stored relation
/// has its reverse, so incoming sources are the undirected neighbors.
pub fn neighbor_set(
    graph: &HeteroGraph,
    node: (NodeType, usize),
    tau: NeighborType,
) -> BTreeSet<(NodeType, usize)> {
    let mut out = BTreeSet::new();
    for adj in graph.relations() {
        let rel = adj.relation;
        if rel.target != node.0 || rel.is_self_loop() || !tau.admits(rel.source) {
            continue;
        }
        out.extend(adj.incoming(node.1).iter().map(|&s| (rel.source, s)));
    }
    out
}

/// |N_m ∩ N_d| / |N_m ∪ N_d| per pair, or NaN when the union is empty.
/// The query nodes themselves are removed from both sets.
///
/// `graph` should carry every verified association as an edge.
pub fn common_neighbor_stat(
    graph: &HeteroGraph,
    pairs: &[(usize, usize)],
    tau: NeighborType,
) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(m, d)| {
            let (qm, qd) = ((NodeType::Mirna, m), (NodeType::Disease, d));
            let mut nm = neighbor_set(graph, qm, tau);
            let mut nd = neighbor_set(graph, qd, tau);
            for set in [&mut nm, &mut nd] {
                set.remove(&qm);
                set.remove(&qd);
            }
            let union = nm.union(&nd).count();
            if union == 0 {
                f64::NAN
            } else {
                nm.intersection(&nd).count() as f64 / union as f64
            }
        })
        .collect()
}

/// Distribution of CM values: NaN and exact zeros counted apart, the
/// remaining values in `bins` equal-width bins over (0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmHistogram {
    pub nan: usize,
    pub zero: usize,
    pub counts: Vec<usize>,
}

pub fn cm_histogram(values: &[f64], bins: usize) -> Result<CmHistogram> {
    if bins == 0 {
        return Err(Error::Invalid("histogram needs at least one bin".into()));
    }
    let mut h = CmHistogram {
        nan: 0,
        zero: 0,
        counts: vec![0; bins],
    };
    for &v in values {
        if v.is_nan() {
            h.nan += 1;
        } else if v == 0.0 {
            h.zero += 1;
        } else {
            let b = ((v * bins as f64).ceil() as usize).clamp(1, bins) - 1;
            h.counts[b] += 1;
        }
    }
    Ok(h)
}
