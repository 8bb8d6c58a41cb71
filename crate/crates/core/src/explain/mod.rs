//! Importance signals read back from a trained model: the per-relation μ
//! hierarchy and attention/residual subgraphs around one pair.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_store::{HeteroGraph, NodeType};
use crate::model::Model;

/// Mean μ of one relation in one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuEntry {
    pub relation: String,
    /// Per head, averaged over checkpoints.
    pub heads: Vec<f64>,
    pub mean: f64,
    pub highlight: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuReport {
    pub checkpoints: usize,
    /// `layers[l]` covers layer `l + 1`, one entry per registered relation.
    pub layers: Vec<Vec<MuEntry>>,
}

impl MuReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `layer<TAB>relation<TAB>mean<TAB>highlight` rows.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("layer\trelation\tmean_mu\thighlight\n");
        for (l, entries) in self.layers.iter().enumerate() {
            for e in entries {
                let _ = writeln!(s, "{}\t{}\t{}\t{}", l + 1, e.relation, e.mean, e.highlight);
            }
        }
        s
    }
}

/// Averages μ over heads and over `models`, which must share layer count,
/// head count and relation registry.
pub fn mu_hierarchy(models: &[&Model]) -> Result<MuReport> {
    let Some(first) = models.first() else {
        return Err(Error::Invalid("no checkpoints given".into()));
    };
    let (layers, heads) = (first.config().layers, first.config().heads);
    for m in &models[1..] {
        if m.relations() != first.relations() {
            return Err(Error::Config(
                "checkpoints have different meta-relation registries".into(),
            ));
        }
        if m.config().layers != layers || m.config().heads != heads {
            return Err(Error::Config(
                "checkpoints have different layer or head counts".into(),
            ));
        }
    }
    let n = models.len() as f64;
    let layers = (0..layers)
        .map(|l| {
            first
                .relations()
                .iter()
                .enumerate()
                .map(|(r, rel)| {
                    let heads: Vec<f64> = (0..heads)
                        .map(|h| {
                            models
                                .iter()
                                .map(|m| m.params().get(m.mu_id(l, r, h)).data()[0])
                                .sum::<f64>()
                                / n
                        })
                        .collect();
                    let mean = heads.iter().sum::<f64>() / heads.len() as f64;
                    MuEntry {
                        relation: rel.key(),
                        heads,
                        mean,
                        highlight: mean > 1.0,
                    }
                })
                .collect()
        })
        .collect();
    Ok(MuReport {
        checkpoints: models.len(),
        layers,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainNode {
    pub node_type: NodeType,
    pub ordinal: usize,
    pub id: String,
    pub name: String,
    /// Fewest incoming hops to either endpoint.
    pub hops: usize,
    /// Residual gate of the node's type per layer; `None` when the layer
    /// has no parameters for it.
    pub gates: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainEdge {
    /// Numbered from 1.
    pub layer: usize,
    pub relation: String,
    pub source: usize,
    pub target: usize,
    /// Per head, exactly as cached by the forward pass.
    pub attention: Vec<f64>,
    pub mean_attention: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSubgraph {
    pub mirna: usize,
    pub disease: usize,
    pub score: f64,
    pub layers: usize,
    pub nodes: Vec<ExplainNode>,
    pub edges: Vec<ExplainEdge>,
}

/// Fewest incoming hops from each node to any of `seeds`, up to `depth`.
pub fn incoming_distances(
    graph: &HeteroGraph,
    seeds: &[(NodeType, usize)],
    depth: usize,
) -> BTreeMap<(NodeType, usize), usize> {
    let mut dist = BTreeMap::new();
    let mut queue = VecDeque::new();
    for &s in seeds {
        if dist.insert(s, 0).is_none() {
            queue.push_back(s);
        }
    }
    while let Some(node @ (t, i)) = queue.pop_front() {
        let d = dist[&node];
        if d == depth {
            continue;
        }
        for adj in graph.relations().iter().filter(|a| a.relation.target == t) {
            for &src in adj.incoming(i) {
                let key = (adj.relation.source, src);
                if let std::collections::btree_map::Entry::Vacant(slot) = dist.entry(key) {
                    slot.insert(d + 1);
                    queue.push_back(key);
                }
            }
        }
    }
    dist
}

/// Forward pass on `graph`, restricted to the computation that reaches
/// the pair: every node within `L` incoming hops of either endpoint, and
/// the layer-`l` edges into nodes at most `L - l` hops away.
pub fn explain_pair(
    model: &Model,
    graph: &HeteroGraph,
    mirna: &str,
    disease: &str,
) -> Result<ExplanationSubgraph> {
    let m = graph.nodes().require(NodeType::Mirna, mirna)?;
    let d = graph.nodes().require(NodeType::Disease, disease)?;
    let input = model.input(graph)?;
    let emb = model.embed(&input)?;
    let score = model.score_pairs(&emb, &[(m, d)])?[0];
    let layers = model.config().layers;
    let dist = incoming_distances(
        graph,
        &[(NodeType::Mirna, m), (NodeType::Disease, d)],
        layers,
    );

    let nodes = dist
        .iter()
        .map(|(&(t, i), &hops)| ExplainNode {
            node_type: t,
            ordinal: i,
            id: graph.nodes().id(t, i).to_string(),
            name: graph.nodes().display_name(t, i).to_string(),
            hops,
            gates: emb.gates.iter().map(|g| g[t.index()]).collect(),
        })
        .collect();

    let mut edges = Vec::new();
    for l in 0..layers {
        let reach = layers - l - 1;
        for (r, rel) in emb.attention.relations.iter().enumerate() {
            let adj = graph.relation(rel)?;
            for (&(t, tgt), &hops) in &dist {
                if t != rel.target || hops > reach {
                    continue;
                }
                for e in adj.edge_range(tgt) {
                    let heads = &emb.attention.values[l][r];
                    edges.push(ExplainEdge {
                        layer: l + 1,
                        relation: rel.key(),
                        source: adj.sources()[e],
                        target: tgt,
                        attention: heads.iter().map(|h| h[e]).collect(),
                        mean_attention: emb.attention.head_mean(l, r, e),
                    });
                }
            }
        }
    }
    Ok(ExplanationSubgraph {
        mirna: m,
        disease: d,
        score,
        layers,
        nodes,
        edges,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Dot,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "dot" => Ok(Self::Dot),
            _ => Err(Error::Invalid(format!(
                "unknown export format `{s}` (expected json or dot)"
            ))),
        }
    }
}

fn dot_id(t: NodeType, i: usize) -> String {
    format!("{}_{i}", t.file_stem())
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl ExplanationSubgraph {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Graphviz rendering: nodes labeled with name and gates, edges with
    /// relation, layer and head-averaged attention; pen width grows with
    /// attention.
    pub fn to_dot(&self) -> Result<String> {
        let mut s = String::from("digraph explanation {\n  rankdir=LR;\n");
        let _ = writeln!(s, "  label=\"score {}\";", self.score);
        for n in &self.nodes {
            let gates: Vec<String> = n
                .gates
                .iter()
                .map(|g| g.map_or("-".into(), |g| format!("{g:.4}")))
                .collect();
            let _ = writeln!(
                s,
                "  {} [label=\"{}\\ngate {}\"];",
                dot_id(n.node_type, n.ordinal),
                dot_escape(&n.name),
                gates.join(" ")
            );
        }
        for e in &self.edges {
            let rel = crate::graph_store::MetaRelation::parse_key(&e.relation)?;
            let _ = writeln!(
                s,
                "  {} -> {} [label=\"{} L{} {}\", penwidth={:.3}];",
                dot_id(rel.source, e.source),
                dot_id(rel.target, e.target),
                rel.kind.as_str(),
                e.layer,
                e.mean_attention,
                0.5 + 4.0 * e.mean_attention
            );
        }
        s.push_str("}\n");
        Ok(s)
    }

    pub fn export(&self, path: &Path, format: ExportFormat) -> Result<()> {
        let text = match format {
            ExportFormat::Json => self.to_json()?,
            ExportFormat::Dot => self.to_dot()?,
        };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
