use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::features::NodeFeatures;
use super::nodes::{NodeTable, NodeType};
use super::relation::{registry, EdgeKind, GraphOptions, MetaRelation};
use crate::error::{Error, Result};

/// Edge tables accepted as input, before direction and reverse handling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputEdgeKind {
    Family,
    FatherSon,
    Group,
    MirnaPcg,
    PcgDisease,
    MirnaDisease,
}

impl InputEdgeKind {
    pub const ALL: [InputEdgeKind; 6] = [
        InputEdgeKind::Family,
        InputEdgeKind::FatherSon,
        InputEdgeKind::Group,
        InputEdgeKind::MirnaPcg,
        InputEdgeKind::PcgDisease,
        InputEdgeKind::MirnaDisease,
    ];

    fn index(self) -> usize {
        self as usize
    }

    /// `<stem>` in `edges_<stem>.tsv`.
    pub fn file_stem(self) -> &'static str {
        match self {
            InputEdgeKind::Family => "family",
            InputEdgeKind::FatherSon => "father_son",
            InputEdgeKind::Group => "group",
            InputEdgeKind::MirnaPcg => "mirna_pcg",
            InputEdgeKind::PcgDisease => "pcg_disease",
            InputEdgeKind::MirnaDisease => "mirna_disease",
        }
    }

    pub fn endpoints(self) -> (NodeType, NodeType) {
        use NodeType::*;
        match self {
            InputEdgeKind::Family => (Mirna, Mirna),
            InputEdgeKind::FatherSon => (Disease, Disease),
            InputEdgeKind::Group => (Pcg, Pcg),
            InputEdgeKind::MirnaPcg => (Mirna, Pcg),
            InputEdgeKind::PcgDisease => (Pcg, Disease),
            InputEdgeKind::MirnaDisease => (Mirna, Disease),
        }
    }

    pub fn is_intra_class(self) -> bool {
        matches!(
            self,
            InputEdgeKind::Family | InputEdgeKind::FatherSon | InputEdgeKind::Group
        )
    }

    /// Relation carrying the edges in their stated direction.
    pub fn forward(self) -> MetaRelation {
        let (s, t) = self.endpoints();
        let kind = match self {
            InputEdgeKind::Family => EdgeKind::Family,
            InputEdgeKind::FatherSon => EdgeKind::FatherSon,
            InputEdgeKind::Group => EdgeKind::Group,
            _ => EdgeKind::Association,
        };
        MetaRelation::new(s, kind, t)
    }

    /// The `rev_` twin; intra-class kinds are their own reverse.
    pub fn reverse(self) -> MetaRelation {
        if self.is_intra_class() {
            return self.forward();
        }
        let (s, t) = self.endpoints();
        MetaRelation::new(t, EdgeKind::RevAssociation, s)
    }
}

/// Resolved ordinal pairs per input kind.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InputEdges {
    lists: [Vec<(usize, usize)>; 6],
}

impl InputEdges {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, kind: InputEdgeKind) -> &[(usize, usize)] {
        &self.lists[kind.index()]
    }

    pub fn set(&mut self, kind: InputEdgeKind, pairs: Vec<(usize, usize)>) {
        self.lists[kind.index()] = pairs;
    }

    pub fn with(mut self, kind: InputEdgeKind, pairs: Vec<(usize, usize)>) -> Self {
        self.set(kind, pairs);
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ResolvedEdges {
    pub pairs: Vec<(usize, usize)>,
    pub dropped: usize,
}

/// Maps symbol pairs onto ordinals by primary ID, then alias. Unresolvable
/// pairs are counted and dropped; the result is sorted and de-duplicated.
pub fn resolve_edges(
    raw_pairs: &[(String, String)],
    kind: InputEdgeKind,
    table: &NodeTable,
) -> ResolvedEdges {
    let (src_type, dst_type) = kind.endpoints();
    let mut dropped = 0;
    let mut set = BTreeSet::new();
    for (s, d) in raw_pairs {
        match (table.resolve(src_type, s), table.resolve(dst_type, d)) {
            (Some(a), Some(b)) => {
                set.insert((a, b));
            }
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        log::info!("{}: dropped {dropped} unresolvable pairs", kind.file_stem());
    }
    ResolvedEdges {
        pairs: set.into_iter().collect(),
        dropped,
    }
}

/// Incoming adjacency of one meta-relation in CSR form: the sources of
/// target `t` are `sources[offsets[t]..offsets[t + 1]]`, ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationAdjacency {
    pub relation: MetaRelation,
    pub(crate) offsets: Vec<usize>,
    pub(crate) sources: Arc<[usize]>,
    pub(crate) targets: Arc<[usize]>,
}

impl RelationAdjacency {
    pub(crate) fn from_pairs(
        relation: MetaRelation,
        mut pairs: Vec<(usize, usize)>,
        target_count: usize,
    ) -> Self {
        pairs.sort_by_key(|&(s, t)| (t, s));
        pairs.dedup();
        let mut offsets = vec![0usize; target_count + 1];
        for &(_, t) in &pairs {
            offsets[t + 1] += 1;
        }
        for i in 0..target_count {
            offsets[i + 1] += offsets[i];
        }
        let sources: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let targets: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        Self {
            relation,
            offsets,
            sources: sources.into(),
            targets: targets.into(),
        }
    }

    pub(crate) fn from_csr(
        relation: MetaRelation,
        offsets: Vec<usize>,
        sources: Vec<usize>,
    ) -> Result<Self> {
        if offsets.first() != Some(&0)
            || offsets.last() != Some(&sources.len())
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::Format(format!("corrupt offsets for {relation}")));
        }
        let mut targets = Vec::with_capacity(sources.len());
        for t in 0..offsets.len() - 1 {
            let run = &sources[offsets[t]..offsets[t + 1]];
            if run.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Format(format!("unsorted sources for {relation}")));
            }
            targets.extend(std::iter::repeat_n(t, run.len()));
        }
        Ok(Self {
            relation,
            offsets,
            sources: sources.into(),
            targets: targets.into(),
        })
    }

    pub fn edge_count(&self) -> usize {
        self.sources.len()
    }

    pub fn target_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Edge sources in (target, source) order.
    pub fn sources(&self) -> &Arc<[usize]> {
        &self.sources
    }

    /// Edge targets aligned with [`RelationAdjacency::sources`]; sorted.
    pub fn targets(&self) -> &Arc<[usize]> {
        &self.targets
    }

    pub fn incoming(&self, target: usize) -> &[usize] {
        &self.sources[self.offsets[target]..self.offsets[target + 1]]
    }

    /// Index range of `target`'s incoming edges.
    pub fn edge_range(&self, target: usize) -> std::ops::Range<usize> {
        self.offsets[target]..self.offsets[target + 1]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.sources
            .iter()
            .copied()
            .zip(self.targets.iter().copied())
    }
}

/// Immutable typed graph with reverse edges and self-loops materialized.
#[derive(Clone, Debug, PartialEq)]
pub struct HeteroGraph {
    pub(crate) nodes: NodeTable,
    pub(crate) features: NodeFeatures,
    pub(crate) options: GraphOptions,
    pub(crate) relations: Vec<RelationAdjacency>,
}

/// Builds the message-passing graph for `options` from resolved edges.
///
/// Association kinds gain a `rev_` twin, intra-class kinds are stored in
/// both directions under one kind, and every node gets one self-loop.
pub fn build_graph(
    nodes: NodeTable,
    features: NodeFeatures,
    edges: &InputEdges,
    options: GraphOptions,
) -> Result<HeteroGraph> {
    features.validate(nodes.counts())?;
    for kind in InputEdgeKind::ALL {
        let (s, t) = kind.endpoints();
        let (ns, nt) = (nodes.count(s), nodes.count(t));
        if let Some(&(a, b)) = edges.get(kind).iter().find(|&&(a, b)| a >= ns || b >= nt) {
            return Err(Error::Invalid(format!(
                "{} edge ({a}, {b}) out of range for {ns} {s} / {nt} {t} nodes",
                kind.file_stem()
            )));
        }
    }
    let relations = registry(&options)
        .into_iter()
        .map(|rel| {
            let target_count = nodes.count(rel.target);
            let pairs = relation_pairs(rel, edges, &nodes);
            RelationAdjacency::from_pairs(rel, pairs, target_count)
        })
        .collect();
    Ok(HeteroGraph {
        nodes,
        features,
        options,
        relations,
    })
}

fn relation_pairs(rel: MetaRelation, edges: &InputEdges, nodes: &NodeTable) -> Vec<(usize, usize)> {
    if rel.is_self_loop() {
        return (0..nodes.count(rel.target)).map(|i| (i, i)).collect();
    }
    let mut out = Vec::new();
    for kind in InputEdgeKind::ALL {
        let list = edges.get(kind);
        if kind.is_intra_class() && kind.forward() == rel {
            for &(a, b) in list {
                if a != b {
                    out.push((a, b));
                    out.push((b, a));
                }
            }
        } else if !kind.is_intra_class() {
            if kind.forward() == rel {
                out.extend_from_slice(list);
            } else if kind.reverse() == rel {
                out.extend(list.iter().map(|&(a, b)| (b, a)));
            }
        }
    }
    out
}

impl HeteroGraph {
    pub fn nodes(&self) -> &NodeTable {
        &self.nodes
    }

    pub fn features(&self) -> &NodeFeatures {
        &self.features
    }

    pub fn options(&self) -> &GraphOptions {
        &self.options
    }

    pub fn text_half_width(&self) -> usize {
        self.features.text_half_width
    }

    pub fn count(&self, t: NodeType) -> usize {
        self.nodes.count(t)
    }

    pub fn relations(&self) -> &[RelationAdjacency] {
        &self.relations
    }

    pub fn meta_relations(&self) -> Vec<MetaRelation> {
        self.relations.iter().map(|r| r.relation).collect()
    }

    pub fn relation(&self, rel: &MetaRelation) -> Result<&RelationAdjacency> {
        self.relations
            .iter()
            .find(|r| &r.relation == rel)
            .ok_or_else(|| Error::UnknownRelation(rel.key()))
    }

    pub fn has_relation(&self, rel: &MetaRelation) -> bool {
        self.relations.iter().any(|r| &r.relation == rel)
    }

    /// Sources of the incoming edges of `target` under `rel`.
    pub fn neighbors(&self, target: usize, rel: &MetaRelation) -> Result<&[usize]> {
        let adj = self.relation(rel)?;
        if target >= adj.target_count() {
            return Err(Error::Invalid(format!(
                "{} ordinal {target} out of range ({} nodes)",
                rel.target,
                adj.target_count()
            )));
        }
        Ok(adj.incoming(target))
    }

    pub fn edge_count(&self) -> usize {
        self.relations
            .iter()
            .map(RelationAdjacency::edge_count)
            .sum()
    }

    /// Total incoming edges of a node over every relation.
    pub fn in_degree(&self, t: NodeType, ordinal: usize) -> usize {
        self.relations
            .iter()
            .filter(|r| r.relation.target == t)
            .map(|r| r.incoming(ordinal).len())
            .sum()
    }

    /// Recovers the undirected input edge lists from the forward relations.
    pub fn input_edges(&self) -> InputEdges {
        let mut out = InputEdges::new();
        for kind in InputEdgeKind::ALL {
            if let Ok(adj) = self.relation(&kind.forward()) {
                let pairs = if kind.is_intra_class() {
                    adj.edges().filter(|(s, t)| s < t).collect()
                } else {
                    adj.edges().collect::<BTreeSet<_>>().into_iter().collect()
                };
                out.set(kind, pairs);
            }
        }
        out
    }

    /// Rebuilds the graph under different options. `mda_pairs` supplies the
    /// miRNA→disease edges when `options.include_mda` is set; otherwise the
    /// graph's own MDA edges (if any) are dropped.
    pub fn derive(
        &self,
        options: GraphOptions,
        mda_pairs: Option<&[(usize, usize)]>,
    ) -> Result<HeteroGraph> {
        if options.use_intra_edges && !self.options.use_intra_edges {
            return Err(Error::Config(
                "graph was built without intra-class edges".into(),
            ));
        }
        if options.use_pcg && !self.options.use_pcg {
            return Err(Error::Config("graph was built without PCG edges".into()));
        }
        let mut edges = self.input_edges();
        let mda = match (options.include_mda, mda_pairs) {
            (false, _) => Vec::new(),
            (true, Some(p)) => p.to_vec(),
            (true, None) => edges.get(InputEdgeKind::MirnaDisease).to_vec(),
        };
        edges.set(InputEdgeKind::MirnaDisease, mda);
        build_graph(self.nodes.clone(), self.features.clone(), &edges, options)
    }

    /// Same graph with every MDA pair added as an edge, for neighborhood
    /// statistics.
    pub fn with_mda_edges(&self, mda_pairs: &[(usize, usize)]) -> Result<HeteroGraph> {
        let options = GraphOptions {
            include_mda: true,
            ..self.options
        };
        self.derive(options, Some(mda_pairs))
    }

    /// Relabels the nodes of type `t`: new ordinal `i` is old ordinal
    /// `order[i]`. Returns the relabeled graph.
    pub fn permuted(&self, t: NodeType, order: &[usize]) -> Result<HeteroGraph> {
        let n = self.count(t);
        let mut inverse = vec![usize::MAX; n];
        if order.len() != n {
            return Err(Error::Invalid("permutation length mismatch".into()));
        }
        for (new, &old) in order.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(Error::Invalid("not a permutation".into()));
            }
            inverse[old] = new;
        }
        let nodes = self
            .nodes
            .with_fragment(t, self.nodes.fragment(t).permuted(order)?);
        let features = self.features.permuted(t, order);
        let mut edges = self.input_edges();
        for kind in InputEdgeKind::ALL {
            let (s, d) = kind.endpoints();
            let mapped = edges
                .get(kind)
                .iter()
                .map(|&(a, b)| {
                    let a = if s == t { inverse[a] } else { a };
                    let b = if d == t { inverse[b] } else { b };
                    if kind.is_intra_class() && a > b {
                        (b, a)
                    } else {
                        (a, b)
                    }
                })
                .collect();
            edges.set(kind, mapped);
        }
        build_graph(nodes, features, &edges, self.options)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_store::features::MirnaSequences;
    use crate::graph_store::nodes::{NodeEntry, NodeFragment};
    use crate::numerics::Tensor;

    fn fragment(prefix: &str, n: usize) -> NodeFragment {
        NodeFragment::from_entries(
            (0..n)
                .map(|i| NodeEntry {
                    id: format!("{prefix}{i}"),
                    name: String::new(),
                    aliases: vec![],
                })
                .collect(),
        )
        .unwrap()
    }

    fn table(m: usize, d: usize, g: usize) -> (NodeTable, NodeFeatures) {
        let nodes = NodeTable::new(fragment("m", m), fragment("d", d), fragment("g", g));
        let features = NodeFeatures {
            mirna: vec![MirnaSequences::default(); m],
            disease: Tensor::zeros(d, 2),
            pcg: Tensor::zeros(g, 2),
            text_half_width: 1,
        };
        (nodes, features)
    }

    #[test]
    fn association_gets_reverse_twin() {
        let (nodes, features) = table(1, 1, 1);
        let edges = InputEdges::new().with(InputEdgeKind::MirnaPcg, vec![(0, 0)]);
        let g = build_graph(nodes, features, &edges, GraphOptions::default()).unwrap();
        let fwd = InputEdgeKind::MirnaPcg.forward();
        let rev = InputEdgeKind::MirnaPcg.reverse();
        assert_eq!(g.relation(&fwd).unwrap().edge_count(), 1);
        assert_eq!(g.relation(&rev).unwrap().edge_count(), 1);
        assert_eq!(rev.key(), "PCG:rev_association:miRNA");
        // 2 association edges plus 3 self-loops
        assert_eq!(g.edge_count(), 5);
    }

    #[test]
    fn isolated_nodes_get_only_self_loops() {
        let (nodes, features) = table(1, 1, 1);
        let g = build_graph(nodes, features, &InputEdges::new(), GraphOptions::default()).unwrap();
        assert_eq!(g.edge_count(), 3);
        let selfm = MetaRelation::new(NodeType::Mirna, EdgeKind::SelfLoop, NodeType::Mirna);
        assert_eq!(g.neighbors(0, &selfm).unwrap(), &[0]);
    }

    #[test]
    fn mda_relation_absent_unless_requested() {
        let (nodes, features) = table(2, 2, 1);
        let edges = InputEdges::new().with(InputEdgeKind::MirnaDisease, vec![(0, 1)]);
        let g = build_graph(nodes, features, &edges, GraphOptions::default()).unwrap();
        assert!(g.meta_relations().iter().all(|r| !r.is_mda()));
        let with = g.derive(
            GraphOptions {
                include_mda: true,
                ..GraphOptions::default()
            },
            Some(&[(0, 1)]),
        );
        let with = with.unwrap();
        assert_eq!(
            with.meta_relations().iter().filter(|r| r.is_mda()).count(),
            2
        );
    }

    #[test]
    fn neighbors_sorted_and_unknown_relation_errors() {
        let (nodes, features) = table(3, 1, 1);
        let edges = InputEdges::new().with(InputEdgeKind::Family, vec![(2, 0), (1, 0), (1, 0)]);
        let g = build_graph(nodes, features, &edges, GraphOptions::default()).unwrap();
        let fam = InputEdgeKind::Family.forward();
        assert_eq!(g.neighbors(0, &fam).unwrap(), &[1, 2]);
        assert_eq!(g.neighbors(1, &fam).unwrap(), &[0]);
        let mda = MetaRelation::new(NodeType::Mirna, EdgeKind::Association, NodeType::Disease);
        assert!(matches!(
            g.neighbors(0, &mda),
            Err(Error::UnknownRelation(_))
        ));
    }

    #[test]
    fn out_of_range_edge_rejected() {
        let (nodes, features) = table(1, 1, 1);
        let edges = InputEdges::new().with(InputEdgeKind::PcgDisease, vec![(0, 4)]);
        assert!(build_graph(nodes, features, &edges, GraphOptions::default()).is_err());
    }

    #[test]
    fn family_self_pairs_excluded() {
        let (nodes, features) = table(2, 1, 1);
        let edges = InputEdges::new().with(InputEdgeKind::Family, vec![(0, 0), (0, 1)]);
        let g = build_graph(nodes, features, &edges, GraphOptions::default()).unwrap();
        assert_eq!(
            g.relation(&InputEdgeKind::Family.forward())
                .unwrap()
                .edge_count(),
            2
        );
    }
}
