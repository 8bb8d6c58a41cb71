//! Typed node tables, identifier resolution and the immutable
//! heterogeneous graph.

mod bundle;
mod dataset;
mod features;
mod graph;
mod nodes;
mod relation;
pub(crate) mod tsv;

pub use bundle::BUNDLE_VERSION;
pub use dataset::{edges_path, load_dataset, nodes_path, Dataset, LoadReport, EDGE_HEADER};
pub use features::{
    hashed_pair_embedding, hashed_text_embedding, normalize_rna, MirnaSequences, NodeFeatures,
    SequenceLengths, DEFAULT_TEXT_HALF_WIDTH,
};
pub use graph::{
    build_graph, resolve_edges, HeteroGraph, InputEdgeKind, InputEdges, RelationAdjacency,
    ResolvedEdges,
};
pub use nodes::{load_nodes, NodeEntry, NodeFragment, NodeTable, NodeType};
pub use relation::{registry, EdgeKind, GraphOptions, MetaRelation, ALL_RELATIONS};
