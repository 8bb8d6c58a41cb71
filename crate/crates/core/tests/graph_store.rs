use std::collections::BTreeSet;

use hetlink_core::graph_store::{
    build_graph, load_dataset, EdgeKind, GraphOptions, HeteroGraph, NodeType, ALL_RELATIONS,
};
use hetlink_core::synthetic::{random_graph, write_dataset, SyntheticSpec};
use proptest::prelude::*;

fn spec(m: usize, d: usize, g: usize, p: f64) -> SyntheticSpec {
    SyntheticSpec {
        mirna: m,
        disease: d,
        pcg: g,
        edge_prob: p,
        ..SyntheticSpec::default()
    }
}

fn edge_set(graph: &HeteroGraph, key: &str) -> BTreeSet<(usize, usize)> {
    let rel = graph
        .meta_relations()
        .into_iter()
        .find(|r| r.key() == key)
        .unwrap();
    graph.relation(&rel).unwrap().edges().collect()
}

#[test]
fn dataset_build_is_deterministic_and_roundtrips() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path(), &spec(10, 8, 5, 0.3), 30, 11).unwrap();
    let build = || {
        let ds = load_dataset(tmp.path(), 4).unwrap();
        build_graph(ds.nodes, ds.features, &ds.edges, GraphOptions::default()).unwrap()
    };
    let a = build();
    let b = build();
    assert_eq!(a, b);
    let bytes = a.to_bytes().unwrap();
    assert_eq!(bytes, b.to_bytes().unwrap());

    let path = tmp.path().join("g.bin");
    a.save(&path).unwrap();
    let loaded = HeteroGraph::load(&path).unwrap();
    assert_eq!(loaded, a);
    assert_eq!(loaded.to_bytes().unwrap(), bytes);
    assert_eq!(loaded.nodes().fingerprint(), a.nodes().fingerprint());
}

#[test]
fn corrupted_bundles_are_rejected() {
    let g = random_graph(&spec(5, 4, 3, 0.4), GraphOptions::default(), 2).unwrap();
    let bytes = g.to_bytes().unwrap();
    assert!(HeteroGraph::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    assert!(HeteroGraph::from_bytes(&bad).is_err());
    assert!(HeteroGraph::from_bytes(&[]).is_err());
}

#[test]
fn derived_views_follow_options() {
    let base = random_graph(&spec(6, 5, 4, 0.4), GraphOptions::default(), 9).unwrap();
    let mda = vec![(0, 1), (2, 3), (5, 0)];
    let with_mda = base
        .derive(
            GraphOptions {
                include_mda: true,
                ..GraphOptions::default()
            },
            Some(&mda),
        )
        .unwrap();
    assert_eq!(
        edge_set(&with_mda, "miRNA:association:disease"),
        mda.iter().copied().collect()
    );
    assert_eq!(
        edge_set(&with_mda, "disease:rev_association:miRNA"),
        mda.iter().map(|&(m, d)| (d, m)).collect()
    );
    let bare = base
        .derive(
            GraphOptions {
                use_intra_edges: false,
                use_pcg: false,
                include_mda: false,
            },
            None,
        )
        .unwrap();
    for rel in bare.meta_relations() {
        assert!(rel.is_self_loop(), "{rel}");
    }
    // Widening a narrowed graph is refused.
    assert!(bare.derive(GraphOptions::default(), None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjacency_invariants(
        m in 1usize..8, d in 1usize..8, g in 1usize..6,
        p in 0.0f64..0.8, seed in any::<u64>(), mda in any::<bool>(),
    ) {
        let options = GraphOptions { include_mda: mda, ..GraphOptions::default() };
        let graph = random_graph(&spec(m, d, g, p), options, seed).unwrap();
        for adj in graph.relations() {
            let rel = adj.relation;
            prop_assert_eq!(adj.target_count(), graph.count(rel.target));
            for t in 0..adj.target_count() {
                let run = adj.incoming(t);
                prop_assert!(run.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(run.iter().all(|&s| s < graph.count(rel.source)));
            }
            let edges: BTreeSet<_> = adj.edges().collect();
            match rel.kind {
                EdgeKind::SelfLoop => {
                    let diag: BTreeSet<_> = (0..graph.count(rel.target)).map(|i| (i, i)).collect();
                    prop_assert_eq!(&edges, &diag);
                }
                k if k.is_intra_class() => {
                    prop_assert!(edges.iter().all(|&(a, b)| a != b && edges.contains(&(b, a))));
                }
                EdgeKind::Association => {
                    let twin = ALL_RELATIONS
                        .iter()
                        .find(|r| r.kind == EdgeKind::RevAssociation
                            && r.source == rel.target && r.target == rel.source)
                        .unwrap();
                    let rev: BTreeSet<_> = graph.relation(twin).unwrap().edges().map(|(a, b)| (b, a)).collect();
                    prop_assert_eq!(&edges, &rev);
                }
                _ => {}
            }
        }
        prop_assert_eq!(graph.has_relation(&ALL_RELATIONS[10]), mda);
    }

    #[test]
    fn relabeling_preserves_structure(
        seed in any::<u64>(), shift in 1usize..6, axis in 0usize..3,
    ) {
        let graph = random_graph(&spec(6, 6, 6, 0.4), GraphOptions::default(), seed).unwrap();
        let t = NodeType::ALL[axis];
        let n = graph.count(t);
        let order: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let permuted = graph.permuted(t, &order).unwrap();
        prop_assert_eq!(permuted.edge_count(), graph.edge_count());
        for (new, &old) in order.iter().enumerate() {
            prop_assert_eq!(permuted.nodes().id(t, new), graph.nodes().id(t, old));
            prop_assert_eq!(permuted.in_degree(t, new), graph.in_degree(t, old));
        }
        let mut inverse = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        let back = permuted.permuted(t, &inverse).unwrap();
        prop_assert_eq!(back, graph);
    }
}
