use std::collections::{BTreeMap, BTreeSet};

use hetlink_core::explain::{explain_pair, ExplanationSubgraph};
use hetlink_core::graph_store::{
    build_graph, GraphOptions, HeteroGraph, InputEdgeKind, InputEdges, MetaRelation, NodeType,
};
use hetlink_core::model::{Model, ModelConfig};
use hetlink_core::numerics::rng::seeded;
use hetlink_core::synthetic::{
    node_table, random_features, random_graph, toy_graph, SyntheticSpec,
};

fn config(layers: usize, graph: GraphOptions) -> ModelConfig {
    ModelConfig {
        dim: 4,
        heads: 2,
        layers,
        kernel: 2,
        graph,
        seed: 2,
        ..ModelConfig::default()
    }
}

/// Reachability by `depth` rounds of relaxing every edge of the graph.
fn bfs_oracle(
    graph: &HeteroGraph,
    seeds: &[(NodeType, usize)],
    depth: usize,
) -> BTreeSet<(NodeType, usize)> {
    let mut reached: BTreeSet<_> = seeds.iter().copied().collect();
    for _ in 0..depth {
        let mut next = reached.clone();
        for adj in graph.relations() {
            for (s, t) in adj.edges() {
                if reached.contains(&(adj.relation.target, t)) {
                    next.insert((adj.relation.source, s));
                }
            }
        }
        reached = next;
    }
    reached
}

fn node_set(x: &ExplanationSubgraph) -> BTreeSet<(NodeType, usize)> {
    x.nodes.iter().map(|n| (n.node_type, n.ordinal)).collect()
}

#[test]
fn node_set_matches_bfs_and_score_matches_prediction() {
    let full = GraphOptions {
        include_mda: true,
        ..GraphOptions::default()
    };
    for layers in 0..=2 {
        let g = toy_graph(full, 2, 9).unwrap();
        let model = Model::new(config(layers, full), &g).unwrap();
        let emb = model.embed(&model.input(&g).unwrap()).unwrap();
        for m in 0..3 {
            for d in 0..3 {
                let x = explain_pair(&model, &g, &format!("m{m}"), &format!("d{d}")).unwrap();
                let expect =
                    bfs_oracle(&g, &[(NodeType::Mirna, m), (NodeType::Disease, d)], layers);
                assert_eq!(node_set(&x), expect, "L={layers} pair ({m},{d})");
                assert_eq!(x.score, model.score_pairs(&emb, &[(m, d)]).unwrap()[0]);
            }
        }
    }
}

#[test]
fn bfs_matches_on_random_graphs() {
    let spec = SyntheticSpec {
        edge_prob: 0.15,
        ..SyntheticSpec::default()
    };
    for seed in 0..10 {
        let g = random_graph(&spec, GraphOptions::default(), seed).unwrap();
        let model = Model::new(config(2, GraphOptions::default()), &g).unwrap();
        let x = explain_pair(&model, &g, "m1", "d2").unwrap();
        let expect = bfs_oracle(&g, &[(NodeType::Mirna, 1), (NodeType::Disease, 2)], 2);
        assert_eq!(node_set(&x), expect, "seed {seed}");
    }
}

#[test]
fn attention_matches_the_forward_cache_and_sums_to_one() {
    let g = toy_graph(GraphOptions::default(), 2, 4).unwrap();
    let model = Model::new(config(2, GraphOptions::default()), &g).unwrap();
    let emb = model.embed(&model.input(&g).unwrap()).unwrap();
    let x = explain_pair(&model, &g, "m0", "d1").unwrap();
    assert!(!x.edges.is_empty());
    let mut sums: BTreeMap<(usize, String, usize), Vec<f64>> = BTreeMap::new();
    for e in &x.edges {
        let rel = MetaRelation::parse_key(&e.relation).unwrap();
        let r = emb
            .attention
            .relations
            .iter()
            .position(|q| *q == rel)
            .unwrap();
        let adj = g.relation(&rel).unwrap();
        let idx = adj
            .edge_range(e.target)
            .find(|&i| adj.sources()[i] == e.source)
            .unwrap();
        for (h, &a) in e.attention.iter().enumerate() {
            assert_eq!(a, emb.attention.head(e.layer - 1, r, h)[idx]);
        }
        let s = sums
            .entry((e.layer, e.relation.clone(), e.target))
            .or_insert_with(|| vec![0.0; e.attention.len()]);
        for (acc, a) in s.iter_mut().zip(&e.attention) {
            *acc += a;
        }
    }
    for v in sums.values().flatten() {
        assert!((v - 1.0).abs() < 1e-9);
    }
}

fn isolated_graph() -> HeteroGraph {
    let spec = SyntheticSpec {
        mirna: 2,
        disease: 2,
        pcg: 2,
        text_half_width: 2,
        stem_loop_len: 5,
        mature_len: 3,
        ..SyntheticSpec::default()
    };
    let features = random_features(&spec, &mut seeded(1));
    let edges = InputEdges::new()
        .with(InputEdgeKind::Family, vec![])
        .with(InputEdgeKind::MirnaPcg, vec![(1, 1)])
        .with(InputEdgeKind::PcgDisease, vec![(1, 1)]);
    build_graph(
        node_table([2, 2, 2]),
        features,
        &edges,
        GraphOptions::default(),
    )
    .unwrap()
}

#[test]
fn isolated_pair_has_two_self_loops() {
    let g = isolated_graph();
    let model = Model::new(config(1, GraphOptions::default()), &g).unwrap();
    let x = explain_pair(&model, &g, "m0", "d0").unwrap();
    assert_eq!(x.nodes.len(), 2);
    assert_eq!(x.edges.len(), 2);
    for e in &x.edges {
        assert!(MetaRelation::parse_key(&e.relation).unwrap().is_self_loop());
        assert_eq!(e.source, e.target);
        assert!(e.attention.iter().all(|&a| a == 1.0));
    }
    let dot = x.to_dot().unwrap();
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("[label=").count(), 4);
}

#[test]
fn json_roundtrip_and_dot_attention_sums() {
    let g = toy_graph(GraphOptions::default(), 2, 6).unwrap();
    let model = Model::new(config(2, GraphOptions::default()), &g).unwrap();
    let x = explain_pair(&model, &g, "m2", "d0").unwrap();
    assert_eq!(
        ExplanationSubgraph::from_json(&x.to_json().unwrap()).unwrap(),
        x
    );

    // Parse `a -> b [label="kind Ll value", ...]` lines back and regroup.
    let mut sums: BTreeMap<(String, String, String), f64> = BTreeMap::new();
    for line in x.to_dot().unwrap().lines().filter(|l| l.contains("->")) {
        let (lhs, rest) = line.split_once(" [label=\"").unwrap();
        let target = lhs.split("->").nth(1).unwrap().trim().to_string();
        let label = rest.split('"').next().unwrap();
        let parts: Vec<&str> = label.split(' ').collect();
        let source_type = lhs.trim().split('_').next().unwrap().to_string();
        *sums
            .entry((
                target,
                format!("{source_type}:{}", parts[0]),
                parts[1].to_string(),
            ))
            .or_default() += parts[2].parse::<f64>().unwrap();
    }
    assert!(!sums.is_empty());
    for v in sums.values() {
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }
}
