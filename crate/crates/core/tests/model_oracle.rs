//! The model's forward pass against plain-loop reimplementations that read
//! parameters by name and enumerate every (source, target) pair densely.

use std::collections::BTreeSet;

use hetlink_core::graph_store::{GraphOptions, HeteroGraph, NodeType};
use hetlink_core::model::{Model, ModelConfig};
use hetlink_core::numerics::Tensor;
use hetlink_core::synthetic::toy_graph;

type Mat = Vec<Vec<f64>>;

fn mat(t: &Tensor) -> Mat {
    (0..t.rows()).map(|r| t.row_slice(r).to_vec()).collect()
}

fn param(model: &Model, name: &str) -> Mat {
    mat(model
        .params()
        .by_name(name)
        .unwrap_or_else(|| panic!("no param {name}")))
}

fn scalar(model: &Model, name: &str) -> f64 {
    param(model, name)[0][0]
}

fn affine(x: &[f64], w: &Mat, b: &[f64]) -> Vec<f64> {
    (0..b.len())
        .map(|j| {
            b[j] + x
                .iter()
                .enumerate()
                .map(|(i, xi)| xi * w[i][j])
                .sum::<f64>()
        })
        .collect()
}

fn gelu(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn one_hot_block(seq: &str, len: usize) -> Vec<[f64; 4]> {
    let mut rows = vec![[0.25; 4]; len];
    for (i, c) in seq.chars().enumerate() {
        let mut r = [0.0; 4];
        r["AUCG".find(c).unwrap()] = 1.0;
        rows[i] = r;
    }
    rows
}

fn encoder_oracle(model: &Model, graph: &HeteroGraph) -> [Mat; 3] {
    let lens = model.shapes().sequence_lengths;
    let kernel = param(model, "enc.conv.kernel");
    let kb = scalar(model, "enc.conv.bias");
    let k = kernel.len();
    let mut out: [Mat; 3] = Default::default();
    out[0] = graph
        .features()
        .mirna
        .iter()
        .map(|s| {
            let mut rows = one_hot_block(&s.stem_loop, lens.stem_loop);
            rows.extend(one_hot_block(&s.mature_1, lens.mature_1));
            rows.extend(one_hot_block(&s.mature_2, lens.mature_2));
            let conv: Vec<f64> = (0..=rows.len() - k)
                .map(|i| {
                    let mut acc = kb;
                    for a in 0..k {
                        for b in 0..4 {
                            acc += rows[i + a][b] * kernel[a][b];
                        }
                    }
                    acc
                })
                .collect();
            affine(
                &conv,
                &param(model, "enc.mirna.w"),
                &param(model, "enc.mirna.b")[0],
            )
        })
        .collect();
    for t in [NodeType::Disease, NodeType::Pcg] {
        let x = mat(graph.features().text(t).unwrap());
        let stem = t.file_stem();
        let (w, b) = (
            param(model, &format!("enc.{stem}.w")),
            param(model, &format!("enc.{stem}.b")),
        );
        out[t.index()] = x.iter().map(|row| affine(row, &w, &b[0])).collect();
    }
    out
}

/// One layer by direct enumeration: for every target, every relation and
/// every candidate source, test membership in the relation's edge set.
fn layer_oracle(model: &Model, graph: &HeteroGraph, l: usize, prev: &[Mat; 3]) -> [Mat; 3] {
    let cfg = model.config();
    let (h, dim) = (cfg.heads, cfg.dim);
    let d = dim / h;
    let lin = |t: NodeType, which: &str, x: &[f64]| {
        let p = format!("hgt.{l}.{}.{which}", t.file_stem());
        affine(
            x,
            &param(model, &format!("{p}.w")),
            &param(model, &format!("{p}.b"))[0],
        )
    };
    let mut out: [Mat; 3] = Default::default();
    for t in NodeType::ALL {
        let n_t = graph.count(t);
        let mut agg = vec![vec![0.0; dim]; n_t];
        let mut touched = vec![false; n_t];
        for adj in graph.relations().iter().filter(|a| a.relation.target == t) {
            let rel = adj.relation;
            let edges: BTreeSet<(usize, usize)> = adj.edges().collect();
            for tgt in 0..n_t {
                let q = lin(t, "q", &prev[t.index()][tgt]);
                let sources: Vec<usize> = (0..graph.count(rel.source))
                    .filter(|s| edges.contains(&(*s, tgt)))
                    .collect();
                if sources.is_empty() {
                    continue;
                }
                touched[tgt] = true;
                for i in 0..h {
                    let p = format!("hgt.{l}.{}", rel.key());
                    let w_att = param(model, &format!("{p}.att.{i}"));
                    let w_msg = param(model, &format!("{p}.msg.{i}"));
                    let mu = scalar(model, &format!("{p}.mu.{i}"));
                    let qi = &q[i * d..(i + 1) * d];
                    let mut raw = Vec::new();
                    let mut msgs = Vec::new();
                    for &s in &sources {
                        let x = &prev[rel.source.index()][s];
                        let k = lin(rel.source, "k", x);
                        let m = lin(rel.source, "m", x);
                        let (ki, mi) = (&k[i * d..(i + 1) * d], &m[i * d..(i + 1) * d]);
                        let mut score = 0.0;
                        for a in 0..d {
                            for b in 0..d {
                                score += ki[a] * w_att[a][b] * qi[b];
                            }
                        }
                        raw.push(score * mu / (d as f64).sqrt());
                        msgs.push(
                            (0..d)
                                .map(|b| (0..d).map(|a| mi[a] * w_msg[a][b]).sum::<f64>())
                                .collect::<Vec<_>>(),
                        );
                    }
                    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = raw.iter().map(|r| (r - max).exp()).sum();
                    for (r, msg) in raw.iter().zip(&msgs) {
                        let att = (r - max).exp() / z;
                        for b in 0..d {
                            agg[tgt][i * d + b] += att * msg[b];
                        }
                    }
                }
            }
        }
        let g = sigmoid(scalar(model, &format!("hgt.{l}.{}.alpha", t.file_stem())));
        out[t.index()] = (0..n_t)
            .map(|tgt| {
                let x_prev = &prev[t.index()][tgt];
                if !touched[tgt] {
                    return x_prev.clone();
                }
                let act: Vec<f64> = agg[tgt].iter().map(|&v| gelu(v)).collect();
                let a = lin(t, "a", &act);
                (0..dim).map(|j| g * a[j] + (1.0 - g) * x_prev[j]).collect()
            })
            .collect();
    }
    out
}

fn predictor_oracle(model: &Model, hm: &[f64], hd: &[f64]) -> f64 {
    let x: Vec<f64> = hm.iter().chain(hd).copied().collect();
    let z = affine(
        &x,
        &param(model, "pred.p1.w"),
        &param(model, "pred.p1.b")[0],
    );
    let y = affine(
        &z,
        &param(model, "pred.p2.w"),
        &param(model, "pred.p2.b")[0],
    );
    sigmoid(y[0])
}

fn perturb_scalars(model: &mut Model, seed: u64) {
    // Move μ and α away from their initial values so the oracle exercises them.
    let ids: Vec<_> = model
        .params()
        .iter()
        .filter(|(_, n, _)| n.contains(".mu.") || n.ends_with(".alpha"))
        .map(|(id, _, _)| id)
        .collect();
    for (k, id) in ids.into_iter().enumerate() {
        let v = 0.3 + ((seed as usize + 7 * k) % 11) as f64 * 0.17;
        model.params_mut().get_mut(id).data_mut()[0] = v;
    }
}

fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}");
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{what}: {x} vs {y}");
    }
}

#[test]
fn forward_matches_dense_enumeration() {
    for (seed, include_mda) in [(1u64, false), (2, true), (3, true)] {
        let options = GraphOptions {
            include_mda,
            ..GraphOptions::default()
        };
        let graph = toy_graph(options, 3, seed).unwrap();
        let config = ModelConfig {
            dim: 6,
            layers: 2,
            heads: 3,
            kernel: 3,
            graph: options,
            seed,
            ..ModelConfig::default()
        };
        let mut model = Model::new(config, &graph).unwrap();
        perturb_scalars(&mut model, seed);
        let emb = model.embed(&model.input(&graph).unwrap()).unwrap();

        let mut expected = encoder_oracle(&model, &graph);
        for t in NodeType::ALL {
            let got = emb.hidden[0][t.index()].as_ref().unwrap();
            assert_close(got.data(), &expected[t.index()].concat(), 1e-12, "encoder");
        }
        for l in 0..2 {
            expected = layer_oracle(&model, &graph, l, &expected);
            for t in NodeType::ALL {
                let got = emb.hidden[l + 1][t.index()].as_ref().unwrap();
                assert_close(got.data(), &expected[t.index()].concat(), 1e-12, "layer");
            }
        }
        let pairs: Vec<(usize, usize)> = (0..3).flat_map(|m| (0..3).map(move |d| (m, d))).collect();
        let scores = model.score_pairs(&emb, &pairs).unwrap();
        for (&(m, d), s) in pairs.iter().zip(scores) {
            let want = predictor_oracle(&model, &expected[0][m], &expected[1][d]);
            assert!((s - want).abs() < 1e-12);
        }
    }
}

#[test]
fn encoder_matches_hand_values() {
    // Two-dimensional encoder, kernel height 2, fixed weights: every
    // number below is worked out by hand.
    let graph = toy_graph(GraphOptions::default(), 1, 0).unwrap();
    let config = ModelConfig {
        dim: 2,
        layers: 0,
        heads: 1,
        kernel: 2,
        ..ModelConfig::default()
    };
    let mut model = Model::new(config, &graph).unwrap();
    let lens = model.shapes().sequence_lengths;
    let conv_width = lens.total() - 1;
    let set = |model: &mut Model, name: &str, t: Tensor| {
        let id = model.params().id(name).unwrap();
        *model.params_mut().get_mut(id) = t;
    };
    // Kernel sums channel A over both rows: conv[i] = #A in rows i, i+1
    // (placeholders contribute 0.25 each), plus bias 1.
    set(
        &mut model,
        "enc.conv.kernel",
        Tensor::from_rows(&[vec![1.0, 0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]]).unwrap(),
    );
    set(&mut model, "enc.conv.bias", Tensor::scalar(1.0));
    // ME-linear: first output sums the conv, second takes its first entry.
    let mut w = Tensor::zeros(conv_width, 2);
    for i in 0..conv_width {
        w.set(i, 0, 1.0);
    }
    w.set(0, 1, 1.0);
    set(&mut model, "enc.mirna.w", w);
    set(&mut model, "enc.mirna.b", Tensor::row(vec![0.0, -1.0]));
    // DE-linear: [x0 + x1, 2·x1] with bias [0.5, 0].
    set(
        &mut model,
        "enc.disease.w",
        Tensor::from_rows(&[vec![1.0, 0.0], vec![1.0, 2.0]]).unwrap(),
    );
    set(&mut model, "enc.disease.b", Tensor::row(vec![0.5, 0.0]));
    let emb = model.embed(&model.input(&graph).unwrap()).unwrap();

    let seqs = &graph.features().mirna[0];
    let block: String = [
        format!("{:N<w$}", seqs.stem_loop, w = lens.stem_loop),
        format!("{:N<w$}", seqs.mature_1, w = lens.mature_1),
        format!("{:N<w$}", seqs.mature_2, w = lens.mature_2),
    ]
    .concat();
    let a_weight = |c: char| match c {
        'A' => 1.0,
        'N' => 0.25,
        _ => 0.0,
    };
    let chars: Vec<char> = block.chars().collect();
    let conv: Vec<f64> = chars
        .windows(2)
        .map(|w| 1.0 + a_weight(w[0]) + a_weight(w[1]))
        .collect();
    let h_m = emb.output(NodeType::Mirna).unwrap();
    assert!((h_m.get(0, 0) - conv.iter().sum::<f64>()).abs() < 1e-12);
    assert!((h_m.get(0, 1) - (conv[0] - 1.0)).abs() < 1e-12);

    let x = graph.features().disease.row_slice(2);
    let h_d = emb.output(NodeType::Disease).unwrap();
    assert!((h_d.get(2, 0) - (x[0] + x[1] + 0.5)).abs() < 1e-12);
    assert!((h_d.get(2, 1) - 2.0 * x[1]).abs() < 1e-12);
}

#[test]
fn predictor_matches_scalar_arithmetic() {
    let graph = toy_graph(GraphOptions::default(), 1, 0).unwrap();
    let config = ModelConfig {
        dim: 1,
        layers: 0,
        heads: 1,
        kernel: 2,
        ..ModelConfig::default()
    };
    let mut model = Model::new(config, &graph).unwrap();
    let set = |model: &mut Model, name: &str, t: Tensor| {
        let id = model.params().id(name).unwrap();
        *model.params_mut().get_mut(id) = t;
    };
    set(&mut model, "pred.p1.w", Tensor::column(vec![2.0, -1.0]));
    set(&mut model, "pred.p1.b", Tensor::scalar(0.5));
    set(&mut model, "pred.p2.w", Tensor::scalar(3.0));
    set(&mut model, "pred.p2.b", Tensor::scalar(-1.0));
    let emb = model.embed(&model.input(&graph).unwrap()).unwrap();
    let hm = emb.output(NodeType::Mirna).unwrap().get(1, 0);
    let hd = emb.output(NodeType::Disease).unwrap().get(0, 0);
    let z = 2.0 * hm - hd + 0.5;
    let y = 3.0 * z - 1.0;
    let want = 1.0 / (1.0 + (-y).exp());
    let got = model.score_pairs(&emb, &[(1, 0)]).unwrap()[0];
    assert!((got - want).abs() < 1e-14, "{got} vs {want}");
}

#[test]
fn doubling_mu_doubles_log_attention_ratios() {
    let graph = toy_graph(GraphOptions::default(), 2, 4).unwrap();
    let config = ModelConfig {
        dim: 4,
        layers: 1,
        heads: 2,
        kernel: 2,
        seed: 9,
        ..ModelConfig::default()
    };
    let mut model = Model::new(config, &graph).unwrap();
    // miRNA 1 has two family neighbors (0 and 2).
    let r = graph
        .relations()
        .iter()
        .position(|a| a.relation.key() == "miRNA:family:miRNA")
        .unwrap();
    let adj = &graph.relations()[r];
    let range = adj.edge_range(1);
    assert_eq!(range.len(), 2);
    let ratio = |m: &Model| {
        let emb = m.embed(&m.input(&graph).unwrap()).unwrap();
        let a = emb.attention.head(0, r, 0);
        (a[range.start] / a[range.start + 1]).ln()
    };
    let before = ratio(&model);
    let id = model.mu_id(0, r, 0);
    model.params_mut().get_mut(id).data_mut()[0] = 2.0;
    let after = ratio(&model);
    assert!((after - 2.0 * before).abs() < 1e-12, "{before} {after}");
}

#[test]
fn gate_boundaries() {
    let graph = toy_graph(GraphOptions::default(), 2, 4).unwrap();
    let config = ModelConfig {
        dim: 4,
        layers: 1,
        heads: 1,
        kernel: 2,
        seed: 2,
        ..ModelConfig::default()
    };
    let mut model = Model::new(config, &graph).unwrap();
    let alphas: Vec<_> = model
        .params()
        .iter()
        .filter(|(_, n, _)| n.ends_with(".alpha"))
        .map(|(id, _, _)| id)
        .collect();
    for &id in &alphas {
        model.params_mut().get_mut(id).data_mut()[0] = -1e4;
    }
    let emb = model.embed(&model.input(&graph).unwrap()).unwrap();
    for t in NodeType::ALL {
        assert_eq!(emb.hidden[1][t.index()], emb.hidden[0][t.index()]);
    }
}
