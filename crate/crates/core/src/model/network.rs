//! Encoder, stacked HGT layers and the pair predictor, recorded on a tape.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::encoder::EncoderInputs;
use crate::error::{Error, Result};
use crate::graph_store::{registry, HeteroGraph, MetaRelation, NodeType, SequenceLengths};
use crate::numerics::rng::{glorot_uniform, seeded, SeededRng};
use crate::numerics::{bce_terms, Gradients, ParamId, ParamStore, Tape, Tensor, Var};

/// Input-dependent sizes frozen into a model at construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShapes {
    pub counts: [usize; 3],
    pub sequence_lengths: SequenceLengths,
    pub text_half_width: usize,
}

impl InputShapes {
    pub fn of(graph: &HeteroGraph) -> Self {
        Self {
            counts: graph.nodes().counts(),
            sequence_lengths: graph.features().sequence_lengths(),
            text_half_width: graph.text_half_width(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Linear {
    w: ParamId,
    b: ParamId,
}

#[derive(Clone, Debug)]
struct TypeParams {
    q: Linear,
    k: Linear,
    m: Linear,
    a: Linear,
    alpha: ParamId,
}

#[derive(Clone, Debug)]
struct RelationParams {
    att: Vec<ParamId>,
    msg: Vec<ParamId>,
    mu: Vec<ParamId>,
}

#[derive(Clone, Debug)]
struct LayerParams {
    types: [Option<TypeParams>; 3],
    relations: Vec<RelationParams>,
}

#[derive(Clone, Debug)]
struct Layout {
    conv_kernel: ParamId,
    conv_bias: ParamId,
    encoders: [Option<Linear>; 3],
    layers: Vec<LayerParams>,
    p1: Linear,
    p2: Linear,
}

/// Builds the parameter set in a fixed order. With `rng` weights are
/// Glorot-uniform; without, they are zero (shapes only).
struct Builder<'a> {
    store: ParamStore,
    rng: Option<&'a mut SeededRng>,
}

impl Builder<'_> {
    fn weight(&mut self, name: String, fan_in: usize, fan_out: usize) -> Result<ParamId> {
        let value = match self.rng.as_deref_mut() {
            Some(rng) => glorot_uniform(rng, fan_in, fan_out),
            None => Tensor::zeros(fan_in, fan_out),
        };
        self.store.insert(name, value)
    }

    fn constant(&mut self, name: String, rows: usize, cols: usize, value: f64) -> Result<ParamId> {
        self.store.insert(name, Tensor::filled(rows, cols, value))
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> Result<Linear> {
        Ok(Linear {
            w: self.weight(format!("{prefix}.w"), fan_in, fan_out)?,
            b: self.constant(format!("{prefix}.b"), 1, fan_out, 0.0)?,
        })
    }
}

/// Per-edge attention recorded during a forward pass, indexed
/// `[layer][relation][head][edge]` with edges in CSR order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionCache {
    pub relations: Vec<MetaRelation>,
    pub values: Vec<Vec<Vec<Vec<f64>>>>,
}

impl AttentionCache {
    pub fn layers(&self) -> usize {
        self.values.len()
    }

    pub fn head(&self, layer: usize, relation: usize, head: usize) -> &[f64] {
        &self.values[layer][relation][head]
    }

    /// Attention on `edge` averaged over heads.
    pub fn head_mean(&self, layer: usize, relation: usize, edge: usize) -> f64 {
        let heads = &self.values[layer][relation];
        heads.iter().map(|h| h[edge]).sum::<f64>() / heads.len() as f64
    }
}

/// Values of one forward pass with the model's own parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    /// `hidden[l][type]` is `H^(l)`; index 0 is the encoder output.
    pub hidden: Vec<[Option<Tensor>; 3]>,
    pub attention: AttentionCache,
    /// `gates[l - 1][type]` is the residual gate `sigmoid(α)` of layer `l`.
    pub gates: Vec<[Option<f64>; 3]>,
}

impl Embedding {
    pub fn output(&self, t: NodeType) -> Option<&Tensor> {
        self.hidden.last().and_then(|h| h[t.index()].as_ref())
    }
}

/// Tape handles produced by [`Model::forward`].
pub struct ForwardVars {
    pub hidden: Vec<[Option<Var>; 3]>,
    pub attention: Vec<Vec<Vec<Var>>>,
    pub gates: Vec<[Option<Var>; 3]>,
}

/// A graph paired with the encoder inputs the model reads from it.
pub struct ModelInput<'g> {
    pub graph: &'g HeteroGraph,
    pub features: EncoderInputs,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    shapes: InputShapes,
    relations: Vec<MetaRelation>,
    types: Vec<NodeType>,
    params: ParamStore,
    layout: Layout,
}

impl Model {
    /// Freshly initialized model for `graph`, which must have been built
    /// with `config.graph`.
    pub fn new(config: ModelConfig, graph: &HeteroGraph) -> Result<Self> {
        if graph.options() != &config.graph {
            return Err(Error::Config(format!(
                "graph options {:?} differ from model options {:?}",
                graph.options(),
                config.graph
            )));
        }
        let mut rng = seeded(config.seed);
        Self::build(config, InputShapes::of(graph), Some(&mut rng))
    }

    /// Model with parameter values taken from `params`, which must match
    /// the layout implied by `config` and `shapes` name for name.
    pub fn from_params(
        config: ModelConfig,
        shapes: InputShapes,
        params: ParamStore,
    ) -> Result<Self> {
        let mut model = Self::build(config, shapes, None)?;
        if params.len() != model.params.len() {
            return Err(Error::Format(format!(
                "{} parameters supplied, layout has {}",
                params.len(),
                model.params.len()
            )));
        }
        for ((_, want, w), (_, got, g)) in model.params.iter().zip(params.iter()) {
            if want != got || w.shape() != g.shape() {
                return Err(Error::Format(format!(
                    "parameter `{got}` {:?} does not match expected `{want}` {:?}",
                    g.shape(),
                    w.shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("parameter `{got}`")));
            }
        }
        model.params = params;
        Ok(model)
    }

    fn build(
        config: ModelConfig,
        shapes: InputShapes,
        rng: Option<&mut SeededRng>,
    ) -> Result<Self> {
        config.validate()?;
        let relations = registry(&config.graph);
        let types: Vec<NodeType> = NodeType::ALL
            .into_iter()
            .filter(|&t| t != NodeType::Pcg || config.graph.use_pcg)
            .collect();
        let seq_total = shapes.sequence_lengths.total();
        if seq_total < config.kernel {
            return Err(Error::Config(format!(
                "miRNA input length {seq_total} is shorter than kernel height {}",
                config.kernel
            )));
        }
        let conv_width = seq_total - config.kernel + 1;
        let text_width = 2 * shapes.text_half_width;
        let (dim, d) = (config.dim, config.head_dim());

        let mut b = Builder {
            store: ParamStore::new(),
            rng,
        };
        let conv_kernel = match b.rng.as_deref_mut() {
            Some(rng) => {
                let fan = config.kernel * 4;
                let limit = (6.0 / (fan + 1) as f64).sqrt();
                crate::numerics::rng::uniform(rng, config.kernel, 4, -limit, limit)
            }
            None => Tensor::zeros(config.kernel, 4),
        };
        let conv_kernel = b.store.insert("enc.conv.kernel", conv_kernel)?;
        let conv_bias = b.constant("enc.conv.bias".into(), 1, 1, 0.0)?;
        let mut encoders: [Option<Linear>; 3] = Default::default();
        for &t in &types {
            let fan_in = if t == NodeType::Mirna {
                conv_width
            } else {
                text_width
            };
            encoders[t.index()] = Some(b.linear(&format!("enc.{}", t.file_stem()), fan_in, dim)?);
        }

        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let mut type_params: [Option<TypeParams>; 3] = Default::default();
            for &t in &types {
                let p = format!("hgt.{l}.{}", t.file_stem());
                type_params[t.index()] = Some(TypeParams {
                    q: b.linear(&format!("{p}.q"), dim, dim)?,
                    k: b.linear(&format!("{p}.k"), dim, dim)?,
                    m: b.linear(&format!("{p}.m"), dim, dim)?,
                    a: b.linear(&format!("{p}.a"), dim, dim)?,
                    alpha: b.constant(format!("{p}.alpha"), 1, 1, 0.0)?,
                });
            }
            let mut rel_params = Vec::with_capacity(relations.len());
            for rel in &relations {
                let p = format!("hgt.{l}.{}", rel.key());
                let mut rp = RelationParams {
                    att: Vec::new(),
                    msg: Vec::new(),
                    mu: Vec::new(),
                };
                for i in 0..config.heads {
                    rp.att.push(b.weight(format!("{p}.att.{i}"), d, d)?);
                    rp.msg.push(b.weight(format!("{p}.msg.{i}"), d, d)?);
                    rp.mu.push(b.constant(format!("{p}.mu.{i}"), 1, 1, 1.0)?);
                }
                rel_params.push(rp);
            }
            layers.push(LayerParams {
                types: type_params,
                relations: rel_params,
            });
        }
        let p1 = b.linear("pred.p1", 2 * dim, dim)?;
        let p2 = b.linear("pred.p2", dim, 1)?;
        Ok(Self {
            config,
            shapes,
            relations,
            types,
            params: b.store,
            layout: Layout {
                conv_kernel,
                conv_bias,
                encoders,
                layers,
                p1,
                p2,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn shapes(&self) -> &InputShapes {
        &self.shapes
    }

    pub fn relations(&self) -> &[MetaRelation] {
        &self.relations
    }

    /// Node types with encoder and layer parameters.
    pub fn node_types(&self) -> &[NodeType] {
        &self.types
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Parameter id of `μ` for (`layer`, relation index, `head`).
    pub fn mu_id(&self, layer: usize, relation: usize, head: usize) -> ParamId {
        self.layout.layers[layer].relations[relation].mu[head]
    }

    /// Checks that `graph` matches this model and prepares encoder inputs.
    pub fn input<'g>(&self, graph: &'g HeteroGraph) -> Result<ModelInput<'g>> {
        let found = InputShapes::of(graph);
        if found != self.shapes {
            return Err(Error::Shape(format!(
                "graph shapes {found:?} differ from the model's {:?}",
                self.shapes
            )));
        }
        let rels = graph.meta_relations();
        if rels != self.relations {
            return Err(Error::Config(format!(
                "graph has {} relations, model expects {}",
                rels.len(),
                self.relations.len()
            )));
        }
        let real = EncoderInputs::from_graph(graph, &self.shapes.sequence_lengths, &self.types)?;
        let features = if self.config.use_node_features {
            real
        } else {
            EncoderInputs::random_like(&real, self.config.seed)
        };
        Ok(ModelInput { graph, features })
    }

    fn linear(&self, tape: &mut Tape, params: &ParamStore, l: Linear, x: Var) -> Result<Var> {
        let w = tape.param(params, l.w);
        let b = tape.param(params, l.b);
        tape.linear(x, w, b)
    }

    /// Records the encoder and all layers on `tape` using `params`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        input: &ModelInput<'_>,
    ) -> Result<ForwardVars> {
        let lay = &self.layout;
        let mut h0: [Option<Var>; 3] = Default::default();
        for &t in &self.types {
            let x = tape.constant(
                input
                    .features
                    .get(t)
                    .ok_or_else(|| Error::Invalid(format!("no encoder input for {t}")))?
                    .clone(),
            );
            let x = if t == NodeType::Mirna {
                let k = tape.param(params, lay.conv_kernel);
                let b = tape.param(params, lay.conv_bias);
                tape.conv1d(x, k, b)?
            } else {
                x
            };
            let enc = lay.encoders[t.index()].expect("encoder for every active type");
            h0[t.index()] = Some(self.linear(tape, params, enc, x)?);
        }

        let mut out = ForwardVars {
            hidden: vec![h0],
            attention: Vec::with_capacity(self.config.layers),
            gates: Vec::with_capacity(self.config.layers),
        };
        for layer in &lay.layers {
            let prev = *out.hidden.last().expect("encoder output");
            let (next, att, gates) = self.layer(tape, params, layer, &prev, input.graph)?;
            out.hidden.push(next);
            out.attention.push(att);
            out.gates.push(gates);
        }
        Ok(out)
    }

    #[allow(clippy::type_complexity)]
    fn layer(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        layer: &LayerParams,
        prev: &[Option<Var>; 3],
        graph: &HeteroGraph,
    ) -> Result<([Option<Var>; 3], Vec<Vec<Var>>, [Option<Var>; 3])> {
        let (heads, d) = (self.config.heads, self.config.head_dim());
        let mut q: [Vec<Var>; 3] = Default::default();
        let mut k: [Vec<Var>; 3] = Default::default();
        let mut m: [Vec<Var>; 3] = Default::default();
        for &t in &self.types {
            let tp = layer.types[t.index()].as_ref().expect("params per type");
            let h = prev[t.index()].expect("hidden state per type");
            for (dst, lin) in [(&mut q, tp.q), (&mut k, tp.k), (&mut m, tp.m)] {
                let full = self.linear(tape, params, lin, h)?;
                dst[t.index()] = (0..heads)
                    .map(|i| tape.slice_cols(full, i * d, (i + 1) * d))
                    .collect::<Result<_>>()?;
            }
        }

        let inv_sqrt_d = 1.0 / (d as f64).sqrt();
        let mut agg: [Vec<Option<Var>>; 3] = std::array::from_fn(|_| vec![None; heads]);
        let mut has_incoming: [Vec<bool>; 3] =
            std::array::from_fn(|i| vec![false; self.shapes.counts[i]]);
        let mut attention = Vec::with_capacity(self.relations.len());
        for (adj, rp) in graph.relations().iter().zip(&layer.relations) {
            let (s, t) = (adj.relation.source.index(), adj.relation.target.index());
            if adj.edge_count() == 0 {
                let empty = tape.constant(Tensor::zeros(0, 1));
                attention.push(vec![empty; heads]);
                continue;
            }
            for &tgt in adj.targets().iter() {
                has_incoming[t][tgt] = true;
            }
            let (src, tgt) = (adj.sources().clone(), adj.targets().clone());
            let n_t = self.shapes.counts[t];
            let mut per_head = Vec::with_capacity(heads);
            for i in 0..heads {
                let w_att = tape.param(params, rp.att[i]);
                let kw = tape.matmul(k[s][i], w_att)?;
                let ke = tape.gather_rows(kw, src.clone())?;
                let qe = tape.gather_rows(q[t][i], tgt.clone())?;
                let raw = tape.row_dot(ke, qe)?;
                let mu = tape.param(params, rp.mu[i]);
                let raw = tape.scale_by(raw, mu)?;
                let raw = tape.scale(raw, inv_sqrt_d);
                let att = tape.segment_softmax(raw, tgt.clone())?;
                per_head.push(att);

                let w_msg = tape.param(params, rp.msg[i]);
                let mw = tape.matmul(m[s][i], w_msg)?;
                let me = tape.gather_rows(mw, src.clone())?;
                let weighted = tape.mul_column(me, att)?;
                let summed = tape.scatter_add_rows(weighted, tgt.clone(), n_t)?;
                agg[t][i] = Some(match agg[t][i] {
                    Some(acc) => tape.add(acc, summed)?,
                    None => summed,
                });
            }
            attention.push(per_head);
        }

        let mut next: [Option<Var>; 3] = Default::default();
        let mut gates: [Option<Var>; 3] = Default::default();
        for &t in &self.types {
            let ti = t.index();
            let tp = layer.types[ti].as_ref().expect("params per type");
            let h_prev = prev[ti].expect("hidden state per type");
            let alpha = tape.param(params, tp.alpha);
            let g = tape.sigmoid(alpha);
            gates[ti] = Some(g);
            let parts: Option<Vec<Var>> = agg[ti].iter().copied().collect();
            let Some(parts) = parts else {
                next[ti] = Some(h_prev);
                continue;
            };
            let h_tilde = tape.concat_cols(&parts)?;
            let act = tape.gelu(h_tilde);
            let proj = self.linear(tape, params, tp.a, act)?;
            let updated = tape.scale_by(proj, g)?;
            let keep = tape.one_minus(g);
            let kept = tape.scale_by(h_prev, keep)?;
            let blended = tape.add(updated, kept)?;
            next[ti] = Some(if has_incoming[ti].iter().all(|&b| b) {
                blended
            } else {
                tape.select_rows(has_incoming[ti].clone().into(), blended, h_prev)?
            });
        }
        Ok((next, attention, gates))
    }

    /// Records the predictor on `tape`: an `n × 1` column of scores.
    pub fn predict(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        mirna: Var,
        disease: Var,
        pairs: &[(usize, usize)],
    ) -> Result<Var> {
        let [nm, nd, _] = self.shapes.counts;
        if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a >= nm || b >= nd) {
            return Err(Error::Invalid(format!(
                "pair ({a}, {b}) out of range for {nm} miRNAs and {nd} diseases"
            )));
        }
        let mi: Arc<[usize]> = pairs.iter().map(|p| p.0).collect();
        let di: Arc<[usize]> = pairs.iter().map(|p| p.1).collect();
        let hm = tape.gather_rows(mirna, mi)?;
        let hd = tape.gather_rows(disease, di)?;
        let x = tape.concat_cols(&[hm, hd])?;
        let z = self.linear(tape, params, self.layout.p1, x)?;
        let y = self.linear(tape, params, self.layout.p2, z)?;
        Ok(tape.sigmoid(y))
    }

    fn record_scores(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        input: &ModelInput<'_>,
        pairs: &[(usize, usize)],
    ) -> Result<Var> {
        let fwd = self.forward(tape, params, input)?;
        let last = fwd.hidden.last().expect("encoder output");
        self.predict(
            tape,
            params,
            last[NodeType::Mirna.index()].expect("miRNA states"),
            last[NodeType::Disease.index()].expect("disease states"),
            pairs,
        )
    }

    fn record_loss(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        input: &ModelInput<'_>,
        pairs: &[(usize, usize)],
        labels: &[f64],
    ) -> Result<Var> {
        let scores = self.record_scores(tape, params, input, pairs)?;
        tape.bce(scores, labels.into())
    }

    /// Summed BCE over `pairs` with `params` substituted for the model's
    /// own values.
    pub fn loss_with(
        &self,
        params: &ParamStore,
        input: &ModelInput<'_>,
        pairs: &[(usize, usize)],
        labels: &[f64],
    ) -> Result<f64> {
        let mut tape = Tape::new();
        let loss = self.record_loss(&mut tape, params, input, pairs, labels)?;
        tape.value(loss).item()
    }

    /// The per-pair BCE terms behind [`Model::loss_with`].
    pub fn loss_terms_with(
        &self,
        params: &ParamStore,
        input: &ModelInput<'_>,
        pairs: &[(usize, usize)],
        labels: &[f64],
    ) -> Result<Vec<f64>> {
        if pairs.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} pairs with {} labels",
                pairs.len(),
                labels.len()
            )));
        }
        let mut tape = Tape::new();
        let scores = self.record_scores(&mut tape, params, input, pairs)?;
        Ok(bce_terms(tape.value(scores).data(), labels))
    }

    /// Loss and gradients with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        input: &ModelInput<'_>,
        pairs: &[(usize, usize)],
        labels: &[f64],
    ) -> Result<(f64, Gradients)> {
        let mut tape = Tape::new();
        let loss = self.record_loss(&mut tape, &self.params, input, pairs, labels)?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("training loss {value}")));
        }
        Ok((value, tape.backward(loss, &self.params)?))
    }

    /// Full forward pass with the model's parameters.
    pub fn embed(&self, input: &ModelInput<'_>) -> Result<Embedding> {
        let mut tape = Tape::new();
        let fwd = self.forward(&mut tape, &self.params, input)?;
        let grab = |vars: &[Option<Var>; 3]| vars.map(|v| v.map(|v| tape.value(v).clone()));
        let hidden = fwd.hidden.iter().map(grab).collect();
        let values = fwd
            .attention
            .iter()
            .map(|rels| {
                rels.iter()
                    .map(|heads| {
                        heads
                            .iter()
                            .map(|&v| tape.value(v).data().to_vec())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let gates = fwd
            .gates
            .iter()
            .map(|g| g.map(|v| v.map(|v| tape.value(v).data()[0])))
            .collect();
        Ok(Embedding {
            hidden,
            attention: AttentionCache {
                relations: self.relations.clone(),
                values,
            },
            gates,
        })
    }

    /// Scores `(miRNA, disease)` ordinal pairs from a finished embedding.
    pub fn score_pairs(&self, embedding: &Embedding, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let get = |t| {
            embedding
                .output(t)
                .cloned()
                .ok_or_else(|| Error::Invalid(format!("embedding lacks {t} states")))
        };
        let hm = tape.constant(get(NodeType::Mirna)?);
        let hd = tape.constant(get(NodeType::Disease)?);
        let scores = self.predict(&mut tape, &self.params, hm, hd, pairs)?;
        Ok(tape.value(scores).data().to_vec())
    }
}
