//! Raw encoder inputs: 1-mer sequence blocks for miRNAs and text vectors
//! for diseases and PCGs.

use crate::error::{Error, Result};
use crate::graph_store::{HeteroGraph, MirnaSequences, NodeType, SequenceLengths};
use crate::numerics::rng::{derive_seed, seeded, uniform};
use crate::numerics::Tensor;

/// Value of every channel at a padding position.
pub const PLACEHOLDER: f64 = 0.25;

const RANDOM_FEATURE_SALT: u64 = 0xfea7;

/// One-hot rows for `seq` over `A, U, C, G`, padded to `max_len` rows with
/// the uniform placeholder.
pub fn embed_sequence_1mer(seq: &str, max_len: usize) -> Result<Tensor> {
    let mut out = Tensor::filled(max_len, 4, PLACEHOLDER);
    write_one_hot(seq, max_len, out.data_mut())?;
    Ok(out)
}

fn write_one_hot(seq: &str, max_len: usize, dst: &mut [f64]) -> Result<()> {
    if seq.len() > max_len {
        return Err(Error::Shape(format!(
            "sequence of length {} exceeds the maximum {max_len}",
            seq.len()
        )));
    }
    for (pos, c) in seq.chars().enumerate() {
        let channel = match c.to_ascii_uppercase() {
            'A' => 0,
            'U' => 1,
            'C' => 2,
            'G' => 3,
            other => {
                return Err(Error::Invalid(format!(
                    "illegal base `{other}` at position {pos}"
                )))
            }
        };
        let row = &mut dst[pos * 4..pos * 4 + 4];
        row.fill(0.0);
        row[channel] = 1.0;
    }
    Ok(())
}

/// The concatenated stem-loop, mature-1 and mature-2 blocks of one miRNA,
/// flattened row-major to `lengths.total() × 4` values.
pub fn mirna_input_row(seqs: &MirnaSequences, lengths: &SequenceLengths) -> Result<Vec<f64>> {
    let mut row = vec![PLACEHOLDER; lengths.total() * 4];
    let mut offset = 0;
    for (seq, len) in [
        (&seqs.stem_loop, lengths.stem_loop),
        (&seqs.mature_1, lengths.mature_1),
        (&seqs.mature_2, lengths.mature_2),
    ] {
        write_one_hot(seq, len, &mut row[offset * 4..(offset + len) * 4])?;
        offset += len;
    }
    Ok(row)
}

/// Encoder inputs per node type; `None` for types not in the model.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderInputs {
    pub inputs: [Option<Tensor>; 3],
}

impl EncoderInputs {
    /// Real features from `graph`, laid out for the given shapes.
    pub fn from_graph(
        graph: &HeteroGraph,
        lengths: &SequenceLengths,
        types: &[NodeType],
    ) -> Result<Self> {
        let mut inputs: [Option<Tensor>; 3] = Default::default();
        for &t in types {
            inputs[t.index()] = Some(match t {
                NodeType::Mirna => {
                    let seqs = &graph.features().mirna;
                    let mut data = Vec::with_capacity(seqs.len() * lengths.total() * 4);
                    for s in seqs {
                        data.extend(mirna_input_row(s, lengths)?);
                    }
                    Tensor::new(seqs.len(), lengths.total() * 4, data)?
                }
                _ => graph
                    .features()
                    .text(t)
                    .expect("text features exist for disease and PCG")
                    .clone(),
            });
        }
        Ok(Self { inputs })
    }

    /// Seeded uniform `[0, 1)` inputs with the same shapes as `like`.
    pub fn random_like(like: &EncoderInputs, seed: u64) -> Self {
        let mut inputs: [Option<Tensor>; 3] = Default::default();
        for (i, slot) in like.inputs.iter().enumerate() {
            if let Some(t) = slot {
                let mut rng = seeded(derive_seed(seed, RANDOM_FEATURE_SALT + i as u64));
                inputs[i] = Some(uniform(&mut rng, t.rows(), t.cols(), 0.0, 1.0));
            }
        }
        Self { inputs }
    }

    pub fn get(&self, t: NodeType) -> Option<&Tensor> {
        self.inputs[t.index()].as_ref()
    }
}
