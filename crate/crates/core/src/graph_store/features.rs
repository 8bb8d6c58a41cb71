use serde::{Deserialize, Serialize};

use super::nodes::NodeType;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Default half-width of disease/PCG text embeddings.
pub const DEFAULT_TEXT_HALF_WIDTH: usize = 64;

const HASH_SEED: u64 = 0x6d69_524e_4164_6973;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MirnaSequences {
    pub stem_loop: String,
    pub mature_1: String,
    /// Empty when the miRNA has a single mature sequence.
    pub mature_2: String,
}

impl MirnaSequences {
    pub fn new(stem_loop: &str, mature_1: &str, mature_2: &str) -> Result<Self> {
        Ok(Self {
            stem_loop: normalize_rna(stem_loop)?,
            mature_1: normalize_rna(mature_1)?,
            mature_2: normalize_rna(mature_2)?,
        })
    }
}

/// Upper-cases and checks that only `A`, `U`, `C`, `G` occur.
pub fn normalize_rna(seq: &str) -> Result<String> {
    let upper = seq.trim().to_ascii_uppercase();
    if let Some((pos, c)) = upper
        .chars()
        .enumerate()
        .find(|(_, c)| !matches!(c, 'A' | 'U' | 'C' | 'G'))
    {
        return Err(Error::Invalid(format!(
            "illegal base `{c}` at position {pos} of sequence `{seq}`"
        )));
    }
    Ok(upper)
}

/// Maximum lengths of the three sequence blocks over all miRNAs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceLengths {
    pub stem_loop: usize,
    pub mature_1: usize,
    pub mature_2: usize,
}

impl SequenceLengths {
    pub fn of(seqs: &[MirnaSequences]) -> Self {
        let max = |f: fn(&MirnaSequences) -> usize| seqs.iter().map(f).max().unwrap_or(0);
        Self {
            stem_loop: max(|s| s.stem_loop.len()),
            mature_1: max(|s| s.mature_1.len()),
            mature_2: max(|s| s.mature_2.len()),
        }
    }

    pub fn total(&self) -> usize {
        self.stem_loop + self.mature_1 + self.mature_2
    }
}

/// Raw per-node inputs to the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFeatures {
    pub mirna: Vec<MirnaSequences>,
    /// `n_disease × 2·d_B`.
    pub disease: Tensor,
    /// `n_pcg × 2·d_B`.
    pub pcg: Tensor,
    pub text_half_width: usize,
}

impl NodeFeatures {
    pub fn text(&self, t: NodeType) -> Option<&Tensor> {
        match t {
            NodeType::Mirna => None,
            NodeType::Disease => Some(&self.disease),
            NodeType::Pcg => Some(&self.pcg),
        }
    }

    pub fn sequence_lengths(&self) -> SequenceLengths {
        SequenceLengths::of(&self.mirna)
    }

    pub fn validate(&self, counts: [usize; 3]) -> Result<()> {
        if self.mirna.len() != counts[0] {
            return Err(Error::Invalid(format!(
                "{} miRNA feature rows for {} miRNAs",
                self.mirna.len(),
                counts[0]
            )));
        }
        let width = 2 * self.text_half_width;
        for (t, m, n) in [
            (NodeType::Disease, &self.disease, counts[1]),
            (NodeType::Pcg, &self.pcg, counts[2]),
        ] {
            if m.rows() != n || m.cols() != width {
                return Err(Error::Shape(format!(
                    "{t} features are {:?}, expected [{n}, {width}]",
                    m.shape()
                )));
            }
            if !m.is_finite() {
                return Err(Error::NonFinite(format!("{t} embedding")));
            }
        }
        Ok(())
    }

    pub(crate) fn permuted(&self, t: NodeType, order: &[usize]) -> Self {
        let mut out = self.clone();
        let permute = |m: &Tensor| {
            let data = order
                .iter()
                .flat_map(|&o| m.row_slice(o).to_vec())
                .collect();
            Tensor::new(order.len(), m.cols(), data).expect("row permutation keeps shape")
        };
        match t {
            NodeType::Mirna => out.mirna = order.iter().map(|&o| self.mirna[o].clone()).collect(),
            NodeType::Disease => out.disease = permute(&self.disease),
            NodeType::Pcg => out.pcg = permute(&self.pcg),
        }
        out
    }
}

pub(crate) fn fnv1a(bytes: impl Iterator<Item = u8>) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ HASH_SEED;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Character 3-gram counts of `text` hashed into `buckets` bins and
/// L2-normalized. Empty text maps to the zero vector.
pub fn hashed_text_embedding(text: &str, buckets: usize) -> Vec<f64> {
    let mut out = vec![0.0; buckets];
    if buckets == 0 {
        return out;
    }
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut add = |gram: &[char]| {
        let s: String = gram.iter().collect();
        out[(fnv1a(s.bytes()) % buckets as u64) as usize] += 1.0;
    };
    if chars.len() < 3 {
        if !chars.is_empty() {
            add(&chars);
        }
    } else {
        chars.windows(3).for_each(&mut add);
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|v| *v /= norm);
    }
    out
}

/// `[hash(primary) ‖ hash(secondary)]`, each half `half_width` wide.
pub fn hashed_pair_embedding(primary: &str, secondary: &str, half_width: usize) -> Vec<f64> {
    let mut v = hashed_text_embedding(primary, half_width);
    v.extend(hashed_text_embedding(secondary, half_width));
    v
}
