use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_store::GraphOptions;

pub const TUNED_DIMS: [usize; 4] = [32, 64, 96, 128];
pub const TUNED_HEADS: [usize; 4] = [1, 2, 4, 8];
pub const MAX_LAYERS: usize = 4;

/// Architecture and ablation switches. Together with the graph this fixes
/// every parameter shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    /// Height of the single convolution filter over miRNA sequences.
    pub kernel: usize,
    /// When false, encoder inputs are seeded random vectors of the same
    /// shapes as the real features.
    pub use_node_features: bool,
    pub graph: GraphOptions,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            layers: 2,
            heads: 4,
            kernel: 8,
            use_node_features: true,
            graph: GraphOptions::default(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Preset for ablation condition `n` (0 to 4), starting from `self`
    /// for the non-ablated fields.
    pub fn condition(self, n: u8) -> Result<Self> {
        let graph = |use_intra_edges, use_pcg, include_mda| GraphOptions {
            use_intra_edges,
            use_pcg,
            include_mda,
        };
        let layers = if self.layers == 0 { 2 } else { self.layers };
        let (use_node_features, layers, graph) = match n {
            0 => (false, 0, graph(false, false, false)),
            1 => (true, 0, graph(false, false, false)),
            2 => (true, layers, graph(true, false, false)),
            3 => (true, layers, graph(true, true, false)),
            4 => (true, layers, graph(true, true, true)),
            _ => return Err(Error::Config(format!("unknown ablation condition {n}"))),
        };
        Ok(Self {
            use_node_features,
            layers,
            graph,
            ..self
        })
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.heads == 0 || self.kernel == 0 {
            return Err(Error::Config(
                "dim, heads and kernel must be positive".into(),
            ));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "dim {} is not divisible by {} heads",
                self.dim, self.heads
            )));
        }
        if self.layers > MAX_LAYERS {
            return Err(Error::Config(format!(
                "{} layers requested, at most {MAX_LAYERS} supported",
                self.layers
            )));
        }
        let g = &self.graph;
        if g.use_pcg && !g.use_intra_edges {
            return Err(Error::Config("use_pcg requires use_intra_edges".into()));
        }
        if g.include_mda && !g.use_pcg {
            return Err(Error::Config("include_mda requires use_pcg".into()));
        }
        if g.use_intra_edges && !self.use_node_features {
            return Err(Error::Config(
                "use_intra_edges requires use_node_features".into(),
            ));
        }
        Ok(())
    }

    /// Whether `(dim, layers, heads)` lies on the tuned hyperparameter grid.
    pub fn in_tuned_grid(&self) -> bool {
        TUNED_DIMS.contains(&self.dim)
            && (1..=MAX_LAYERS).contains(&self.layers)
            && TUNED_HEADS.contains(&self.heads)
    }
}
