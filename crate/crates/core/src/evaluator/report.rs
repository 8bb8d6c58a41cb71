use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{
    auc, aupr, recall_at_percent, subset_recall, threshold_metrics, Confusion, RegionRecall,
    ScoredPair, THRESHOLD,
};
use crate::error::{Error, Result};
use crate::graph_store::{NodeTable, NodeType};
use crate::split_bench::{Region, RegionMap};

pub const DEFAULT_RECALL_PERCENTS: [f64; 3] = [1.0, 5.0, 10.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pairs: usize,
    pub positives: usize,
    pub auc: f64,
    pub aupr: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub confusion: Confusion,
    /// Keyed by the percentage as written, e.g. `"5"`.
    pub recall_at: BTreeMap<String, f64>,
    pub regions: BTreeMap<Region, RegionRecall>,
}

impl MetricsReport {
    pub fn new(pairs: &[ScoredPair], recall_percents: &[f64]) -> Result<Self> {
        let t = threshold_metrics(pairs, THRESHOLD)?;
        let mut recall_at = BTreeMap::new();
        for &pct in recall_percents {
            recall_at.insert(format!("{pct}"), recall_at_percent(pairs, pct)?);
        }
        Ok(Self {
            pairs: pairs.len(),
            positives: pairs.iter().filter(|p| p.label).count(),
            auc: auc(pairs)?,
            aupr: aupr(pairs)?,
            accuracy: t.accuracy,
            precision: t.precision,
            recall: t.recall,
            f1: t.f1,
            precision_undefined: t.precision_undefined,
            confusion: t.confusion,
            recall_at,
            regions: subset_recall(pairs, THRESHOLD),
        })
    }
}

/// Metrics on the balanced (1:1) and the full imbalanced test sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub balanced: MetricsReport,
    pub imbalanced: MetricsReport,
    pub mirna_median: usize,
    pub disease_median: usize,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-region rows in the layout `region, positives, detected, recall`.
    pub fn region_table(&self) -> String {
        let mut s = String::from("region\tpositives\tdetected\trecall\n");
        for (r, v) in &self.balanced.regions {
            let _ = writeln!(s, "{r}\t{}\t{}\t{:.4}", v.positives, v.detected, v.recall);
        }
        s
    }
}

/// `mirna_id, disease_id, score, label, region` rows.
pub fn predictions_tsv(pairs: &[ScoredPair], nodes: &NodeTable) -> String {
    let mut s = String::from("mirna_id\tdisease_id\tscore\tlabel\tregion\n");
    for p in pairs {
        let region = p.region.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{region}",
            nodes.id(NodeType::Mirna, p.mirna),
            nodes.id(NodeType::Disease, p.disease),
            p.score,
            u8::from(p.label)
        );
    }
    s
}

/// Counts of `pairs` on a `bins × bins` grid whose axes order miRNAs and
/// diseases by known degree, highest first (ties by ordinal).
pub fn adjacency_heatmap(
    pairs: &[(usize, usize)],
    map: &RegionMap,
    bins: usize,
) -> Result<Vec<Vec<usize>>> {
    if bins == 0 {
        return Err(Error::Invalid("heatmap needs at least one bin".into()));
    }
    let rank_bin = |degrees: &[usize]| {
        let mut order: Vec<usize> = (0..degrees.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(degrees[i]), i));
        let mut bin = vec![0; degrees.len()];
        for (rank, &i) in order.iter().enumerate() {
            bin[i] = rank * bins / degrees.len().max(1);
        }
        bin
    };
    let (mb, db) = (rank_bin(&map.mirna_degree), rank_bin(&map.disease_degree));
    let mut grid = vec![vec![0; bins]; bins];
    for &(m, d) in pairs {
        grid[mb[m]][db[d]] += 1;
    }
    Ok(grid)
}

pub fn heatmap_tsv(grid: &[Vec<usize>]) -> String {
    let mut s = String::from("mirna_bin\tdisease_bin\tcount\n");
    for (i, row) in grid.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let _ = writeln!(s, "{i}\t{j}\t{c}");
        }
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
