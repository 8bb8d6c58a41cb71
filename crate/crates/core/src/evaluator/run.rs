use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::ScoredPair;
use super::report::{EvaluationReport, MetricsReport};
use crate::error::{Error, Result};
use crate::graph_store::HeteroGraph;
use crate::model::Checkpoint;
use crate::split_bench::{Partition, SplitManifest};

/// Scores ordinal pairs with the checkpoint on its own view of `base`.
pub fn score_pairs(
    checkpoint: &Checkpoint,
    base: &HeteroGraph,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    let graph = checkpoint.graph_for(base)?;
    let model = &checkpoint.model;
    let emb = model.embed(&model.input(&graph)?)?;
    model.score_pairs(&emb, pairs)
}

fn scored(
    partition: &Partition,
    scores: &[f64],
    tags: impl Fn((usize, usize)) -> crate::split_bench::Region,
) -> Vec<ScoredPair> {
    let (pairs, labels) = partition.labeled();
    pairs
        .iter()
        .zip(&labels)
        .zip(scores)
        .map(|((&(m, d), &l), &score)| ScoredPair {
            mirna: m,
            disease: d,
            score,
            label: l == 1.0,
            region: Some(tags((m, d))),
        })
        .collect()
}

/// Test-set evaluation. Returns the report and the scored imbalanced set.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    base: &HeteroGraph,
    manifest: &SplitManifest,
    recall_percents: &[f64],
) -> Result<(EvaluationReport, Vec<ScoredPair>)> {
    if checkpoint.node_fingerprint != manifest.node_fingerprint {
        return Err(Error::Config(
            "checkpoint and manifest index different node tables".into(),
        ));
    }
    let test = &manifest.test;
    let (pairs, _) = test.labeled();
    let scores = score_pairs(checkpoint, base, &pairs)?;
    let map = manifest.region_map();
    let imbalanced = scored(test, &scores, |p| map.classify(p));
    let balanced_part = manifest.balanced_test();
    let lookup: BTreeMap<(usize, usize), f64> = pairs.iter().copied().zip(scores).collect();
    let balanced_scores: Vec<f64> = balanced_part
        .labeled()
        .0
        .iter()
        .map(|p| lookup[p])
        .collect();
    let balanced = scored(&balanced_part, &balanced_scores, |p| map.classify(p));
    let report = EvaluationReport {
        balanced: MetricsReport::new(&balanced, recall_percents)?,
        imbalanced: MetricsReport::new(&imbalanced, recall_percents)?,
        mirna_median: manifest.regions.mirna_median,
        disease_median: manifest.regions.disease_median,
    };
    Ok((report, imbalanced))
}

/// Per-run reports and the mean of every scalar metric across runs, keyed
/// like `balanced.auc` or `imbalanced.recall_at.5`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatReport {
    pub mean: BTreeMap<String, f64>,
    pub runs: Vec<EvaluationReport>,
}

impl RepeatReport {
    pub fn new(runs: Vec<EvaluationReport>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Invalid("no evaluation runs".into()));
        }
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        for r in &runs {
            for (name, m) in [("balanced", &r.balanced), ("imbalanced", &r.imbalanced)] {
                for (k, v) in scalar_metrics(m) {
                    *sums.entry(format!("{name}.{k}")).or_default() += v;
                }
            }
        }
        let n = runs.len() as f64;
        Ok(Self {
            mean: sums.into_iter().map(|(k, v)| (k, v / n)).collect(),
            runs,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn scalar_metrics(m: &MetricsReport) -> Vec<(String, f64)> {
    let mut out = vec![
        ("auc".to_string(), m.auc),
        ("aupr".to_string(), m.aupr),
        ("accuracy".to_string(), m.accuracy),
        ("precision".to_string(), m.precision),
        ("recall".to_string(), m.recall),
        ("f1".to_string(), m.f1),
    ];
    out.extend(
        m.recall_at
            .iter()
            .map(|(k, v)| (format!("recall_at.{k}"), *v)),
    );
    out.extend(
        m.regions
            .iter()
            .map(|(r, v)| (format!("region.{r}"), v.recall)),
    );
    out
}
