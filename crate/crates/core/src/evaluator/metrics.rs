use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::split_bench::Region;

/// Decision threshold; a score equal to it counts as positive.
pub const THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub mirna: usize,
    pub disease: usize,
    pub score: f64,
    pub label: bool,
    pub region: Option<Region>,
}

impl ScoredPair {
    pub fn key(&self) -> (usize, usize) {
        (self.mirna, self.disease)
    }
}

fn class_counts(pairs: &[ScoredPair]) -> (usize, usize) {
    let pos = pairs.iter().filter(|p| p.label).count();
    (pos, pairs.len() - pos)
}

fn check_finite(pairs: &[ScoredPair]) -> Result<()> {
    match pairs.iter().find(|p| !p.score.is_finite()) {
        Some(p) => Err(Error::NonFinite(format!("score of pair {:?}", p.key()))),
        None => Ok(()),
    }
}

/// Area under the ROC curve from mid-ranks, so tied scores contribute 1/2.
pub fn auc(pairs: &[ScoredPair]) -> Result<f64> {
    check_finite(pairs)?;
    let (pos, neg) = class_counts(pairs);
    if pos == 0 || neg == 0 {
        return Err(Error::Invalid(
            "AUC needs both positive and negative pairs".into(),
        ));
    }
    let mut order: Vec<&ScoredPair> = pairs.iter().collect();
    order.sort_by(|a, b| a.score.total_cmp(&b.score));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && order[j].score == order[i].score {
            j += 1;
        }
        // Ranks i+1..=j share their mean.
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * order[i..j].iter().filter(|p| p.label).count() as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Groups of equal score in descending order, as (positives, negatives).
fn descending_groups(pairs: &[ScoredPair]) -> Vec<(usize, usize)> {
    let mut order: Vec<&ScoredPair> = pairs.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && order[j].score == order[i].score {
            j += 1;
        }
        let tp = order[i..j].iter().filter(|p| p.label).count();
        groups.push((tp, j - i - tp));
        i = j;
    }
    groups
}

/// Step-wise area under the precision–recall curve:
/// Σ over descending thresholds of `(ΔTP / P) · precision`.
pub fn aupr(pairs: &[ScoredPair]) -> Result<f64> {
    check_finite(pairs)?;
    let (pos, _) = class_counts(pairs);
    if pos == 0 {
        return Err(Error::Invalid(
            "AUPR needs at least one positive pair".into(),
        ));
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    for (gp, gn) in descending_groups(pairs) {
        tp += gp;
        fp += gn;
        if gp > 0 {
            area += (gp as f64 / pos as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(area)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when nothing was predicted positive; precision is then 0.
    pub precision_undefined: bool,
    pub confusion: Confusion,
}

pub fn confusion(pairs: &[ScoredPair], threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for p in pairs {
        match (p.score >= threshold, p.label) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

pub fn threshold_metrics(pairs: &[ScoredPair], threshold: f64) -> Result<ThresholdMetrics> {
    if pairs.is_empty() {
        return Err(Error::Invalid("no pairs to evaluate".into()));
    }
    check_finite(pairs)?;
    let c = confusion(pairs, threshold);
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ThresholdMetrics {
        accuracy: ratio(c.tp + c.tn, pairs.len()),
        precision,
        recall,
        f1,
        precision_undefined: c.tp + c.fp == 0,
        confusion: c,
    })
}

/// Ranking used for top-N: score descending, then pair key ascending.
pub fn rank_order(a: &ScoredPair, b: &ScoredPair) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.key().cmp(&b.key()))
}

/// Recall when the top `floor(pct · n / 100)` ranked pairs are declared
/// positive. Returns 0 when there are no positives.
pub fn recall_at_percent(pairs: &[ScoredPair], pct: f64) -> Result<f64> {
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(Error::Invalid(format!("percentage {pct} outside (0, 100]")));
    }
    check_finite(pairs)?;
    let (pos, _) = class_counts(pairs);
    if pos == 0 {
        return Ok(0.0);
    }
    let n = ((pct * pairs.len() as f64) / 100.0).floor() as usize;
    let mut order: Vec<&ScoredPair> = pairs.iter().collect();
    order.sort_by(|a, b| rank_order(a, b));
    let hits = order[..n.min(order.len())]
        .iter()
        .filter(|p| p.label)
        .count();
    Ok(hits as f64 / pos as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionRecall {
    pub positives: usize,
    pub detected: usize,
    pub recall: f64,
}

/// Recall over positives per region tag; tags without positives are
/// absent. Pairs without a tag are ignored.
pub fn subset_recall(pairs: &[ScoredPair], threshold: f64) -> BTreeMap<Region, RegionRecall> {
    let mut counts: BTreeMap<Region, (usize, usize)> = BTreeMap::new();
    for p in pairs.iter().filter(|p| p.label) {
        if let Some(r) = p.region {
            let e = counts.entry(r).or_default();
            e.0 += 1;
            if p.score >= threshold {
                e.1 += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(r, (positives, detected))| {
            (
                r,
                RegionRecall {
                    positives,
                    detected,
                    recall: detected as f64 / positives as f64,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(scores: &[f64], labels: &[bool]) -> Vec<ScoredPair> {
        scores
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (&score, &label))| ScoredPair {
                mirna: i,
                disease: 0,
                score,
                label,
                region: None,
            })
            .collect()
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&pairs(&[0.9, 0.1], &[true, false])).unwrap(), 1.0);
        assert_eq!(
            auc(&pairs(&[0.3; 4], &[true, false, true, false])).unwrap(),
            0.5
        );
        assert!(auc(&pairs(&[0.3, 0.2], &[true, true])).is_err());
    }

    #[test]
    fn aupr_examples() {
        assert_eq!(
            aupr(&pairs(&[0.9, 0.8, 0.1], &[true, true, false])).unwrap(),
            1.0
        );
        let p = pairs(&[0.9, 0.8, 0.7, 0.1], &[false, false, false, true]);
        assert_eq!(aupr(&p).unwrap(), 0.25);
        assert!(aupr(&pairs(&[0.5], &[false])).is_err());
    }

    #[test]
    fn threshold_examples() {
        let m = threshold_metrics(&pairs(&[0.5; 4], &[true, false, true, false]), 0.5).unwrap();
        assert_eq!((m.accuracy, m.recall, m.precision), (0.5, 1.0, 0.5));
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        let m = threshold_metrics(&pairs(&[0.1, 0.2], &[true, false]), 0.5).unwrap();
        assert!(m.precision_undefined);
        assert_eq!(m.precision, 0.0);
    }

    #[test]
    fn recall_at_examples() {
        let p = pairs(&[0.9, 0.2, 0.1, 0.3], &[true, false, false, false]);
        assert_eq!(recall_at_percent(&p, 100.0).unwrap(), 1.0);
        assert_eq!(recall_at_percent(&p, 25.0).unwrap(), 1.0);
        assert_eq!(recall_at_percent(&p, 24.0).unwrap(), 0.0);
        assert!(recall_at_percent(&p, 0.0).is_err());
    }
}
