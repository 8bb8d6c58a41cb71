//! Ranking and threshold metrics, per-region recall and the
//! common-neighbor statistic.

mod metrics;
mod neighbors;
mod report;
mod run;

pub use metrics::{
    auc, aupr, confusion, rank_order, recall_at_percent, subset_recall, threshold_metrics,
    Confusion, RegionRecall, ScoredPair, ThresholdMetrics, THRESHOLD,
};
pub use neighbors::{cm_histogram, common_neighbor_stat, neighbor_set, CmHistogram, NeighborType};
pub use report::{
    adjacency_heatmap, heatmap_tsv, predictions_tsv, write_text, EvaluationReport, MetricsReport,
    DEFAULT_RECALL_PERCENTS,
};
pub use run::{evaluate_checkpoint, score_pairs, RepeatReport};
