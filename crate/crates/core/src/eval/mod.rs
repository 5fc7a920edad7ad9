//! Full-graph inference, exact top-K retrieval, accuracy/diversity metrics,
//! and a linear category probe.

mod infer;
mod metrics;
mod probe;
mod report;
mod retrieve;

pub use infer::infer_all;
pub use metrics::{
    accuracy, accuracy_metrics, category_counts, diversity, diversity_metrics, entropy, gini, AccuracyMetrics,
    DiversityMetrics,
};
pub use probe::{category_probe, linear_probe, ProbeConfig, ProbeReport};
pub use report::{
    evaluate, read_metrics_csv, read_metrics_json, MetricValues, MetricsReport, StoredMetrics, DEFAULT_K_EVAL, MEAN_ROW,
};
pub use retrieve::{retrieve_topk, RecommendationList};
