//! Downstream fairness evaluation: metrics overall and per social group,
//! significance tests across seeds, annotator agreement and partisan
//! ensembling.

mod ensemble;
mod metrics;
mod records;
mod report;
mod stats;

pub use ensemble::{ensemble_vote, EnsembleError, EnsembleMode, ENSEMBLE_MODEL_ID};
pub use metrics::{
    balanced_accuracy, balanced_accuracy_with_labels, class_counts, classification_metrics, f1_score, group_breakdown,
    label_set, macro_f1, macro_f1_with_labels, Breakdown, ClassCounts, ClassMetrics, ClassificationMetrics, F1Average,
    GroupKey, GroupMetrics, MetricError, OVERALL,
};
pub use records::{
    load_predictions, read_predictions, validate_predictions, write_predictions, Leaning, PredictionRecord,
    RecordError, PREDICTION_HEADER,
};
pub use report::{fairness_report, Comparison, FairnessReport, ModelReport, ReportError, SeedScore};
pub use stats::{fleiss_kappa, welch_t_test, SignificanceConfig, SignificanceTest, StatsError, WelchTest};
