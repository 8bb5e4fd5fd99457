//! Classification metrics in percent, overall and per group.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::records::PredictionRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no records")]
    NoRecords,
    #[error("class {0:?} has no gold examples")]
    EmptyClass(String),
    #[error("only one class ({0:?}) present; metrics need at least two")]
    SingleClass(String),
    #[error("positive class {0:?} is not in the label set")]
    UnknownPositive(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ClassCounts {
    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Harmonic mean of precision and recall; 0 when undefined.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            log::warn!("class with no gold and no predicted examples scored F1 = 0");
        }
        ratio(2 * self.tp, denom)
    }
}

fn ratio(num: u64, denom: u64) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

/// The labels present as gold or prediction.
pub fn label_set<'a>(records: impl IntoIterator<Item = &'a PredictionRecord>) -> BTreeSet<String> {
    records.into_iter().flat_map(|r| [r.gold.clone(), r.pred.clone()]).collect()
}

/// One-vs-rest counts for every label of `labels`, after checking that each
/// label has gold support.
pub fn class_counts(
    records: &[PredictionRecord],
    labels: &BTreeSet<String>,
) -> Result<BTreeMap<String, ClassCounts>, MetricError> {
    if records.is_empty() {
        return Err(MetricError::NoRecords);
    }
    if labels.len() < 2 {
        let only = labels.iter().next().cloned().unwrap_or_default();
        return Err(MetricError::SingleClass(only));
    }
    let mut counts: BTreeMap<String, ClassCounts> =
        labels.iter().map(|l| (l.clone(), ClassCounts::default())).collect();
    for r in records {
        if r.gold == r.pred {
            counts.entry(r.gold.clone()).or_default().tp += 1;
        } else {
            counts.entry(r.gold.clone()).or_default().fn_ += 1;
            counts.entry(r.pred.clone()).or_default().fp += 1;
        }
    }
    if let Some((label, _)) = counts.iter().find(|(_, c)| c.support() == 0) {
        return Err(MetricError::EmptyClass(label.clone()));
    }
    Ok(counts)
}

fn mean_percent(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    100.0 * values.iter().sum::<f64>() / values.len() as f64
}

/// Mean per-class recall, in percent.
pub fn balanced_accuracy(records: &[PredictionRecord]) -> Result<f64, MetricError> {
    balanced_accuracy_with_labels(records, &label_set(records))
}

pub fn balanced_accuracy_with_labels(
    records: &[PredictionRecord],
    labels: &BTreeSet<String>,
) -> Result<f64, MetricError> {
    let counts = class_counts(records, labels)?;
    Ok(mean_percent(counts.values().map(ClassCounts::recall)))
}

/// Unweighted mean of per-class F1, in percent.
pub fn macro_f1(records: &[PredictionRecord]) -> Result<f64, MetricError> {
    macro_f1_with_labels(records, &label_set(records))
}

pub fn macro_f1_with_labels(records: &[PredictionRecord], labels: &BTreeSet<String>) -> Result<f64, MetricError> {
    let counts = class_counts(records, labels)?;
    Ok(mean_percent(counts.values().map(ClassCounts::f1)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "average", content = "positive", rename_all = "snake_case")]
pub enum F1Average {
    Macro,
    /// F1 of one designated positive class.
    Binary(String),
}

pub fn f1_score(records: &[PredictionRecord], average: &F1Average) -> Result<f64, MetricError> {
    match average {
        F1Average::Macro => macro_f1(records),
        F1Average::Binary(positive) => {
            let labels = label_set(records);
            let counts = class_counts(records, &labels)?;
            let c = counts.get(positive).ok_or_else(|| MetricError::UnknownPositive(positive.clone()))?;
            Ok(100.0 * c.f1())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub bacc: f64,
    pub f1_macro: f64,
    pub per_class: BTreeMap<String, ClassMetrics>,
}

pub fn classification_metrics(
    records: &[PredictionRecord],
    labels: &BTreeSet<String>,
) -> Result<ClassificationMetrics, MetricError> {
    let counts = class_counts(records, labels)?;
    let per_class = counts
        .iter()
        .map(|(label, c)| {
            if c.tp + c.fp == 0 {
                log::warn!("class {label:?} is never predicted; precision reported as 0");
            }
            let m = ClassMetrics {
                precision: 100.0 * c.precision(),
                recall: 100.0 * c.recall(),
                f1: 100.0 * c.f1(),
                support: c.support(),
            };
            (label.clone(), m)
        })
        .collect();
    Ok(ClassificationMetrics {
        bacc: mean_percent(counts.values().map(ClassCounts::recall)),
        f1_macro: mean_percent(counts.values().map(ClassCounts::f1)),
        per_class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    /// The identity target or media source.
    Group,
    /// The partisan leaning attached to the group.
    Leaning,
}

impl GroupKey {
    pub fn key_of(self, record: &PredictionRecord) -> String {
        match self {
            GroupKey::Group => record.group.clone(),
            GroupKey::Leaning => record.group_leaning.map_or("UNSPECIFIED", |l| l.tag()).to_string(),
        }
    }
}

/// Metrics for one slice of the records. A slice whose metrics cannot be
/// computed carries the error instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<ClassificationMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl GroupMetrics {
    fn compute(group: String, records: &[PredictionRecord], labels: &BTreeSet<String>) -> Self {
        let (metrics, error) = match classification_metrics(records, labels) {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e.to_string())),
        };
        GroupMetrics { group, n: records.len(), metrics, error }
    }

    pub fn bacc(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.bacc)
    }

    pub fn f1_macro(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.f1_macro)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub key: GroupKey,
    pub overall: GroupMetrics,
    /// Sorted by group name.
    pub groups: Vec<GroupMetrics>,
}

pub const OVERALL: &str = "overall";

/// Overall metrics plus one row per group. Every group is scored against
/// the overall label set, so a group missing a gold class reports
/// `EmptyClass` in its row without failing the others.
pub fn group_breakdown(records: &[PredictionRecord], key: GroupKey) -> Breakdown {
    let labels = label_set(records);
    let mut by_group: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_group.entry(key.key_of(r)).or_default().push(r.clone());
    }
    Breakdown {
        key,
        overall: GroupMetrics::compute(OVERALL.into(), records, &labels),
        groups: by_group.into_iter().map(|(g, recs)| GroupMetrics::compute(g, &recs, &labels)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: usize, group: &str, gold: &str, pred: &str) -> PredictionRecord {
        PredictionRecord {
            example_id: format!("e{id}"),
            group: group.into(),
            group_leaning: None,
            gold: gold.into(),
            pred: pred.into(),
            score: None,
            model_id: "m".into(),
            seed: 0,
        }
    }

    /// Builds a binary fixture from confusion-matrix cells.
    fn fixture(tp: usize, fn_: usize, tn: usize, fp: usize) -> Vec<PredictionRecord> {
        let mut v = Vec::new();
        let cells = [(tp, "pos", "pos"), (fn_, "pos", "neg"), (tn, "neg", "neg"), (fp, "neg", "pos")];
        for (n, gold, pred) in cells {
            for _ in 0..n {
                v.push(rec(v.len(), "A", gold, pred));
            }
        }
        v
    }

    #[test]
    fn confusion_fixture() {
        let recs = fixture(40, 10, 30, 20);
        assert!((balanced_accuracy(&recs).unwrap() - 70.0).abs() < 1e-12);
        let f1 = macro_f1(&recs).unwrap();
        // F1_pos = 80/110, F1_neg = 60/90
        assert!((f1 - 100.0 * (80.0 / 110.0 + 60.0 / 90.0) / 2.0).abs() < 1e-12);
        assert_eq!(format!("{f1:.2}"), "69.70");
        let pos = f1_score(&recs, &F1Average::Binary("pos".into())).unwrap();
        assert_eq!(format!("{pos:.2}"), "72.73");
        assert!(matches!(f1_score(&recs, &F1Average::Binary("x".into())), Err(MetricError::UnknownPositive(_))));
    }

    #[test]
    fn simple_cases() {
        let all_right = fixture(5, 0, 7, 0);
        assert_eq!(balanced_accuracy(&all_right).unwrap(), 100.0);
        assert_eq!(macro_f1(&all_right).unwrap(), 100.0);
        let majority = fixture(0, 3, 9, 0);
        assert_eq!(balanced_accuracy(&majority).unwrap(), 50.0);
    }

    #[test]
    fn degenerate_inputs() {
        let single = fixture(4, 0, 0, 0);
        assert_eq!(macro_f1(&single), Err(MetricError::SingleClass("pos".into())));
        // "neg" only ever appears as a prediction
        let missing = fixture(4, 2, 0, 0);
        assert_eq!(balanced_accuracy(&missing), Err(MetricError::EmptyClass("neg".into())));
        assert_eq!(balanced_accuracy(&[]), Err(MetricError::NoRecords));
    }

    #[test]
    fn breakdown_per_group() {
        let mut recs = vec![rec(0, "A", "x", "x"), rec(1, "A", "y", "y"), rec(2, "B", "x", "y"), rec(3, "B", "y", "x")];
        recs.push(rec(4, "C", "x", "x"));
        let b = group_breakdown(&recs, GroupKey::Group);
        let names: Vec<&str> = b.groups.iter().map(|g| g.group.as_str()).collect();
        assert_eq!(names, ["A", "B", "C"]);
        assert_eq!(b.groups[0].bacc(), Some(100.0));
        assert_eq!(b.groups[1].bacc(), Some(0.0));
        assert_eq!(b.groups[2].error.as_deref(), Some("class \"y\" has no gold examples"));
        assert_eq!(b.overall.n, 5);
    }

    #[test]
    fn single_group_equals_overall() {
        let recs = fixture(12, 3, 8, 5);
        let b = group_breakdown(&recs, GroupKey::Group);
        assert_eq!(b.groups.len(), 1);
        assert_eq!(b.groups[0].metrics, b.overall.metrics);
        let c = &b.overall.metrics.as_ref().unwrap().per_class["pos"];
        assert_eq!(c.support, 15);
        assert!((c.precision - 100.0 * 12.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn leaning_key() {
        use super::super::records::Leaning;
        let mut a = rec(0, "CNN", "x", "x");
        a.group_leaning = Some(Leaning::Left);
        let b = rec(1, "BBC", "y", "y");
        assert_eq!(GroupKey::Leaning.key_of(&a), "LEFT");
        assert_eq!(GroupKey::Leaning.key_of(&b), "UNSPECIFIED");
    }
}
