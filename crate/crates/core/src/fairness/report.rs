use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{classification_metrics, group_breakdown, label_set, Breakdown, GroupKey, GroupMetrics};
use super::records::PredictionRecord;
use super::stats::{welch_t_test, SignificanceConfig, WelchTest};
use crate::document::document;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedScore {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bacc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_macro: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bacc: Option<WelchTest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_macro: Option<WelchTest>,
    pub bacc_significant: bool,
    pub f1_significant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model_id: String,
    pub per_seed: Vec<SeedScore>,
    pub bacc_mean: Option<f64>,
    pub f1_mean: Option<f64>,
    /// Computed over all seeds pooled.
    pub breakdown: Breakdown,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub format: String,
    pub group_key: GroupKey,
    pub significance: SignificanceConfig,
    pub labels: Vec<String>,
    pub models: Vec<ModelReport>,
}

document!(FairnessReport, "fairness-report/1");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("no prediction records")]
    Empty,
    #[error("baseline model {0:?} has no predictions")]
    UnknownBaseline(String),
    #[error("alpha must be in (0, 1), got {0}")]
    BadAlpha(f64),
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn seed_scores(records: &[&PredictionRecord], labels: &BTreeSet<String>) -> Vec<SeedScore> {
    let mut by_seed: BTreeMap<u64, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_seed.entry(r.seed).or_default().push((*r).clone());
    }
    by_seed
        .into_iter()
        .map(|(seed, recs)| match classification_metrics(&recs, labels) {
            Ok(m) => SeedScore { seed, bacc: Some(m.bacc), f1_macro: Some(m.f1_macro), error: None },
            Err(e) => SeedScore { seed, bacc: None, f1_macro: None, error: Some(e.to_string()) },
        })
        .collect()
}

fn compare(model: &[SeedScore], baseline: &[SeedScore], baseline_id: &str, alpha: f64) -> Comparison {
    let pick = |s: &[SeedScore], f: fn(&SeedScore) -> Option<f64>| s.iter().filter_map(f).collect::<Vec<f64>>();
    let bacc = welch_t_test(&pick(model, |s| s.bacc), &pick(baseline, |s| s.bacc));
    let f1 = welch_t_test(&pick(model, |s| s.f1_macro), &pick(baseline, |s| s.f1_macro));
    let note = bacc.as_ref().err().or(f1.as_ref().err()).map(|e| e.to_string());
    let bacc = bacc.ok();
    let f1 = f1.ok();
    Comparison {
        baseline: baseline_id.to_string(),
        bacc_significant: bacc.is_some_and(|t| t.p < alpha),
        f1_significant: f1.is_some_and(|t| t.p < alpha),
        bacc,
        f1_macro: f1,
        note,
    }
}

/// Per model: per-seed overall scores, pooled group breakdown and, when a
/// baseline is named, an unpaired Welch test of the per-seed scores against
/// the baseline's.
pub fn fairness_report(
    records: &[PredictionRecord],
    key: GroupKey,
    baseline: Option<&str>,
    significance: SignificanceConfig,
) -> Result<FairnessReport, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    if !(significance.alpha > 0.0 && significance.alpha < 1.0) {
        return Err(ReportError::BadAlpha(significance.alpha));
    }
    let labels = label_set(records);
    let mut by_model: BTreeMap<&str, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_model.entry(r.model_id.as_str()).or_default().push(r);
    }
    let seeds: BTreeMap<&str, Vec<SeedScore>> =
        by_model.iter().map(|(m, recs)| (*m, seed_scores(recs, &labels))).collect();
    if let Some(b) = baseline {
        if !seeds.contains_key(b) {
            return Err(ReportError::UnknownBaseline(b.to_string()));
        }
    }

    let models = by_model
        .iter()
        .map(|(model_id, recs)| {
            let per_seed = seeds[model_id].clone();
            let pooled: Vec<PredictionRecord> = recs.iter().map(|r| (*r).clone()).collect();
            let comparison =
                baseline.filter(|b| b != model_id).map(|b| compare(&per_seed, &seeds[b], b, significance.alpha));
            ModelReport {
                model_id: model_id.to_string(),
                bacc_mean: mean(&per_seed.iter().filter_map(|s| s.bacc).collect::<Vec<_>>()),
                f1_mean: mean(&per_seed.iter().filter_map(|s| s.f1_macro).collect::<Vec<_>>()),
                per_seed,
                breakdown: group_breakdown(&pooled, key),
                comparison,
            }
        })
        .collect();

    Ok(FairnessReport {
        format: "fairness-report/1".into(),
        group_key: key,
        significance,
        labels: labels.into_iter().collect(),
        models,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

impl FairnessReport {
    /// One row per model and group, metrics in percent with two decimals.
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["model_id", "group", "n", "bacc", "f1_macro", "error"]).expect("in-memory write");
        for m in &self.models {
            let rows = std::iter::once(&m.breakdown.overall).chain(&m.breakdown.groups);
            for g in rows {
                write_row(&mut wtr, &m.model_id, g);
            }
        }
        String::from_utf8(wtr.into_inner().expect("in-memory write")).expect("utf-8")
    }
}

fn write_row(wtr: &mut csv::Writer<Vec<u8>>, model: &str, g: &GroupMetrics) {
    wtr.write_record([
        model,
        &g.group,
        &g.n.to_string(),
        &pct(g.bacc()),
        &pct(g.f1_macro()),
        g.error.as_deref().unwrap_or(""),
    ])
    .expect("in-memory write");
}
