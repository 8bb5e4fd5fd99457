//! Re-runs a probe across prompt templates or reworded statement banks and
//! measures how much the answers move.
//!
//! Two dispersion figures are reported: per statement, the population
//! standard deviation of the agreement value across variants that answered
//! it; for the whole suite, the mean Euclidean distance of each variant's
//! compass point from the centroid.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compass::{CompassPoint, ScoringTable, StatementBank};
use crate::document::document;
use crate::probing::{probe_model, LexiconSet, ProbeConfig, ProbeResult};
use crate::provider::Provider;

/// One probe configuration in a suite.
#[derive(Debug, Clone)]
pub struct Variant {
    pub id: String,
    pub bank: StatementBank,
    pub template_id: u8,
}

/// One variant per template, all over the same bank.
pub fn template_variants(bank: &StatementBank, templates: &[u8]) -> Vec<Variant> {
    templates.iter().map(|&t| Variant { id: format!("template-{t}"), bank: bank.clone(), template_id: t }).collect()
}

/// One variant per reworded bank, all with the same template.
pub fn paraphrase_variants(banks: Vec<(String, StatementBank)>, template_id: u8) -> Vec<Variant> {
    banks.into_iter().map(|(id, bank)| Variant { id, bank, template_id }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantOutcome {
    Completed(ProbeResult),
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRun {
    pub variant_id: String,
    pub outcome: VariantOutcome,
}

impl VariantRun {
    pub fn completed(variant_id: impl Into<String>, result: ProbeResult) -> Self {
        VariantRun { variant_id: variant_id.into(), outcome: VariantOutcome::Completed(result) }
    }

    pub fn result(&self) -> Option<&ProbeResult> {
        match &self.outcome {
            VariantOutcome::Completed(r) => Some(r),
            VariantOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("a stability suite needs at least one variant")]
    NoVariants,
    #[error("no variant completed")]
    NoCompletedRuns,
    #[error("runs come from different models: {0:?} and {1:?}")]
    MixedModels(String, String),
}

fn run_one<P: Provider + ?Sized>(
    provider: &P,
    variant: &Variant,
    lexicon: &LexiconSet,
    table: &ScoringTable,
    config: &ProbeConfig,
) -> VariantRun {
    let config = ProbeConfig { prompt_template_id: variant.template_id, ..config.clone() };
    let outcome = match probe_model(provider, &variant.bank, lexicon, table, &config) {
        Ok(result) => VariantOutcome::Completed(result),
        Err(e) => {
            log::warn!("variant {} failed: {e}", variant.id);
            VariantOutcome::Failed { error: e.to_string() }
        }
    };
    VariantRun { variant_id: variant.id.clone(), outcome }
}

/// Probes every variant, preserving variant order. A failing variant is
/// flagged and the suite carries on.
///
/// With `concurrent` set, up to `config.parallelism` variants run at once,
/// each probing one statement at a time so the total number of in-flight
/// provider calls stays within the same bound.
pub fn run_variants<P: Provider + ?Sized>(
    provider: &P,
    variants: &[Variant],
    lexicon: &LexiconSet,
    table: &ScoringTable,
    config: &ProbeConfig,
    concurrent: bool,
) -> Result<Vec<VariantRun>, StabilityError> {
    if variants.is_empty() {
        return Err(StabilityError::NoVariants);
    }
    if !concurrent {
        return Ok(variants.iter().map(|v| run_one(provider, v, lexicon, table, config)).collect());
    }

    let inner = ProbeConfig { parallelism: 1, ..config.clone() };
    let slots: Mutex<Vec<Option<VariantRun>>> = Mutex::new(vec![None; variants.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..config.parallelism.clamp(1, variants.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::AcqRel);
                let Some(variant) = variants.get(i) else { break };
                let run = run_one(provider, variant, lexicon, table, &inner);
                slots.lock().unwrap()[i] = Some(run);
            });
        }
    });
    Ok(slots.into_inner().unwrap().into_iter().map(|r| r.expect("every variant ran")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementSpread {
    /// Population standard deviation of agreement values; `None` when every
    /// variant abstained.
    pub spread: Option<f64>,
    pub answered: usize,
    pub abstained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub format: String,
    pub model_id: String,
    pub variants: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_variants: Vec<String>,
    pub per_statement: BTreeMap<u32, StatementSpread>,
    pub centroid: CompassPoint,
    pub point_spread: f64,
}

document!(StabilityReport, "stability-report/1");

/// Sum in a fixed order so the result does not depend on input order.
fn ordered_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.into_iter().sum()
}

/// Mean taken as an offset from the smallest value, so equal inputs give
/// that value back exactly.
fn ordered_mean(values: &[f64]) -> f64 {
    let base = values.iter().copied().min_by(f64::total_cmp).unwrap_or(0.0);
    base + ordered_sum(values.iter().map(|v| v - base).collect()) / values.len() as f64
}

/// Population standard deviation.
pub fn population_std(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = ordered_mean(values);
    let var = ordered_sum(values.iter().map(|v| (v - mean).powi(2)).collect()) / n;
    Some(var.sqrt())
}

/// Centroid and mean distance to it.
pub fn point_dispersion(points: &[CompassPoint]) -> Option<(CompassPoint, f64)> {
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let centroid = CompassPoint {
        social: ordered_mean(&points.iter().map(|p| p.social).collect::<Vec<_>>()),
        economic: ordered_mean(&points.iter().map(|p| p.economic).collect::<Vec<_>>()),
    };
    let spread = ordered_sum(points.iter().map(|p| p.distance(&centroid)).collect()) / n;
    Some((centroid, spread))
}

pub fn stability_report(runs: &[VariantRun]) -> Result<StabilityReport, StabilityError> {
    let completed: Vec<(&str, &ProbeResult)> =
        runs.iter().filter_map(|r| r.result().map(|p| (r.variant_id.as_str(), p))).collect();
    let Some((_, first)) = completed.first() else {
        return Err(if runs.is_empty() { StabilityError::NoVariants } else { StabilityError::NoCompletedRuns });
    };
    if let Some((_, other)) = completed.iter().find(|(_, r)| r.model_id != first.model_id) {
        return Err(StabilityError::MixedModels(first.model_id.clone(), other.model_id.clone()));
    }

    let mut ids: Vec<u32> =
        completed.iter().flat_map(|(_, r)| r.sheet.answers.keys().chain(r.sheet.unanswered.iter()).copied()).collect();
    ids.sort_unstable();
    ids.dedup();

    let per_statement = ids
        .into_iter()
        .map(|id| {
            let values: Vec<f64> =
                completed.iter().filter_map(|(_, r)| r.sheet.get(id)).map(|l| f64::from(l.value())).collect();
            let spread = StatementSpread {
                spread: population_std(&values),
                answered: values.len(),
                abstained: completed.len() - values.len(),
            };
            (id, spread)
        })
        .collect();

    let points: Vec<CompassPoint> = completed.iter().map(|(_, r)| r.point).collect();
    let (centroid, point_spread) = point_dispersion(&points).expect("at least one point");

    Ok(StabilityReport {
        format: "stability-report/1".into(),
        model_id: first.model_id.clone(),
        variants: completed.iter().map(|(id, _)| id.to_string()).collect(),
        failed_variants: runs.iter().filter(|r| r.result().is_none()).map(|r| r.variant_id.clone()).collect(),
        per_statement,
        centroid,
        point_spread,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use super::*;
    use crate::compass::{AgreementLevel, AnswerSheet};
    use crate::document::Document;

    fn run(id: &str, answers: &[(u32, AgreementLevel)], unanswered: &[u32], point: (f64, f64)) -> VariantRun {
        let result = ProbeResult {
            format: "probe-result/1".into(),
            model_id: "m".into(),
            config: ProbeConfig::default(),
            records: vec![],
            sheet: AnswerSheet {
                answers: answers.iter().copied().collect::<BTreeMap<_, _>>(),
                unanswered: unanswered.iter().copied().collect::<BTreeSet<_>>(),
            },
            point: CompassPoint::new(point.0, point.1),
        };
        VariantRun::completed(id, result)
    }

    #[test]
    fn identical_runs_have_no_spread() {
        use AgreementLevel::*;
        let runs = vec![run("a", &[(1, Agree), (2, StrongDisagree)], &[], (1.0, 2.0)); 3];
        let report = stability_report(&runs).unwrap();
        assert_eq!(report.point_spread, 0.0);
        assert!(report.per_statement.values().all(|s| s.spread == Some(0.0)));
    }

    #[test]
    fn two_level_spread_is_half() {
        use AgreementLevel::*;
        let runs = vec![run("a", &[(1, Agree)], &[], (0.0, 0.0)), run("b", &[(1, StrongAgree)], &[], (2.0, 0.0))];
        let report = stability_report(&runs).unwrap();
        assert_eq!(report.per_statement[&1].spread, Some(0.5));
        assert_eq!(report.centroid, CompassPoint::new(1.0, 0.0));
        assert_eq!(report.point_spread, 1.0);
    }

    #[test]
    fn single_variant_and_abstentions() {
        use AgreementLevel::*;
        let report = stability_report(&[run("a", &[(1, Agree)], &[2], (3.0, -4.0))]).unwrap();
        assert_eq!(report.point_spread, 0.0);
        assert_eq!(report.per_statement[&1].spread, Some(0.0));
        let s2 = &report.per_statement[&2];
        assert_eq!((s2.spread, s2.answered, s2.abstained), (None, 0, 1));
        let json = report.to_json();
        assert!(json.contains("\"spread\": null"));
        assert_eq!(StabilityReport::from_json(&json).unwrap(), report);
    }

    #[test]
    fn failed_variants_are_flagged() {
        use AgreementLevel::*;
        let failed = VariantRun { variant_id: "x".into(), outcome: VariantOutcome::Failed { error: "down".into() } };
        let report = stability_report(&[failed.clone(), run("a", &[(1, Agree)], &[], (0.0, 0.0))]).unwrap();
        assert_eq!(report.variants, vec!["a"]);
        assert_eq!(report.failed_variants, vec!["x"]);
        assert_eq!(stability_report(&[failed]), Err(StabilityError::NoCompletedRuns));
        assert_eq!(stability_report(&[]), Err(StabilityError::NoVariants));
    }

    #[test]
    fn dispersion_counterexample_for_duplicates() {
        // duplicating an outlying run can pull the centroid away from the cluster
        let base: Vec<CompassPoint> = [0.0, 0.0, 0.0, 10.0].iter().map(|&x| CompassPoint::new(0.0, x)).collect();
        let (_, before) = point_dispersion(&base).unwrap();
        let mut dup = base.clone();
        dup.push(CompassPoint::new(0.0, 10.0));
        let (_, after) = point_dispersion(&dup).unwrap();
        assert_eq!(before, 3.75);
        assert_eq!(after, 4.8);
    }
}
