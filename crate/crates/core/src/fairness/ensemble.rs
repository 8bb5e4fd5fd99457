//! Combining predictions of several models over one example set.
//!
//! Each `(model_id, seed)` pair is one voter. Voters are sorted before any
//! accumulation so the result does not depend on input order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::records::PredictionRecord;

pub const ENSEMBLE_MODEL_ID: &str = "ensemble";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EnsembleMode {
    /// Most common prediction; ties go to the higher mean score, then to the
    /// lexicographically smallest label.
    Majority,
    /// Label with the highest mean confidence across voters.
    MeanScore,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("no predictions to combine")]
    Empty,
    #[error("model {model_id:?} (seed {seed}) has no prediction for example {example_id:?}")]
    CoverageGap { example_id: String, model_id: String, seed: u64 },
    #[error("model {model_id:?} (seed {seed}) has two predictions for example {example_id:?}")]
    DuplicateVote { example_id: String, model_id: String, seed: u64 },
    #[error("MEAN_SCORE needs a score on every prediction; example {example_id:?}, model {model_id:?} has none")]
    MissingScores { example_id: String, model_id: String },
    #[error("voters disagree on the gold label of example {0:?}")]
    InconsistentGold(String),
}

type Voter = (String, u64);

/// Probability a voter assigns to `label`, spreading the remaining mass
/// evenly over the other classes.
fn label_probability(record: &PredictionRecord, score: f64, label: &str, n_labels: usize) -> f64 {
    if record.pred == label {
        score
    } else if n_labels > 1 {
        (1.0 - score) / (n_labels - 1) as f64
    } else {
        0.0
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn majority(votes: &[&PredictionRecord]) -> (String, Option<f64>) {
    let mut by_label: BTreeMap<&str, Vec<&PredictionRecord>> = BTreeMap::new();
    for v in votes {
        by_label.entry(v.pred.as_str()).or_default().push(v);
    }
    let scored: Vec<(&str, usize, Option<f64>)> = by_label
        .iter()
        .map(|(label, vs)| {
            let scores: Option<Vec<f64>> = vs.iter().map(|v| v.score).collect();
            (*label, vs.len(), scores.map(|s| mean(&s)))
        })
        .collect();
    // labels iterate in ascending order, so keeping the first best on ties
    // prefers the smallest label
    let mut best = scored[0];
    for &cand in &scored[1..] {
        let better = match cand.1.cmp(&best.1) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => matches!((cand.2, best.2), (Some(c), Some(b)) if c > b),
        };
        if better {
            best = cand;
        }
    }
    (best.0.to_string(), best.2)
}

fn mean_score(
    votes: &[&PredictionRecord],
    labels: &BTreeSet<String>,
    example_id: &str,
) -> Result<(String, Option<f64>), EnsembleError> {
    let mut best: Option<(&str, f64)> = None;
    for label in labels {
        let mut probs = Vec::with_capacity(votes.len());
        for v in votes {
            let score = v.score.ok_or_else(|| EnsembleError::MissingScores {
                example_id: example_id.to_string(),
                model_id: v.model_id.clone(),
            })?;
            probs.push(label_probability(v, score, label, labels.len()));
        }
        let m = mean(&probs);
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((label, m));
        }
    }
    let (label, m) = best.expect("label set is non-empty");
    Ok((label.to_string(), Some(m)))
}

/// Combines per-model predictions into one prediction per example, ordered
/// by example id. Output records carry model id `"ensemble"` and seed 0.
pub fn ensemble_vote(records: &[PredictionRecord], mode: EnsembleMode) -> Result<Vec<PredictionRecord>, EnsembleError> {
    if records.is_empty() {
        return Err(EnsembleError::Empty);
    }
    let labels: BTreeSet<String> = records.iter().flat_map(|r| [r.gold.clone(), r.pred.clone()]).collect();
    let voters: BTreeSet<Voter> = records.iter().map(|r| (r.model_id.clone(), r.seed)).collect();
    let mut table: BTreeMap<&str, BTreeMap<Voter, &PredictionRecord>> = BTreeMap::new();
    for r in records {
        let slot = table.entry(r.example_id.as_str()).or_default();
        if slot.insert((r.model_id.clone(), r.seed), r).is_some() {
            return Err(EnsembleError::DuplicateVote {
                example_id: r.example_id.clone(),
                model_id: r.model_id.clone(),
                seed: r.seed,
            });
        }
    }

    let mut out = Vec::with_capacity(table.len());
    for (example_id, by_voter) in &table {
        if let Some((model_id, seed)) = voters.iter().find(|v| !by_voter.contains_key(*v)) {
            return Err(EnsembleError::CoverageGap {
                example_id: example_id.to_string(),
                model_id: model_id.clone(),
                seed: *seed,
            });
        }
        let votes: Vec<&PredictionRecord> = by_voter.values().copied().collect();
        let first = votes[0];
        if votes.iter().any(|v| v.gold != first.gold) {
            return Err(EnsembleError::InconsistentGold(example_id.to_string()));
        }
        let (pred, score) = match mode {
            EnsembleMode::Majority => majority(&votes),
            EnsembleMode::MeanScore => mean_score(&votes, &labels, example_id)?,
        };
        out.push(PredictionRecord {
            example_id: example_id.to_string(),
            group: first.group.clone(),
            group_leaning: first.group_leaning,
            gold: first.gold.clone(),
            pred,
            score,
            model_id: ENSEMBLE_MODEL_ID.into(),
            seed: 0,
        });
    }
    Ok(out)
}
