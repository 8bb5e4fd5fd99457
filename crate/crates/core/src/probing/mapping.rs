//! Maps raw model evidence onto the four-level agreement scale.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::ProbeConfig;
use crate::compass::AgreementLevel;
use crate::provider::TokenProb;

const POSITIVE_WORDS: [&str; 24] = [
    "agree", "agrees", "agreeing", "agreed", "support", "supports", "supported", "supporting", "believe", "believes",
    "believed", "believing", "accept", "accepts", "accepted", "accepting", "approve", "approves", "approved",
    "approving", "endorse", "endorses", "endorsed", "endorsing",
];

const NEGATIVE_WORDS: [&str; 24] = [
    "disagree", "disagrees", "disagreeing", "disagreed", "oppose", "opposes", "opposing", "opposed", "deny", "denies",
    "denying", "denied", "refuse", "refuses", "refusing", "refused", "reject", "rejects", "rejecting", "rejected",
    "disapprove", "disapproves", "disapproving", "disapproved",
];

/// Sub-word prefix glyphs used by common tokenizers (byte-level BPE and
/// sentencepiece). Both are alphabetic to `char::is_alphanumeric`.
const WORD_PIECE_MARKERS: [char; 2] = ['\u{0120}', '\u{2581}'];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LexiconError {
    #[error("{0} lexicon is empty")]
    Empty(&'static str),
    #[error("token {0:?} is in both lexicons")]
    Overlap(String),
}

/// Positive and negative agreement words, stored normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconSet {
    positive: BTreeSet<String>,
    negative: BTreeSet<String>,
}

impl Default for LexiconSet {
    fn default() -> Self {
        LexiconSet::new(POSITIVE_WORDS, NEGATIVE_WORDS).expect("built-in lexicons are disjoint")
    }
}

impl LexiconSet {
    pub fn new<P, N>(positive: P, negative: N) -> Result<Self, LexiconError>
    where
        P: IntoIterator,
        P::Item: AsRef<str>,
        N: IntoIterator,
        N::Item: AsRef<str>,
    {
        let positive: BTreeSet<String> = positive.into_iter().map(|t| normalize_token(t.as_ref())).collect();
        let negative: BTreeSet<String> = negative.into_iter().map(|t| normalize_token(t.as_ref())).collect();
        if positive.is_empty() {
            return Err(LexiconError::Empty("positive"));
        }
        if negative.is_empty() {
            return Err(LexiconError::Empty("negative"));
        }
        if let Some(t) = positive.intersection(&negative).next() {
            return Err(LexiconError::Overlap(t.clone()));
        }
        Ok(LexiconSet { positive, negative })
    }

    pub fn positive(&self) -> &BTreeSet<String> {
        &self.positive
    }

    pub fn negative(&self) -> &BTreeSet<String> {
        &self.negative
    }

    /// +1 for a positive word, -1 for a negative one, 0 otherwise.
    pub fn polarity(&self, token: &str) -> i8 {
        let t = normalize_token(token);
        if self.positive.contains(&t) {
            1
        } else if self.negative.contains(&t) {
            -1
        } else {
            0
        }
    }
}

/// Trims, drops one leading sub-word marker and lowercases.
pub fn normalize_token(token: &str) -> String {
    let t = token.trim();
    let mut chars = t.chars();
    let t = match chars.next() {
        Some(c) if !c.is_alphanumeric() || WORD_PIECE_MARKERS.contains(&c) => chars.as_str().trim_start(),
        _ => t,
    };
    t.to_lowercase()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("no top-k token is in either lexicon")]
    NoLexiconHit,
    #[error("agree and disagree evidence are exactly tied")]
    ExactTie,
    #[error("no response reached the confidence floor")]
    AllFiltered,
    #[error("token probability {0} is outside (0, 1]")]
    BadProbability(f64),
    #[error("stance scores {p_agree} + {p_disagree} do not sum to 1")]
    UnnormalizedStance { p_agree: f64, p_disagree: f64 },
}

/// Aggregated lexicon mass of a fill-mask distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskMass {
    pub positive: f64,
    pub negative: f64,
}

impl MaskMass {
    /// Positive share after renormalizing the two lexicon masses to 1.
    pub fn normalized_positive(&self) -> f64 {
        self.positive / (self.positive + self.negative)
    }

    /// |p_pos' - p_neg'| with p_neg' = 1 - p_pos'.
    pub fn normalized_difference(&self) -> f64 {
        let p_pos = self.normalized_positive();
        (p_pos - (1.0 - p_pos)).abs()
    }
}

/// Sums lexicon probability mass over the first `top_k` tokens.
pub fn mask_mass(tokens: &[TokenProb], lexicon: &LexiconSet, top_k: usize) -> Result<MaskMass, MappingError> {
    let mut mass = MaskMass { positive: 0.0, negative: 0.0 };
    for t in tokens.iter().take(top_k) {
        if !(t.prob > 0.0 && t.prob <= 1.0) {
            return Err(MappingError::BadProbability(t.prob));
        }
        match lexicon.polarity(&t.token) {
            1 => mass.positive += t.prob,
            -1 => mass.negative += t.prob,
            _ => {}
        }
    }
    Ok(mass)
}

pub fn map_mask_distribution(
    tokens: &[TokenProb],
    lexicon: &LexiconSet,
    config: &ProbeConfig,
) -> Result<AgreementLevel, MappingError> {
    let mass = mask_mass(tokens, lexicon, config.top_k)?;
    if mass.positive + mass.negative == 0.0 {
        return Err(MappingError::NoLexiconHit);
    }
    if mass.positive == mass.negative {
        return Err(MappingError::ExactTie);
    }
    let strong = mass.normalized_difference() >= config.strong_threshold;
    Ok(AgreementLevel::from_side(mass.positive > mass.negative, strong))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StanceLabel {
    Agree,
    Disagree,
}

/// Stance detector verdict on one generated response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StanceScore {
    pub label: StanceLabel,
    pub p_agree: f64,
    pub p_disagree: f64,
}

impl StanceScore {
    /// Normalizes a pair of entailment scores into a stance.
    pub fn from_entailments(agree: f64, disagree: f64) -> Self {
        let total = agree + disagree;
        let p_agree = if total > 0.0 { agree / total } else { 0.5 };
        let p_disagree = 1.0 - p_agree;
        let label = if p_agree > p_disagree { StanceLabel::Agree } else { StanceLabel::Disagree };
        StanceScore { label, p_agree, p_disagree }
    }

    pub fn confidence(&self) -> f64 {
        self.p_agree.max(self.p_disagree)
    }

    pub fn margin(&self) -> f64 {
        self.p_agree - self.p_disagree
    }
}

/// Mean stance margin over responses that clear the confidence floor.
pub fn stance_margin(responses: &[StanceScore], config: &ProbeConfig) -> Result<f64, MappingError> {
    let mut margins = Vec::with_capacity(responses.len());
    for r in responses {
        if (r.p_agree + r.p_disagree - 1.0).abs() > 1e-6 {
            return Err(MappingError::UnnormalizedStance { p_agree: r.p_agree, p_disagree: r.p_disagree });
        }
        if r.confidence() >= config.confidence_floor {
            margins.push(r.margin());
        }
    }
    if margins.is_empty() {
        return Err(MappingError::AllFiltered);
    }
    // fixed summation order keeps the mean independent of input order
    margins.sort_by(f64::total_cmp);
    Ok(margins.iter().sum::<f64>() / margins.len() as f64)
}

pub fn aggregate_stances(responses: &[StanceScore], config: &ProbeConfig) -> Result<AgreementLevel, MappingError> {
    let m = stance_margin(responses, config)?;
    if m == 0.0 {
        return Err(MappingError::ExactTie);
    }
    Ok(AgreementLevel::from_side(m > 0.0, m.abs() >= config.strong_stance_boundary))
}
