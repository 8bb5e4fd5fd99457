//! Deterministic synthetic respondent with a known compass position.
//!
//! Every statement of the scoring table gets a level in {-2, -1, +1, +2}
//! relative to its axis, chosen so that the mean level over an axis tracks
//! `2 * latent / 10`. A single four-level answer cannot land between grid
//! values, so levels are dithered across the statements of an axis: the
//! statements are put in a seeded order and each takes the higher of the two
//! bracketing levels when its stratified position falls below the fractional
//! part. Scoring the answers back therefore recovers the latent point up to
//! `5 / n` on an axis of `n` equally weighted statements.
//!
//! A level becomes a stance `a` toward the statement: sign from the level and
//! the statement direction, magnitude `max(|latent| / 10, 0.6)` for strong
//! levels and 0.15 for weak ones. With probability `noise` the stance is
//! flipped; the draw is keyed by seed, statement id and the exact prompt, so
//! rewordings of one statement flip independently.

use std::collections::BTreeMap;

use compass_audit_core::provider::{
    CompletionRequest, NliScores, Provider, ProviderError, TokenProb, MASK_PLACEHOLDER,
};
use compass_audit_core::{Axis, CompassPoint, ScoringTable, Statement, StatementBank};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Share of fill-mask mass on the lexicon tokens "agree" and "disagree".
pub const LEXICON_MASS: f64 = 0.95;
const FILLERS: [(&str, f64); 4] = [("think", 0.02), ("feel", 0.015), ("am", 0.01), ("was", 0.005)];
const MIN_STRONG: f64 = 0.6;
const WEAK: f64 = 0.15;

pub const UNCLEAR_TEXT: &str = "It is hard to say; there are arguments on both sides.";
const AGREE_LEAD: &str = "I agree with this statement.";
const DISAGREE_LEAD: &str = "I disagree with this statement.";
const AGREE_REASONS: [&str; 3] =
    ["It matches how I see the issue.", "There are good reasons to support it.", "I think it is broadly right."];
const DISAGREE_REASONS: [&str; 3] =
    ["It does not match how I see the issue.", "There are good reasons to reject it.", "I think it is mistaken."];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MockConfigError {
    #[error("noise must be in [0, 1], got {0}")]
    BadNoise(f64),
    #[error("latent point must be finite")]
    NonFiniteLatent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockRespondentConfig {
    pub latent_point: CompassPoint,
    /// Probability that a statement's stance is flipped.
    pub noise: f64,
    pub seed: u64,
    pub table: ScoringTable,
}

fn key(seed: u64, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

fn rng(seed: u64, parts: &[&[u8]]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(key(seed, parts))
}

impl MockRespondentConfig {
    /// Uses the default scoring table.
    pub fn new(latent_point: CompassPoint, noise: f64, seed: u64) -> Result<Self, MockConfigError> {
        let table = ScoringTable::from_bank(&StatementBank::default_bank());
        let config = MockRespondentConfig { latent_point, noise, seed, table };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), MockConfigError> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(MockConfigError::BadNoise(self.noise));
        }
        if !(self.latent_point.social.is_finite() && self.latent_point.economic.is_finite()) {
            return Err(MockConfigError::NonFiniteLatent);
        }
        Ok(())
    }

    fn unit(&self, axis: Axis) -> f64 {
        (self.latent_point.axis(axis) / 10.0).clamp(-1.0, 1.0)
    }

    /// Noise-free level of every table statement relative to its axis.
    pub fn base_levels(&self) -> BTreeMap<u32, i8> {
        let mut levels = BTreeMap::new();
        for axis in Axis::ALL {
            let mu = 2.0 * self.unit(axis);
            let mut ids: Vec<(u32, [u8; 32])> =
                self.table.axis_ids(axis).map(|id| (id, key(self.seed, &[b"order", &id.to_le_bytes()]))).collect();
            ids.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
            let total: f64 = ids.iter().map(|(id, _)| self.table.get(*id).map_or(0.0, |e| e.weight)).sum();
            let mut before = 0.0;
            for (id, _) in ids {
                let w = self.table.get(id).map_or(0.0, |e| e.weight);
                let u = (before + w / 2.0) / total;
                before += w;
                let level = if mu >= 1.0 {
                    if u < mu - 1.0 {
                        2
                    } else {
                        1
                    }
                } else if mu >= -1.0 {
                    if u < (mu + 1.0) / 2.0 {
                        1
                    } else {
                        -1
                    }
                } else if u < -mu - 1.0 {
                    -2
                } else {
                    -1
                };
                levels.insert(id, level);
            }
        }
        levels
    }

    fn level_of(&self, statement_id: u32) -> Option<i8> {
        self.base_levels().get(&statement_id).copied()
    }

    /// Whether the noise draw flips this statement under this prompt.
    pub fn flipped(&self, statement_id: u32, prompt: &str) -> bool {
        self.noise > 0.0
            && rng(self.seed, &[b"flip", &statement_id.to_le_bytes(), prompt.as_bytes()]).random::<f64>() < self.noise
    }

    /// Signed stance in [-1, 1] toward the statement as worded in `prompt`;
    /// `None` when the statement is not in the table.
    pub fn stance(&self, statement: &Statement, prompt: &str) -> Option<f64> {
        let entry = self.table.get(statement.id)?;
        let level = self.level_of(statement.id)?;
        let magnitude = if level.abs() == 2 { self.unit(entry.axis).abs().max(MIN_STRONG) } else { WEAK };
        let a = entry.direction.sign() * f64::from(level.signum()) * magnitude;
        Some(if self.flipped(statement.id, prompt) { -a } else { a })
    }
}

fn fillers() -> Vec<TokenProb> {
    FILLERS.iter().map(|(t, p)| TokenProb::new(*t, *p)).collect()
}

fn sort_desc(tokens: &mut [TokenProb]) {
    tokens.sort_by(|a, b| b.prob.total_cmp(&a.prob).then_with(|| a.token.cmp(&b.token)));
}

/// Full fill-mask distribution for `statement` asked through `prompt`,
/// sorted by probability. "agree" gets `0.95 * (a + 1) / 2`, "disagree" the
/// rest of the 0.95 lexicon budget and fillers share the remaining 0.05.
pub fn generate_mock_distribution(
    config: &MockRespondentConfig,
    statement: &Statement,
    prompt: &str,
) -> Vec<TokenProb> {
    let mut tokens = fillers();
    if let Some(a) = config.stance(statement, prompt) {
        for (token, p) in [("agree", LEXICON_MASS * (1.0 + a) / 2.0), ("disagree", LEXICON_MASS * (1.0 - a) / 2.0)] {
            if p > 0.0 {
                tokens.push(TokenProb::new(token, p));
            }
        }
    }
    sort_desc(&mut tokens);
    tokens
}

/// Answers the three endpoints from a [`MockRespondentConfig`].
///
/// Prompts are matched to statements by the longest statement text they
/// contain, searched across the default bank and any registered paraphrase
/// banks. Unrecognized prompts get filler tokens only.
#[derive(Debug, Clone)]
pub struct MockRespondent {
    config: MockRespondentConfig,
    banks: Vec<StatementBank>,
    model_id: String,
}

impl MockRespondent {
    pub fn new(config: MockRespondentConfig) -> Self {
        let model_id = format!(
            "mock(social={},economic={},noise={},seed={})",
            config.latent_point.social, config.latent_point.economic, config.noise, config.seed
        );
        MockRespondent { config, banks: vec![StatementBank::default_bank()], model_id }
    }

    pub fn with_bank(mut self, bank: StatementBank) -> Self {
        self.banks.push(bank);
        self
    }

    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    pub fn config(&self) -> &MockRespondentConfig {
        &self.config
    }

    pub fn identify(&self, prompt: &str) -> Option<&Statement> {
        self.banks
            .iter()
            .flat_map(|b| b.statements())
            .filter(|s| prompt.contains(s.text.as_str()))
            .max_by_key(|s| s.text.len())
    }

    fn stance_for(&self, prompt: &str) -> Option<f64> {
        self.identify(prompt).and_then(|s| self.config.stance(s, prompt))
    }

    /// Generated text for one sample. Every fifth sample is noncommittal;
    /// for weak stances every third sample takes the other side.
    pub fn completion_text(&self, request: &CompletionRequest) -> String {
        let k = request.seed;
        let stance = match self.stance_for(&request.prompt) {
            Some(a) if !k.is_multiple_of(5) => a,
            _ => return UNCLEAR_TEXT.to_string(),
        };
        let mut agree = stance > 0.0;
        if stance.abs() < MIN_STRONG && k.is_multiple_of(3) {
            agree = !agree;
        }
        let id = self.identify(&request.prompt).map_or(0, |s| s.id);
        let mut r = rng(self.config.seed, &[b"sample", &id.to_le_bytes(), request.prompt.as_bytes(), &k.to_le_bytes()]);
        let (lead, reasons) = if agree { (AGREE_LEAD, AGREE_REASONS) } else { (DISAGREE_LEAD, DISAGREE_REASONS) };
        format!("{lead} {}", reasons[r.random_range(0..reasons.len())])
    }
}

fn premise_side(premise: &str) -> Option<bool> {
    let p = premise.trim_start();
    if p.starts_with("I disagree") {
        Some(false)
    } else if p.starts_with("I agree") {
        Some(true)
    } else {
        None
    }
}

fn hypothesis_side(hypothesis: &str) -> Option<bool> {
    if hypothesis.contains("disagrees with") {
        Some(false)
    } else if hypothesis.contains("agrees with") {
        Some(true)
    } else {
        None
    }
}

fn scores(entailment: f64, neutral: f64, contradiction: f64) -> NliScores {
    NliScores { entailment, neutral, contradiction }
}

/// Keyword NLI: a response opening "I agree" entails agreement hypotheses
/// and contradicts disagreement ones, and vice versa.
pub fn mock_nli(premise: &str, hypothesis: &str) -> NliScores {
    if premise == hypothesis {
        return scores(0.98, 0.015, 0.005);
    }
    match (premise_side(premise), hypothesis_side(hypothesis)) {
        (Some(p), Some(h)) if p == h => scores(0.96, 0.03, 0.01),
        (Some(_), Some(_)) => scores(0.02, 0.08, 0.90),
        (None, Some(_)) => scores(0.45, 0.40, 0.15),
        _ => scores(0.2, 0.6, 0.2),
    }
}

impl Provider for MockRespondent {
    fn model_id(&self) -> String {
        self.model_id.clone()
    }

    fn fill_mask(&self, prompt: &str, top_k: usize) -> Result<Vec<TokenProb>, ProviderError> {
        if prompt.matches(MASK_PLACEHOLDER).count() != 1 {
            return Err(ProviderError::InvalidRequest(format!("prompt must contain exactly one {MASK_PLACEHOLDER}")));
        }
        if top_k == 0 {
            return Err(ProviderError::InvalidRequest("top_k must be at least 1".into()));
        }
        let mut tokens = match self.identify(prompt) {
            Some(s) => generate_mock_distribution(&self.config, s, prompt),
            None => fillers(),
        };
        tokens.truncate(top_k);
        Ok(tokens)
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        if request.max_tokens == 0 {
            return Err(ProviderError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        let text = self.completion_text(request);
        let words: Vec<&str> = text.split_whitespace().take(request.max_tokens as usize).collect();
        if words.is_empty() {
            return Err(ProviderError::EmptyCompletion);
        }
        Ok(words.join(" "))
    }

    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        if premise.is_empty() || hypothesis.is_empty() {
            return Err(ProviderError::InvalidRequest("premise and hypothesis must be non-empty".into()));
        }
        Ok(mock_nli(premise, hypothesis))
    }
}
