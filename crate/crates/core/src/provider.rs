//! The three model-access contracts a probe needs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Placeholder that fill-mask providers substitute with their own mask token.
pub const MASK_PLACEHOLDER: &str = "<MASK>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProb {
    pub token: String,
    pub prob: f64,
}

impl TokenProb {
    pub fn new(token: impl Into<String>, prob: f64) -> Self {
        TokenProb { token: token.into(), prob }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliScores {
    pub entailment: f64,
    pub neutral: f64,
    pub contradiction: f64,
}

impl NliScores {
    pub fn sum(&self) -> f64 {
        self.entailment + self.neutral + self.contradiction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    /// The provider could not be reached, or kept failing after retries.
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("request timed out after {retries} retries")]
    Timeout { retries: u32 },
    #[error("provider returned HTTP {status}")]
    Http { status: u16 },
    #[error("malformed response body: {0}")]
    MalformedBody(String),
    #[error("provider returned an empty completion")]
    EmptyCompletion,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl ProviderError {
    /// Whether the error means the provider as a whole is unusable, as
    /// opposed to a single request having gone wrong.
    pub fn is_fatal(&self) -> bool {
        matches!(self, ProviderError::Unavailable(_) | ProviderError::Timeout { .. })
            || matches!(self, ProviderError::Http { status } if *status >= 500)
    }
}

/// Access to a served language model plus an NLI stance scorer.
///
/// Implementations must be safe to share across probing threads.
pub trait Provider: Send + Sync {
    fn model_id(&self) -> String;

    /// Top-`top_k` fill-mask candidates, highest probability first.
    fn fill_mask(&self, prompt: &str, top_k: usize) -> Result<Vec<TokenProb>, ProviderError>;

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;

    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for &P {
    fn model_id(&self) -> String {
        (**self).model_id()
    }
    fn fill_mask(&self, prompt: &str, top_k: usize) -> Result<Vec<TokenProb>, ProviderError> {
        (**self).fill_mask(prompt, top_k)
    }
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        (**self).nli(premise, hypothesis)
    }
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn model_id(&self) -> String {
        (**self).model_id()
    }
    fn fill_mask(&self, prompt: &str, top_k: usize) -> Result<Vec<TokenProb>, ProviderError> {
        (**self).fill_mask(prompt, top_k)
    }
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        (**self).nli(premise, hypothesis)
    }
}

/// Checks the fill-mask contract: at most `top_k` entries, probabilities in
/// (0, 1], non-increasing, total mass at most 1.
pub fn validate_fill_mask(tokens: &[TokenProb], top_k: usize) -> Result<(), ProviderError> {
    if tokens.len() > top_k {
        return Err(ProviderError::MalformedBody(format!("{} tokens returned for top_k={top_k}", tokens.len())));
    }
    for t in tokens {
        if !(t.prob > 0.0 && t.prob <= 1.0) {
            return Err(ProviderError::MalformedBody(format!("probability {} for token {:?}", t.prob, t.token)));
        }
    }
    if tokens.windows(2).any(|w| w[0].prob < w[1].prob) {
        return Err(ProviderError::MalformedBody("tokens not sorted by probability".into()));
    }
    let total: f64 = tokens.iter().map(|t| t.prob).sum();
    if total > 1.0 + 1e-6 {
        return Err(ProviderError::MalformedBody(format!("probabilities sum to {total}")));
    }
    Ok(())
}

pub fn validate_nli(scores: &NliScores) -> Result<(), ProviderError> {
    let parts = [scores.entailment, scores.neutral, scores.contradiction];
    if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(ProviderError::MalformedBody(format!("NLI probability out of range: {parts:?}")));
    }
    if (scores.sum() - 1.0).abs() > 1e-6 {
        return Err(ProviderError::MalformedBody(format!("NLI probabilities sum to {}", scores.sum())));
    }
    Ok(())
}
