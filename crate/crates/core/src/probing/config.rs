use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompts::TEMPLATE_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProbeMode {
    /// Fill-mask probing of encoder models.
    Encoder,
    /// Sampled generation scored by an NLI stance detector.
    Decoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub mode: ProbeMode,
    pub top_k: usize,
    /// Minimum normalized probability difference for a STRONG fill-mask answer.
    pub strong_threshold: f64,
    pub n_samples: u32,
    /// Stance detections below this confidence are discarded.
    pub confidence_floor: f64,
    pub prompt_template_id: u8,
    /// Mean stance margin at or beyond which a decoder answer is STRONG.
    pub strong_stance_boundary: f64,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Upper bound on in-flight provider calls.
    pub parallelism: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            mode: ProbeMode::Encoder,
            top_k: 10,
            strong_threshold: 0.3,
            n_samples: 10,
            confidence_floor: 0.9,
            prompt_template_id: 1,
            strong_stance_boundary: 0.5,
            temperature: 0.7,
            max_tokens: 64,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("strong_threshold must be in (0, 1), got {0}")]
    Threshold(f64),
    #[error("confidence_floor must be in (0, 1], got {0}")]
    ConfidenceFloor(f64),
    #[error("strong_stance_boundary must be in (0, 1), got {0}")]
    StanceBoundary(f64),
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("prompt_template_id must be in 1..=7, got {0}")]
    Template(u8),
    #[error("temperature must be finite and non-negative, got {0}")]
    Temperature(f64),
}

impl ProbeConfig {
    pub fn encoder() -> Self {
        ProbeConfig::default()
    }

    pub fn decoder() -> Self {
        ProbeConfig { mode: ProbeMode::Decoder, ..ProbeConfig::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.strong_threshold > 0.0 && self.strong_threshold < 1.0) {
            return Err(ConfigError::Threshold(self.strong_threshold));
        }
        if !(self.confidence_floor > 0.0 && self.confidence_floor <= 1.0) {
            return Err(ConfigError::ConfidenceFloor(self.confidence_floor));
        }
        if !(self.strong_stance_boundary > 0.0 && self.strong_stance_boundary < 1.0) {
            return Err(ConfigError::StanceBoundary(self.strong_stance_boundary));
        }
        if self.top_k == 0 {
            return Err(ConfigError::Zero("top_k"));
        }
        if self.n_samples == 0 {
            return Err(ConfigError::Zero("n_samples"));
        }
        if self.max_tokens == 0 {
            return Err(ConfigError::Zero("max_tokens"));
        }
        if self.parallelism == 0 {
            return Err(ConfigError::Zero("parallelism"));
        }
        if !(1..=TEMPLATE_COUNT).contains(&self.prompt_template_id) {
            return Err(ConfigError::Template(self.prompt_template_id));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ConfigError::Temperature(self.temperature));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ProbeConfig::default();
        assert_eq!((c.top_k, c.n_samples, c.prompt_template_id, c.parallelism), (10, 10, 1, 4));
        assert_eq!((c.strong_threshold, c.confidence_floor, c.strong_stance_boundary), (0.3, 0.9, 0.5));
        c.validate().unwrap();
        ProbeConfig::decoder().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range() {
        let bad = |f: fn(&mut ProbeConfig)| {
            let mut c = ProbeConfig::default();
            f(&mut c);
            c.validate().unwrap_err()
        };
        assert_eq!(bad(|c| c.strong_threshold = 1.0), ConfigError::Threshold(1.0));
        assert_eq!(bad(|c| c.confidence_floor = 0.0), ConfigError::ConfidenceFloor(0.0));
        assert_eq!(bad(|c| c.strong_stance_boundary = 0.0), ConfigError::StanceBoundary(0.0));
        assert_eq!(bad(|c| c.top_k = 0), ConfigError::Zero("top_k"));
        assert_eq!(bad(|c| c.prompt_template_id = 8), ConfigError::Template(8));
        ProbeConfig { confidence_floor: 1.0, ..ProbeConfig::default() }.validate().unwrap();
    }
}
