//! Blocking HTTP client for the fill-mask, completion and NLI endpoints.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use compass_audit_core::provider::{
    validate_fill_mask, validate_nli, CompletionRequest, NliScores, Provider, ProviderError, TokenProb,
    MASK_PLACEHOLDER,
};
use reqwest::blocking::Client;
use reqwest::Url;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::wire::{
    CompletionBody, CompletionResponse, FillMaskRequest, FillMaskResponse, NliRequest, NliResponse, COMPLETIONS_PATH,
    FILL_MASK_PATH, NLI_PATH,
};

/// Environment variable holding the bearer token.
pub const TOKEN_ENV: &str = "COMPASS_AUDIT_TOKEN";

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderEndpoint {
    pub base_url: String,
    pub auth_token: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// First retry delay; doubles on each further retry.
    pub backoff_base_ms: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EndpointError {
    #[error("base URL {0:?} is not an absolute http(s) URL")]
    BadUrl(String),
    #[error("timeout must be positive")]
    ZeroTimeout,
    #[error("could not build HTTP client: {0}")]
    Client(String),
}

impl ProviderEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        ProviderEndpoint {
            base_url: base_url.into(),
            auth_token: None,
            timeout_ms: 30_000,
            max_retries: 2,
            backoff_base_ms: 250,
        }
    }

    /// Like [`ProviderEndpoint::new`], taking the token from `COMPASS_AUDIT_TOKEN`.
    pub fn from_env(base_url: impl Into<String>) -> Self {
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        ProviderEndpoint { auth_token: token, ..ProviderEndpoint::new(base_url) }
    }

    pub fn validate(&self) -> Result<(), EndpointError> {
        let url = Url::parse(&self.base_url).map_err(|_| EndpointError::BadUrl(self.base_url.clone()))?;
        if !matches!(url.scheme(), "http" | "https") || url.host().is_none() {
            return Err(EndpointError::BadUrl(self.base_url.clone()));
        }
        if self.timeout_ms == 0 {
            return Err(EndpointError::ZeroTimeout);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClientStats {
    /// HTTP requests sent, retries included.
    pub requests: u64,
    pub retries: u64,
}

enum Retryable {
    Status(u16),
    Timeout,
}

#[derive(Debug)]
pub struct HttpProvider {
    endpoint: ProviderEndpoint,
    base: String,
    model_id: String,
    client: Client,
    requests: AtomicU64,
    retries: AtomicU64,
}

impl HttpProvider {
    pub fn new(endpoint: ProviderEndpoint) -> Result<Self, EndpointError> {
        endpoint.validate()?;
        let client = Client::builder()
            .timeout(Duration::from_millis(endpoint.timeout_ms))
            .build()
            .map_err(|e| EndpointError::Client(e.to_string()))?;
        let base = endpoint.base_url.trim_end_matches('/').to_string();
        Ok(HttpProvider {
            model_id: base.clone(),
            base,
            endpoint,
            client,
            requests: AtomicU64::new(0),
            retries: AtomicU64::new(0),
        })
    }

    /// Defaults to the base URL.
    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    pub fn endpoint(&self) -> &ProviderEndpoint {
        &self.endpoint
    }

    pub fn stats(&self) -> ClientStats {
        ClientStats { requests: self.requests.load(Ordering::Relaxed), retries: self.retries.load(Ordering::Relaxed) }
    }

    fn attempt<B: Serialize, R: DeserializeOwned>(
        &self,
        url: &str,
        body: &B,
    ) -> Result<Result<R, Retryable>, ProviderError> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let mut req = self.client.post(url).json(body);
        if let Some(token) = &self.endpoint.auth_token {
            req = req.bearer_auth(token);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Ok(Err(Retryable::Timeout)),
            Err(e) => return Err(ProviderError::Unavailable(e.to_string())),
        };
        let status = resp.status();
        if status.is_server_error() {
            return Ok(Err(Retryable::Status(status.as_u16())));
        }
        if !status.is_success() {
            return Err(ProviderError::Http { status: status.as_u16() });
        }
        let bytes = match resp.bytes() {
            Ok(b) => b,
            Err(e) if e.is_timeout() => return Ok(Err(Retryable::Timeout)),
            Err(e) => return Err(ProviderError::MalformedBody(e.to_string())),
        };
        serde_json::from_slice(&bytes).map(Ok).map_err(|e| ProviderError::MalformedBody(e.to_string()))
    }

    /// POSTs `body`, retrying 5xx answers and timeouts with exponential
    /// backoff.
    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, ProviderError> {
        let url = format!("{}{path}", self.base);
        let mut retries = 0u32;
        loop {
            let failure = match self.attempt(&url, body)? {
                Ok(r) => return Ok(r),
                Err(f) => f,
            };
            if retries >= self.endpoint.max_retries {
                return Err(match failure {
                    Retryable::Status(status) => ProviderError::Http { status },
                    Retryable::Timeout => ProviderError::Timeout { retries },
                });
            }
            let delay = self.endpoint.backoff_base_ms.saturating_mul(1 << retries.min(16));
            log::debug!("{url}: retrying in {delay} ms");
            std::thread::sleep(Duration::from_millis(delay));
            retries += 1;
            self.retries.fetch_add(1, Ordering::Relaxed);
        }
    }
}

impl Provider for HttpProvider {
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
        let resp: FillMaskResponse = self.post(FILL_MASK_PATH, &FillMaskRequest { prompt: prompt.into(), top_k })?;
        validate_fill_mask(&resp.tokens, top_k)?;
        Ok(resp.tokens)
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        if request.max_tokens == 0 {
            return Err(ProviderError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        let body = CompletionBody {
            prompt: request.prompt.clone(),
            max_tokens: request.max_tokens,
            temperature: request.temperature,
            seed: request.seed,
        };
        let resp: CompletionResponse = self.post(COMPLETIONS_PATH, &body)?;
        let choice =
            resp.choices.into_iter().next().ok_or_else(|| ProviderError::MalformedBody("no choices".into()))?;
        if choice.text.trim().is_empty() {
            return Err(ProviderError::EmptyCompletion);
        }
        Ok(choice.text)
    }

    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliScores, ProviderError> {
        if premise.is_empty() || hypothesis.is_empty() {
            return Err(ProviderError::InvalidRequest("premise and hypothesis must be non-empty".into()));
        }
        let resp: NliResponse =
            self.post(NLI_PATH, &NliRequest { premise: premise.into(), hypothesis: hypothesis.into() })?;
        validate_nli(&resp.labels)?;
        Ok(resp.labels)
    }
}
