//! HTTP front end for [`MockRespondent`].

use std::net::{SocketAddr, TcpListener};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use compass_audit_core::provider::{CompletionRequest, Provider, ProviderError};
use tokio::sync::oneshot;

use crate::mock::MockRespondent;
use crate::wire::{
    Choice, CompletionBody, CompletionResponse, ErrorBody, FillMaskRequest, FillMaskResponse, NliRequest, NliResponse,
    COMPLETIONS_PATH, FILL_MASK_PATH, NLI_PATH,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ServerOptions {
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
    /// Answer this many requests with `fail_status` before serving normally.
    pub fail_first: u32,
    pub fail_status: u16,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions { host: "127.0.0.1".into(), port: 0, fail_first: 0, fail_status: 503 }
    }
}

struct AppState {
    respondent: MockRespondent,
    fail_first: u32,
    fail_status: StatusCode,
    served: AtomicU32,
}

impl AppState {
    fn injected_failure(&self) -> Option<Response> {
        let n = self.served.fetch_add(1, Ordering::SeqCst);
        (n < self.fail_first).then(|| error(self.fail_status, "injected failure"))
    }
}

fn error(status: StatusCode, message: &str) -> Response {
    (status, Json(ErrorBody { error: message.to_string() })).into_response()
}

fn provider_error(e: ProviderError) -> Response {
    let status = match e {
        ProviderError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    };
    error(status, &e.to_string())
}

async fn fill_mask(State(state): State<Arc<AppState>>, Json(req): Json<FillMaskRequest>) -> Response {
    if let Some(r) = state.injected_failure() {
        return r;
    }
    match state.respondent.fill_mask(&req.prompt, req.top_k) {
        Ok(tokens) => Json(FillMaskResponse { tokens }).into_response(),
        Err(e) => provider_error(e),
    }
}

async fn completions(State(state): State<Arc<AppState>>, Json(req): Json<CompletionBody>) -> Response {
    if let Some(r) = state.injected_failure() {
        return r;
    }
    let request = CompletionRequest {
        prompt: req.prompt,
        max_tokens: req.max_tokens,
        temperature: req.temperature,
        seed: req.seed,
    };
    match state.respondent.complete(&request) {
        Ok(text) => Json(CompletionResponse { choices: vec![Choice { text }] }).into_response(),
        Err(e) => provider_error(e),
    }
}

async fn nli(State(state): State<Arc<AppState>>, Json(req): Json<NliRequest>) -> Response {
    if let Some(r) = state.injected_failure() {
        return r;
    }
    match state.respondent.nli(&req.premise, &req.hypothesis) {
        Ok(labels) => Json(NliResponse { labels }).into_response(),
        Err(e) => provider_error(e),
    }
}

pub fn router(respondent: MockRespondent, options: &ServerOptions) -> Router {
    let state = Arc::new(AppState {
        respondent,
        fail_first: options.fail_first,
        fail_status: StatusCode::from_u16(options.fail_status).unwrap_or(StatusCode::SERVICE_UNAVAILABLE),
        served: AtomicU32::new(0),
    });
    Router::new()
        .route(FILL_MASK_PATH, post(fill_mask))
        .route(COMPLETIONS_PATH, post(completions))
        .route(NLI_PATH, post(nli))
        .with_state(state)
}

/// A mock server running on a background thread. Dropping it shuts the
/// server down.
pub struct MockServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl MockServer {
    pub fn spawn(respondent: MockRespondent) -> std::io::Result<Self> {
        Self::spawn_with(respondent, &ServerOptions::default())
    }

    /// Binds before returning, so the port is reachable once this returns.
    pub fn spawn_with(respondent: MockRespondent, options: &ServerOptions) -> std::io::Result<Self> {
        let listener = TcpListener::bind((options.host.as_str(), options.port))?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let app = router(respondent, options);
        let (tx, rx) = oneshot::channel::<()>();
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build()?;
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
            })
        });
        log::debug!("mock server listening on {addr}");
        Ok(MockServer { addr, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) -> std::io::Result<()> {
        // keep the sender alive so the server is never told to stop
        let _keep = self.shutdown.take();
        match self.thread.take().map(JoinHandle::join) {
            Some(Ok(result)) => result,
            Some(Err(_)) => Err(std::io::Error::other("mock server thread panicked")),
            None => Ok(()),
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
