//! Model access over HTTP and a deterministic mock respondent to test
//! against.

pub mod http;
pub mod mock;
pub mod server;
pub mod wire;

pub use http::{ClientStats, EndpointError, HttpProvider, ProviderEndpoint, TOKEN_ENV};
pub use mock::{generate_mock_distribution, mock_nli, MockConfigError, MockRespondent, MockRespondentConfig};
pub use server::{router, MockServer, ServerOptions};
