//! Versioned JSON documents written and read by the toolkit.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected format {expected:?}, found {found:?}")]
    WrongFormat { expected: &'static str, found: String },
}

/// A JSON document carrying a `"format": "<name>/<version>"` tag.
pub trait Document: Serialize + DeserializeOwned {
    const FORMAT: &'static str;

    fn format_tag(&self) -> &str;

    fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents are serializable");
        s.push('\n');
        s
    }

    fn from_json(json: &str) -> Result<Self, DocumentError> {
        let value: serde_json::Value = serde_json::from_str(json)?;
        let found = value.get("format").and_then(|f| f.as_str()).unwrap_or_default();
        if found != Self::FORMAT {
            return Err(DocumentError::WrongFormat { expected: Self::FORMAT, found: found.to_string() });
        }
        Ok(serde_json::from_str(json)?)
    }

    fn write(&self, path: impl AsRef<Path>) -> Result<(), DocumentError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|source| DocumentError::Io { path: path.display().to_string(), source })
    }

    fn read(path: impl AsRef<Path>) -> Result<Self, DocumentError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path)
            .map_err(|source| DocumentError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&json)
    }
}

/// Implements [`Document`] for a struct with a `format: String` field.
macro_rules! document {
    ($ty:ty, $tag:expr) => {
        impl $crate::document::Document for $ty {
            const FORMAT: &'static str = $tag;
            fn format_tag(&self) -> &str {
                &self.format
            }
        }
    };
}
pub(crate) use document;
