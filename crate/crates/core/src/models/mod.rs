//! Instruction-conditioned logit sources.
//!
//! A model is anything that maps a [`QueryContext`] (visual handle, the two
//! instruction slots and the tokens generated so far) to next-token logits.
//! Three implementations ship here: an exact-lookup [`MockTable`], the
//! [`SyntheticBiasModel`] which injects co-occurrence bias that grows under
//! disturbance, and a [`RemoteModel`] speaking the JSON wire protocol served
//! by [`server`].

mod mock;
mod remote;
pub mod server;
mod synthetic;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::types::{LogitVector, TokenId};

pub use mock::MockTable;
pub use remote::{RemoteModel, REMOTE_URL_ENV};
pub use server::{serve_mock, spawn_mock_server, MockServerHandle, ServerOptions};
pub use synthetic::{BiasPair, SyntheticBiasModel};

/// Opaque handle naming a visual context. Never interpreted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VisualContextRef(String);

impl VisualContextRef {
    pub fn new(id: impl Into<String>) -> Result<Self, ModelError> {
        let id = id.into();
        if id.is_empty() {
            return Err(ModelError::Invalid("visual context id is empty".into()));
        }
        Ok(VisualContextRef(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Handle for a derived context, e.g. a distorted copy of an image.
    pub fn with_suffix(&self, suffix: &str) -> Self {
        VisualContextRef(format!("{}{suffix}", self.0))
    }
}

impl TryFrom<String> for VisualContextRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        VisualContextRef::new(s).map_err(|e| e.to_string())
    }
}

impl From<VisualContextRef> for String {
    fn from(v: VisualContextRef) -> String {
        v.0
    }
}

impl fmt::Display for VisualContextRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Conditioning for one next-token query. Doubles as the `/logits` request
/// body and as the mock lookup key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QueryContext {
    #[serde(rename = "visual_id")]
    pub visual: VisualContextRef,
    pub fusion_text: String,
    pub llm_text: String,
    #[serde(default)]
    pub prefix_tokens: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub vocab_size: usize,
    pub eos_token: TokenId,
    /// Optional token strings, indexed by token id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
}

impl ModelInfo {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vocab_size == 0 {
            return Err(ModelError::Invalid("vocab_size must be positive".into()));
        }
        if self.eos_token.index() >= self.vocab_size {
            return Err(ModelError::Invalid(format!(
                "eos_token {} is outside the vocabulary of size {}",
                self.eos_token, self.vocab_size
            )));
        }
        if let Some(tokens) = &self.tokens {
            if tokens.len() != self.vocab_size {
                return Err(ModelError::Invalid(format!(
                    "token table has {} entries for a vocabulary of size {}",
                    tokens.len(),
                    self.vocab_size
                )));
            }
        }
        Ok(())
    }

    /// Concatenates token strings. `None` when the model has no token table.
    pub fn detokenize(&self, tokens: &[TokenId]) -> Option<String> {
        let table = self.tokens.as_ref()?;
        Some(tokens.iter().map(|t| table[t.index()].as_str()).collect())
    }

    pub fn check_context(&self, ctx: &QueryContext) -> Result<(), ModelError> {
        match ctx.prefix_tokens.iter().find(|t| t.index() >= self.vocab_size) {
            Some(t) => Err(ModelError::TokenOutOfRange {
                token: t.0,
                vocab_size: self.vocab_size,
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn check_logits(&self, logits: &LogitVector) -> Result<(), ModelError> {
        if logits.len() != self.vocab_size {
            return Err(ModelError::Protocol(format!(
                "expected {} logits, got {}",
                self.vocab_size,
                logits.len()
            )));
        }
        Ok(())
    }
}

/// Source of next-token logits. Implementations are read-only after
/// construction and may be queried from several threads at once.
pub trait LogitSource: Send + Sync {
    fn info(&self) -> &ModelInfo;

    fn next_logits(&self, ctx: &QueryContext) -> Result<LogitVector, ModelError>;
}

impl<M: LogitSource + ?Sized> LogitSource for Box<M> {
    fn info(&self) -> &ModelInfo {
        (**self).info()
    }

    fn next_logits(&self, ctx: &QueryContext) -> Result<LogitVector, ModelError> {
        (**self).next_logits(ctx)
    }
}

impl<M: LogitSource + ?Sized> LogitSource for Arc<M> {
    fn info(&self) -> &ModelInfo {
        (**self).info()
    }

    fn next_logits(&self, ctx: &QueryContext) -> Result<LogitVector, ModelError> {
        (**self).next_logits(ctx)
    }
}

pub(crate) fn parse_logits(values: Vec<f64>, what: &str) -> Result<LogitVector, ModelError> {
    LogitVector::new(values).map_err(|e| ModelError::Invalid(format!("{what}: {e}")))
}
