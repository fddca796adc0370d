//! Value types and numerical primitives shared by the decoder and the
//! evaluation harness.
//!
//! Masked vocabulary entries are carried inside [`LogitVector`] as negative
//! infinity. Every other entry is finite.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::NumericError;

/// Index into a model vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for TokenId {
    fn from(v: u32) -> Self {
        TokenId(v)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Sentinel used for tokens removed from the candidate pool.
pub const MASKED: f64 = f64::NEG_INFINITY;

/// Per-token scores over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    /// Builds a vector of model scores. Every entry must be finite.
    pub fn new(values: Vec<f64>) -> Result<Self, NumericError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(NumericError::NonFinite { index: i });
        }
        Ok(LogitVector(values))
    }

    /// Accepts finite entries and the [`MASKED`] sentinel; rejects NaN and +inf.
    pub fn with_mask(values: Vec<f64>) -> Result<Self, NumericError> {
        if let Some(i) = values.iter().position(|v| !(v.is_finite() || *v == MASKED)) {
            return Err(NumericError::NonFinite { index: i });
        }
        Ok(LogitVector(values))
    }

    pub fn zeros(len: usize) -> Self {
        LogitVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn is_masked(&self, token: TokenId) -> bool {
        self.0[token.index()] == MASKED
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// `self - scale * other`, elementwise.
    pub fn sub_scaled(&self, other: &LogitVector, scale: f64) -> Result<LogitVector, NumericError> {
        if self.len() != other.len() {
            return Err(NumericError::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(LogitVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a - scale * b)
                .collect(),
        ))
    }

    /// Sets every token outside `keep` to [`MASKED`].
    pub fn mask_outside(&mut self, keep: &BTreeSet<TokenId>) {
        for (i, v) in self.0.iter_mut().enumerate() {
            if !keep.contains(&TokenId(i as u32)) {
                *v = MASKED;
            }
        }
    }
}

/// Normalized probabilities over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Validates non-negativity and the unit-sum tolerance.
    pub fn new(probs: Vec<f64>) -> Result<Self, NumericError> {
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(NumericError::NonFinite { index: i });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(NumericError::NotNormalized { sum });
        }
        Ok(Distribution(probs))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn prob(&self, token: TokenId) -> f64 {
        self.0[token.index()]
    }

    pub fn max_prob(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

/// Allowed deviation of a distribution's sum from one.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Softmax over the finite entries; masked entries map to exactly zero.
pub fn softmax(logits: &LogitVector) -> Result<Distribution, NumericError> {
    let max = logits
        .values()
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(NumericError::EmptySupport);
    }
    let exps: Vec<f64> = logits
        .values()
        .iter()
        .map(|&v| if v == MASKED { 0.0 } else { (v - max).exp() })
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(Distribution(exps.into_iter().map(|e| e / total).collect()))
}

/// Lowest token id attaining the maximum finite logit.
pub fn argmax_token(logits: &LogitVector) -> Result<TokenId, NumericError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in logits.values().iter().enumerate() {
        if v == MASKED {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| TokenId(i as u32))
        .ok_or(NumericError::EmptySupport)
}

fn default_lambda() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    0.1
}
fn default_one() -> f64 {
    1.0
}
fn default_max_tokens() -> usize {
    64
}

/// Decoding hyperparameters. Defaults: `lambda = 1`, `alpha = 0.1`,
/// `top_p = 1`, `repetition_penalty = 1`, sampling (not greedy), one beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_one")]
    pub top_p: f64,
    #[serde(default = "default_one")]
    pub repetition_penalty: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub greedy: bool,
    #[serde(default)]
    pub stop_tokens: BTreeSet<TokenId>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            lambda: default_lambda(),
            alpha: default_alpha(),
            top_p: 1.0,
            repetition_penalty: 1.0,
            max_tokens: default_max_tokens(),
            seed: 0,
            greedy: false,
            stop_tokens: BTreeSet::new(),
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), crate::error::ConfigError> {
        use crate::error::ConfigError;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(ConfigError::OutOfRange("lambda must be a finite value >= 0"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ConfigError::OutOfRange("alpha must lie in (0, 1]"));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ConfigError::OutOfRange("top_p must lie in (0, 1]"));
        }
        if !(self.repetition_penalty.is_finite() && self.repetition_penalty > 0.0) {
            return Err(ConfigError::OutOfRange("repetition_penalty must be > 0"));
        }
        if self.max_tokens == 0 {
            return Err(ConfigError::OutOfRange("max_tokens must be positive"));
        }
        Ok(())
    }
}
