use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LogitSource, ModelInfo, QueryContext};
use crate::error::ModelError;
use crate::types::{LogitVector, TokenId};

/// A co-occurrence link: when `anchor` is present in the image, the model
/// leans towards `hallucinated` by `weight` logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasPair {
    pub anchor: TokenId,
    pub hallucinated: TokenId,
    pub weight: f64,
}

/// Model whose only behavior is statistical bias: a fixed base vector plus
/// co-occurrence boosts triggered by objects present in the visual context.
/// When either instruction slot contains `disturbance_marker` every boost is
/// multiplied by `disturbance_gain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBiasModel {
    pub info: ModelInfo,
    pub base_logits: LogitVector,
    #[serde(default)]
    pub present_objects: BTreeMap<String, BTreeSet<TokenId>>,
    #[serde(default)]
    pub bias_pairs: Vec<BiasPair>,
    pub disturbance_gain: f64,
    pub disturbance_marker: String,
}

impl SyntheticBiasModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |m: String| Err(ModelError::Invalid(m));
        self.info.validate()?;
        let vocab = self.info.vocab_size;
        if self.base_logits.len() != vocab {
            return invalid(format!(
                "base_logits has length {}, vocabulary size is {vocab}",
                self.base_logits.len()
            ));
        }
        if let Some(i) = self.base_logits.values().iter().position(|v| !v.is_finite()) {
            return invalid(format!("base_logits[{i}] is not finite"));
        }
        if !(self.disturbance_gain.is_finite() && self.disturbance_gain > 1.0) {
            return invalid("disturbance_gain must be > 1".into());
        }
        if self.disturbance_marker.is_empty() {
            return invalid("disturbance_marker must be non-empty".into());
        }
        for (i, p) in self.bias_pairs.iter().enumerate() {
            if p.anchor == p.hallucinated {
                return invalid(format!("bias pair {i}: anchor equals hallucinated token"));
            }
            if !(p.weight.is_finite() && p.weight > 0.0) {
                return invalid(format!("bias pair {i}: weight must be > 0"));
            }
            if p.anchor.index() >= vocab || p.hallucinated.index() >= vocab {
                return invalid(format!("bias pair {i}: token outside vocabulary"));
            }
        }
        for (visual, objects) in &self.present_objects {
            if objects.iter().any(|t| t.index() >= vocab) {
                return invalid(format!("present objects of {visual:?}: token outside vocabulary"));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let model: SyntheticBiasModel =
            serde_json::from_str(&text).map_err(|source| ModelError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        model.validate()?;
        Ok(model)
    }

    pub fn is_disturbed(&self, ctx: &QueryContext) -> bool {
        ctx.fusion_text.contains(&self.disturbance_marker)
            || ctx.llm_text.contains(&self.disturbance_marker)
    }
}

impl LogitSource for SyntheticBiasModel {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn next_logits(&self, ctx: &QueryContext) -> Result<LogitVector, ModelError> {
        self.info.check_context(ctx)?;
        let mut logits = self.base_logits.clone();
        let Some(present) = self.present_objects.get(ctx.visual.as_str()) else {
            return Ok(logits);
        };
        let gain = if self.is_disturbed(ctx) {
            self.disturbance_gain
        } else {
            1.0
        };
        let values = logits.values_mut();
        for pair in &self.bias_pairs {
            if present.contains(&pair.anchor) {
                values[pair.hallucinated.index()] += gain * pair.weight;
            }
        }
        Ok(logits)
    }
}
