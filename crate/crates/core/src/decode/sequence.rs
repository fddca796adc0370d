use serde::{Deserialize, Serialize};

use super::pipeline::{step_distribution, StepTrace};
use super::sampler::TokenSampler;
use super::tree::ContrastNode;
use crate::error::DecodeError;
use crate::models::LogitSource;
use crate::types::{argmax_token, DecodeConfig, TokenId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutput {
    /// Generated tokens, without the terminating end-of-sequence token. A
    /// configured stop token is kept.
    pub tokens: Vec<TokenId>,
    pub traces: Vec<StepTrace>,
}

/// Autoregressive decoding of `tree` until end-of-sequence, a stop token, or
/// `max_tokens`. Sampling consumes one draw per step from a generator seeded
/// with `config.seed`; greedy mode takes the argmax and draws nothing.
pub fn decode_sequence<M: LogitSource + ?Sized>(
    tree: &ContrastNode,
    model: &M,
    config: &DecodeConfig,
) -> Result<DecodeOutput, DecodeError> {
    config.validate()?;
    tree.validate()?;
    let eos = model.info().eos_token;
    let mut sampler = TokenSampler::new(config.seed);
    let mut tokens = Vec::new();
    let mut traces = Vec::new();

    for _ in 0..config.max_tokens {
        let step = step_distribution(tree, model, &tokens, config)?;
        let chosen = if config.greedy {
            argmax_token(&step.processed_logits)?
        } else {
            sampler.sample(&step.distribution)
        };
        debug_assert!(step.head.contains(&chosen));
        traces.push(step.into_trace(chosen));
        if chosen == eos {
            break;
        }
        tokens.push(chosen);
        if config.stop_tokens.contains(&chosen) {
            break;
        }
    }
    Ok(DecodeOutput { tokens, traces })
}
