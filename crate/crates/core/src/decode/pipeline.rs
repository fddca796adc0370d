//! One decoding step: plausibility head, contrast, repetition penalty,
//! softmax and nucleus truncation, in that order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::tree::{eval_with_standard, ContrastNode};
use crate::error::DecodeError;
use crate::models::LogitSource;
use crate::types::{softmax, DecodeConfig, Distribution, LogitVector, TokenId};

/// Tokens whose standard probability reaches `alpha` times the largest one.
/// Never empty for a valid distribution: the argmax always qualifies.
pub fn plausibility_head(standard_probs: &Distribution, alpha: f64) -> BTreeSet<TokenId> {
    let threshold = alpha * standard_probs.max_prob();
    standard_probs
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= threshold)
        .map(|(i, _)| TokenId(i as u32))
        .collect()
}

/// Divides positive logits and multiplies negative ones by `penalty` for
/// each distinct token already generated.
pub fn apply_repetition_penalty(logits: &mut LogitVector, generated: &[TokenId], penalty: f64) {
    if penalty == 1.0 {
        return;
    }
    let seen: BTreeSet<TokenId> = generated.iter().copied().collect();
    let values = logits.values_mut();
    for t in seen {
        let v = &mut values[t.index()];
        if *v > 0.0 {
            *v /= penalty;
        } else if *v < 0.0 {
            *v *= penalty;
        }
    }
}

/// Keeps the smallest set of most-probable tokens whose cumulative mass
/// reaches `top_p` (ties go to the lower id) and renormalizes. `top_p >= 1`
/// returns the input unchanged.
pub fn top_p_filter(dist: &Distribution, top_p: f64) -> Distribution {
    if top_p >= 1.0 {
        return dist.clone();
    }
    let probs = dist.probs();
    let mut order: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut kept = Vec::new();
    let mut cumulative = 0.0;
    for i in order {
        kept.push(i);
        cumulative += probs[i];
        if cumulative >= top_p {
            break;
        }
    }
    let mut out = vec![0.0; probs.len()];
    for i in kept {
        out[i] = probs[i] / cumulative;
    }
    Distribution::new(out).expect("renormalized nucleus is a distribution")
}

/// Everything computed for one step before a token is chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub standard_logits: LogitVector,
    pub contrasted_logits: LogitVector,
    /// Contrasted logits after head masking and repetition penalty.
    pub processed_logits: LogitVector,
    pub head: BTreeSet<TokenId>,
    pub distribution: Distribution,
}

/// Per-step record kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub standard_logits: LogitVector,
    pub contrasted_logits: LogitVector,
    pub head_mask: Vec<TokenId>,
    pub distribution: Distribution,
    pub chosen: TokenId,
}

impl Step {
    pub fn into_trace(self, chosen: TokenId) -> StepTrace {
        StepTrace {
            standard_logits: self.standard_logits,
            contrasted_logits: self.contrasted_logits,
            head_mask: self.head.into_iter().collect(),
            distribution: self.distribution,
            chosen,
        }
    }
}

/// Runs the full step pipeline. The plausibility head is computed from the
/// standard leaf alone.
pub fn step_distribution<M: LogitSource + ?Sized>(
    tree: &ContrastNode,
    model: &M,
    prefix_tokens: &[TokenId],
    config: &DecodeConfig,
) -> Result<Step, DecodeError> {
    let (contrasted, standard_logits) = eval_with_standard(tree, model, prefix_tokens)?;
    let standard_probs = softmax(&standard_logits)?;
    let head = plausibility_head(&standard_probs, config.alpha);

    let mut processed = contrasted.clone();
    processed.mask_outside(&head);
    apply_repetition_penalty(&mut processed, prefix_tokens, config.repetition_penalty);
    let distribution = top_p_filter(&softmax(&processed)?, config.top_p);

    Ok(Step {
        standard_logits,
        contrasted_logits: contrasted,
        processed_logits: processed,
        head,
        distribution,
    })
}
