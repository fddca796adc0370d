//! Contrastive decoding engine.

mod pipeline;
mod sampler;
mod sequence;
mod tree;

pub use pipeline::{
    apply_repetition_penalty, plausibility_head, step_distribution, top_p_filter, Step, StepTrace,
};
pub use sampler::{sample_token, TokenSampler};
pub use sequence::{decode_sequence, DecodeOutput};
pub use tree::{eval_tree, ContrastNode, Method, TreeTemplate};
