//! Instruction contrastive decoding.
//!
//! The decoder queries a model twice per step: once with the standard
//! instruction and once with a disturbance instruction (the same query with
//! a role prefix such as `"You are a confused object detector,"`). Tokens the
//! disturbed query promotes are penalized by subtracting its logits, scaled
//! by `lambda`, from the standard logits. Candidates are restricted to the
//! plausibility head of the standard distribution, the tokens whose
//! probability is at least `alpha` times the best one.
//!
//! Contrasts compose as trees ([`decode::ContrastNode`]), so visual
//! contrast and the combined instruction + visual variant use the same
//! engine. The [`eval`] module scores decoders on yes/no probing benchmarks
//! and measures object hallucination in captions.

pub mod decode;
pub mod error;
pub mod eval;
pub mod instruction;
pub mod models;
pub mod testing;
pub mod types;

pub use decode::{
    decode_sequence, eval_tree, plausibility_head, sample_token, step_distribution, ContrastNode,
    DecodeOutput, Method, StepTrace, TokenSampler, TreeTemplate,
};
pub use error::{ConfigError, DecodeError, EvalError, InstructionError, ModelError, NumericError};
pub use instruction::{compose, Channel, InstructionSpec, PrefixCatalog};
pub use models::{
    LogitSource, MockTable, ModelInfo, QueryContext, RemoteModel, SyntheticBiasModel,
    VisualContextRef,
};
pub use types::{argmax_token, softmax, DecodeConfig, Distribution, LogitVector, TokenId, MASKED};
