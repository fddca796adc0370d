use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::answer::{parse_binary_answer, BinaryAnswer};
use crate::decode::{decode_sequence, TreeTemplate};
use crate::error::EvalError;
use crate::models::{LogitSource, VisualContextRef};
use crate::types::{DecodeConfig, TokenId};

/// Per-item seed: the first eight bytes (little endian) of
/// SHA-256(run seed as 8 LE bytes || item key). Independent of scheduling.
pub fn item_seed(run_seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// A decoded yes/no answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedAnswer {
    pub tokens: Vec<TokenId>,
    pub response: String,
    pub answer: BinaryAnswer,
}

pub(crate) struct AnswerJob<'a> {
    pub key: String,
    pub visual: &'a VisualContextRef,
    pub question: &'a str,
}

/// Decodes every job on a pool of `workers` threads. Results come back in
/// job order; the first failing job (in that order) is reported.
pub(crate) fn decode_answers<M: LogitSource + ?Sized>(
    jobs: &[AnswerJob<'_>],
    template: &TreeTemplate,
    model: &M,
    config: &DecodeConfig,
    workers: usize,
) -> Result<Vec<DecodedAnswer>, EvalError> {
    if workers == 0 {
        return Err(EvalError::Workers("must be at least 1".into()));
    }
    let info = model.info();
    if info.tokens.is_none() {
        return Err(EvalError::NoTokenTable(info.name.clone()));
    }
    let run_one = |job: &AnswerJob<'_>| -> Result<DecodedAnswer, EvalError> {
        let wrap = |source| EvalError::Decode {
            id: job.key.clone(),
            source,
        };
        let tree = template.instantiate(job.visual, job.question).map_err(wrap)?;
        let cfg = DecodeConfig {
            seed: item_seed(config.seed, &job.key),
            ..config.clone()
        };
        let out = decode_sequence(&tree, model, &cfg).map_err(wrap)?;
        let response = info.detokenize(&out.tokens).unwrap_or_default();
        let answer = parse_binary_answer(&response);
        if answer == BinaryAnswer::Ambiguous {
            tracing::info!(item = %job.key, %response, "ambiguous answer scored as no");
        }
        Ok(DecodedAnswer {
            tokens: out.tokens,
            response,
            answer,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EvalError::Workers(e.to_string()))?;
    let results: Vec<Result<DecodedAnswer, EvalError>> =
        pool.install(|| jobs.par_iter().map(run_one).collect());
    results.into_iter().collect()
}
