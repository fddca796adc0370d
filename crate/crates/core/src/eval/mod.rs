//! Benchmark harnesses and caption hallucination analyses.

mod answer;
mod cooccur;
mod dataset;
mod harness;
mod metrics;
mod mme;
mod pope;
pub mod report;

pub use answer::{parse_binary_answer, BinaryAnswer, Label, ANSWER_WINDOW};
pub use cooccur::{
    cooccurrence_ratios, extract_objects, hallucination_ratios, ConditionalRow, ConditionalTable,
    CooccurrenceStats, HallucinationTable, Lexicon, LexiconEntry, ObjectRatio,
};
pub use dataset::{parse_jsonl, read_jsonl, CaptionRecord, MmeItem, MmeTask, PopeItem};
pub use harness::{item_seed, DecodedAnswer};
pub use metrics::{compute_metrics, percent, ConfusionCounts, Metrics};
pub use mme::{check_pairing, run_mme_subset, score_outcomes, MmeOutcome, MmeReport, TaskScore};
pub use pope::{run_pope, PopeOutcome, PopeReport, PopeSummary};
pub use report::ReportMetadata;
