//! Scripted fixtures for tests, benches and demos.
//!
//! The yes/no fixtures use a three-token vocabulary `["Yes", "No", "</s>"]`.
//! A scripted entry answers at the first step; every later step falls back to
//! a default vector that strongly prefers end-of-sequence.

use crate::eval::{Label, PopeItem};
use crate::instruction::{compose, Channel, InstructionSpec};
use crate::models::{MockTable, ModelInfo, QueryContext, VisualContextRef};
use crate::types::{LogitVector, TokenId};

pub const YES: TokenId = TokenId(0);
pub const NO: TokenId = TokenId(1);
pub const EOS: TokenId = TokenId(2);

/// Role prefix used by the fixtures.
pub const PREFIX: &str = "You are a confused object detector,";

pub fn yes_no_info(name: &str) -> ModelInfo {
    ModelInfo {
        name: name.into(),
        vocab_size: 3,
        eos_token: EOS,
        tokens: Some(vec!["Yes".into(), "No".into(), "</s>".into()]),
    }
}

pub fn yes_no_table(name: &str) -> MockTable {
    MockTable::new(
        yes_no_info(name),
        LogitVector::new(vec![0.0, 0.0, 10.0]).expect("finite"),
    )
    .expect("valid table")
}

pub fn visual(id: &str) -> VisualContextRef {
    VisualContextRef::new(id).expect("non-empty id")
}

/// Stores first-step `(yes, no)` logits for the query under `instruction`.
pub fn script(
    table: &mut MockTable,
    visual_id: &str,
    instruction: &InstructionSpec,
    yes: f64,
    no: f64,
) {
    let composed = compose(instruction).expect("valid instruction");
    let key = QueryContext {
        visual: visual(visual_id),
        fusion_text: composed.fusion_text,
        llm_text: composed.llm_text,
        prefix_tokens: vec![],
    };
    table
        .insert(key, LogitVector::new(vec![yes, no, -5.0]).expect("finite"))
        .expect("valid entry");
}

pub fn pope_item(id: &str, visual_id: &str, text: &str, label: Label) -> PopeItem {
    PopeItem {
        question_id: id.into(),
        visual: visual(visual_id),
        question_text: text.into(),
        label,
        setting: "default".into(),
    }
}

/// How a probed object relates to its image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Present,
    Absent,
    /// Absent, but it co-occurs with an object that is present.
    CoOccurring,
}

/// POPE fixture driven by a biased-model rule. Grounded evidence gives
/// `(yes, no) = (3, 0)` for present objects and `(0, 1.5)` for absent ones;
/// co-occurring absent objects get an extra `+2` on "yes". The disturbed
/// instruction halves the grounded evidence and doubles the bias.
pub fn biased_pope_fixture(probes: &[Probe]) -> (MockTable, Vec<PopeItem>) {
    let mut table = yes_no_table("biased-pope");
    let mut items = Vec::new();
    for (i, probe) in probes.iter().enumerate() {
        let id = format!("q{i:03}");
        let image = format!("img{i:03}");
        let text = format!("Is there an object {i} in the image?");
        let (evidence, bias, label) = match probe {
            Probe::Present => ((3.0, 0.0), 0.0, Label::Yes),
            Probe::Absent => ((0.0, 1.5), 0.0, Label::No),
            Probe::CoOccurring => ((0.0, 1.5), 2.0, Label::No),
        };
        script(
            &mut table,
            &image,
            &InstructionSpec::standard(text.clone()),
            evidence.0 + bias,
            evidence.1,
        );
        script(
            &mut table,
            &image,
            &InstructionSpec::disturbed(text.clone(), PREFIX, Channel::Fusion),
            evidence.0 / 2.0 + 2.0 * bias,
            evidence.1 / 2.0,
        );
        items.push(pope_item(&id, &image, &text, label));
    }
    (table, items)
}
