use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::answer::{BinaryAnswer, Label};
use super::dataset::PopeItem;
use super::harness::{decode_answers, AnswerJob};
use super::metrics::{compute_metrics, ConfusionCounts, Metrics};
use crate::decode::TreeTemplate;
use crate::error::EvalError;
use crate::models::LogitSource;
use crate::types::{DecodeConfig, TokenId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopeOutcome {
    pub question_id: String,
    pub setting: String,
    pub label: Label,
    pub answer: BinaryAnswer,
    pub predicted: Label,
    pub response: String,
    pub tokens: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopeSummary {
    pub items: usize,
    pub ambiguous: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

impl PopeSummary {
    fn from_outcomes<'a>(outcomes: impl Iterator<Item = &'a PopeOutcome>) -> Result<Self, EvalError> {
        let mut counts = ConfusionCounts::default();
        let mut items = 0;
        let mut ambiguous = 0;
        for o in outcomes {
            counts.record(o.label, o.predicted);
            items += 1;
            if o.answer == BinaryAnswer::Ambiguous {
                ambiguous += 1;
            }
        }
        Ok(PopeSummary {
            items,
            ambiguous,
            counts,
            metrics: compute_metrics(&counts)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopeReport {
    pub overall: PopeSummary,
    pub settings: BTreeMap<String, PopeSummary>,
    /// Per-item outcomes in question_id order.
    pub outcomes: Vec<PopeOutcome>,
}

impl PopeReport {
    /// Rebuilds every summary from the stored outcomes.
    pub fn recount(&self) -> Result<(PopeSummary, BTreeMap<String, PopeSummary>), EvalError> {
        let overall = PopeSummary::from_outcomes(self.outcomes.iter())?;
        let settings: BTreeSet<&str> = self.outcomes.iter().map(|o| o.setting.as_str()).collect();
        let mut per = BTreeMap::new();
        for s in settings {
            per.insert(
                s.to_string(),
                PopeSummary::from_outcomes(self.outcomes.iter().filter(|o| o.setting == s))?,
            );
        }
        Ok((overall, per))
    }
}

/// Decodes every probe with the templated tree, parses the answers and
/// tallies confusion counts overall and per setting.
pub fn run_pope<M: LogitSource + ?Sized>(
    dataset: &[PopeItem],
    template: &TreeTemplate,
    model: &M,
    config: &DecodeConfig,
    workers: usize,
) -> Result<PopeReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut items: Vec<&PopeItem> = dataset.iter().collect();
    items.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    if let Some(w) = items.windows(2).find(|w| w[0].question_id == w[1].question_id) {
        return Err(EvalError::Dataset {
            path: "<pope>".into(),
            line: 0,
            message: format!("duplicate question_id {:?}", w[0].question_id),
        });
    }
    let jobs: Vec<AnswerJob<'_>> = items
        .iter()
        .map(|it| AnswerJob {
            key: it.question_id.clone(),
            visual: &it.visual,
            question: &it.question_text,
        })
        .collect();
    let answers = decode_answers(&jobs, template, model, config, workers)?;

    let outcomes: Vec<PopeOutcome> = items
        .iter()
        .zip(answers)
        .map(|(it, a)| PopeOutcome {
            question_id: it.question_id.clone(),
            setting: it.setting.clone(),
            label: it.label,
            answer: a.answer,
            predicted: a.answer.scored(),
            response: a.response,
            tokens: a.tokens,
        })
        .collect();
    let mut report = PopeReport {
        overall: PopeSummary::from_outcomes(outcomes.iter())?,
        settings: BTreeMap::new(),
        outcomes,
    };
    let (_, settings) = report.recount()?;
    report.settings = settings;
    Ok(report)
}
