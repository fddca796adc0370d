//! MME-style scoring. Each task scores `accuracy + accuracy_plus` in
//! percent, where accuracy_plus is the share of images whose questions were
//! all answered correctly (maximum 200 per task). The subset total sums the
//! existence, count, position and color tasks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::answer::{BinaryAnswer, Label};
use super::dataset::{MmeItem, MmeTask};
use super::harness::{decode_answers, AnswerJob};
use crate::decode::TreeTemplate;
use crate::error::EvalError;
use crate::models::LogitSource;
use crate::types::DecodeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmeOutcome {
    pub image_id: String,
    pub task: MmeTask,
    pub question: String,
    pub label: Label,
    pub answer: BinaryAnswer,
    pub correct: bool,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub questions: usize,
    pub images: usize,
    /// Percent of questions answered correctly.
    pub accuracy: f64,
    /// Percent of images with every question correct.
    pub accuracy_plus: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmeReport {
    pub tasks: BTreeMap<String, TaskScore>,
    /// Sum of the four hallucination-task scores present in the data.
    pub total: f64,
    pub outcomes: Vec<MmeOutcome>,
}

/// Every image must carry an even number of questions per task.
pub fn check_pairing(items: &[MmeItem]) -> Result<(), EvalError> {
    let mut counts: BTreeMap<(&MmeTask, &str), usize> = BTreeMap::new();
    for it in items {
        *counts.entry((&it.task, it.image_id.as_str())).or_default() += 1;
    }
    match counts.into_iter().find(|(_, n)| n % 2 != 0) {
        Some(((task, image), count)) => Err(EvalError::Unpaired {
            task: task.name().to_string(),
            image_id: image.to_string(),
            count,
        }),
        None => Ok(()),
    }
}

/// Scores already-judged outcomes.
pub fn score_outcomes(outcomes: &[MmeOutcome]) -> (BTreeMap<String, TaskScore>, f64) {
    let mut by_task: BTreeMap<&MmeTask, BTreeMap<&str, (usize, usize)>> = BTreeMap::new();
    for o in outcomes {
        let e = by_task
            .entry(&o.task)
            .or_default()
            .entry(o.image_id.as_str())
            .or_default();
        e.0 += 1;
        e.1 += usize::from(o.correct);
    }
    let mut tasks = BTreeMap::new();
    let mut total = 0.0;
    for (task, images) in by_task {
        let questions: usize = images.values().map(|(n, _)| n).sum();
        let correct: usize = images.values().map(|(_, c)| c).sum();
        let all_correct = images.values().filter(|(n, c)| n == c).count();
        let accuracy = 100.0 * correct as f64 / questions as f64;
        let accuracy_plus = 100.0 * all_correct as f64 / images.len() as f64;
        let score = accuracy + accuracy_plus;
        if task.is_hallucination_task() {
            total += score;
        }
        tasks.insert(
            task.name().to_string(),
            TaskScore {
                questions,
                images: images.len(),
                accuracy,
                accuracy_plus,
                score,
            },
        );
    }
    (tasks, total)
}

pub fn run_mme_subset<M: LogitSource + ?Sized>(
    dataset: &[MmeItem],
    template: &TreeTemplate,
    model: &M,
    config: &DecodeConfig,
    workers: usize,
) -> Result<MmeReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    check_pairing(dataset)?;
    let mut items: Vec<(usize, &MmeItem)> = dataset.iter().enumerate().collect();
    items.sort_by(|(ia, a), (ib, b)| {
        (&a.task, &a.image_id, &a.question_text, ia).cmp(&(&b.task, &b.image_id, &b.question_text, ib))
    });
    let jobs: Vec<AnswerJob<'_>> = items
        .iter()
        .map(|(_, it)| AnswerJob {
            key: format!("{}\u{1f}{}\u{1f}{}", it.task.name(), it.image_id, it.question_text),
            visual: &it.visual,
            question: &it.question_text,
        })
        .collect();
    let answers = decode_answers(&jobs, template, model, config, workers)?;
    let outcomes: Vec<MmeOutcome> = items
        .iter()
        .zip(answers)
        .map(|((_, it), a)| MmeOutcome {
            image_id: it.image_id.clone(),
            task: it.task.clone(),
            question: it.question_text.clone(),
            label: it.label,
            answer: a.answer,
            correct: a.answer.scored() == it.label,
            response: a.response,
        })
        .collect();
    let (tasks, total) = score_outcomes(&outcomes);
    Ok(MmeReport {
        tasks,
        total,
        outcomes,
    })
}
