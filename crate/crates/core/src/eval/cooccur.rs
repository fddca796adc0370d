//! Lexicon-driven object hallucination statistics over generated captions.
//!
//! Counting is per caption: an object mentioned twice in one caption counts
//! once. An object is hallucinated in a caption when it is mentioned but
//! absent from that caption's ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::CaptionRecord;
use crate::error::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub name: String,
    /// Synonyms and plural forms folded onto `name`.
    #[serde(default)]
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    /// (word sequence, canonical name), longest forms first.
    forms: Vec<(Vec<String>, String)>,
}

#[derive(Deserialize)]
struct LexiconFile {
    objects: Vec<LexiconEntry>,
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self, EvalError> {
        if entries.is_empty() {
            return Err(EvalError::EmptyLexicon);
        }
        let mut forms = Vec::new();
        for e in &entries {
            let canonical = words(&e.name).join(" ");
            for form in std::iter::once(&e.name).chain(&e.variants) {
                let w = words(form);
                if !w.is_empty() {
                    forms.push((w, canonical.clone()));
                }
            }
        }
        forms.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(Lexicon { entries, forms })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: LexiconFile = serde_json::from_str(&text).map_err(|e| EvalError::Dataset {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Lexicon::new(file.objects)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Canonical name for an exact name or variant, ignoring case and
    /// punctuation.
    pub fn canonical(&self, name: &str) -> Option<&str> {
        let w = words(name);
        self.forms
            .iter()
            .find(|(form, _)| *form == w)
            .map(|(_, c)| c.as_str())
    }
}

/// Canonical names of lexicon objects mentioned in `caption`.
pub fn extract_objects(caption: &str, lexicon: &Lexicon) -> BTreeSet<String> {
    let w = words(caption);
    lexicon
        .forms
        .iter()
        .filter(|(form, _)| w.windows(form.len()).any(|win| win == form.as_slice()))
        .map(|(_, c)| c.clone())
        .collect()
}

fn truth_set(record: &CaptionRecord, lexicon: &Lexicon) -> BTreeSet<String> {
    record
        .truth
        .iter()
        .map(|t| {
            lexicon
                .canonical(t)
                .map(str::to_string)
                .unwrap_or_else(|| words(t).join(" "))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRatio {
    pub object: String,
    pub hallucination_count: usize,
    pub mention_count: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallucinationTable {
    pub captions: usize,
    /// Sorted by hallucination count (descending), then name.
    pub rows: Vec<ObjectRatio>,
}

pub fn hallucination_ratios(records: &[CaptionRecord], lexicon: &Lexicon) -> HallucinationTable {
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in records {
        let truth = truth_set(r, lexicon);
        for obj in extract_objects(&r.caption, lexicon) {
            let e = tally.entry(obj.clone()).or_default();
            e.1 += 1;
            if !truth.contains(&obj) {
                e.0 += 1;
            }
        }
    }
    let mut rows: Vec<ObjectRatio> = tally
        .into_iter()
        .map(|(object, (h, m))| ObjectRatio {
            object,
            hallucination_count: h,
            mention_count: m,
            ratio: h as f64 / m as f64,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.hallucination_count
            .cmp(&a.hallucination_count)
            .then_with(|| a.object.cmp(&b.object))
    });
    HallucinationTable {
        captions: records.len(),
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRow {
    pub anchor: String,
    pub object: String,
    pub hallucination_count: usize,
    pub mention_count: usize,
    pub conditional_hallucination_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub anchor: String,
    /// Captions whose ground truth contains the anchor.
    pub captions: usize,
    /// Set when no caption's ground truth contains the anchor.
    pub empty: bool,
    pub rows: Vec<ConditionalRow>,
}

/// Hallucination ratios restricted to captions of images that truly contain
/// `anchor`.
pub fn cooccurrence_ratios(
    records: &[CaptionRecord],
    lexicon: &Lexicon,
    anchor: &str,
) -> Result<ConditionalTable, EvalError> {
    let anchor = lexicon
        .canonical(anchor)
        .ok_or_else(|| EvalError::UnknownAnchor(anchor.to_string()))?
        .to_string();
    let restricted: Vec<CaptionRecord> = records
        .iter()
        .filter(|r| truth_set(r, lexicon).contains(&anchor))
        .cloned()
        .collect();
    let table = hallucination_ratios(&restricted, lexicon);
    Ok(ConditionalTable {
        empty: restricted.is_empty(),
        captions: restricted.len(),
        rows: table
            .rows
            .into_iter()
            .map(|r| ConditionalRow {
                anchor: anchor.clone(),
                object: r.object,
                hallucination_count: r.hallucination_count,
                mention_count: r.mention_count,
                conditional_hallucination_ratio: r.ratio,
            })
            .collect(),
        anchor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceStats {
    pub objects: HallucinationTable,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditional: Option<ConditionalTable>,
}
