//! Report serialization. Every report carries a metadata header with the
//! effective configuration, its hash, the seed and the model name. Reports
//! contain no timestamps, so equal inputs give equal bytes.

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::cooccur::CooccurrenceStats;
use super::metrics::percent;
use super::mme::MmeReport;
use super::pope::{PopeReport, PopeSummary};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub config_hash: String,
    pub seed: u64,
    pub model: String,
    pub config: serde_json::Value,
}

impl ReportMetadata {
    /// `config_hash` is the hex SHA-256 of the compact JSON encoding of
    /// `config` (object keys sorted).
    pub fn new(config: serde_json::Value, seed: u64, model: impl Into<String>) -> Self {
        let encoded = serde_json::to_string(&config).expect("json value serializes");
        let digest = Sha256::digest(encoded.as_bytes());
        let config_hash = digest.iter().map(|b| format!("{b:02x}")).collect();
        ReportMetadata {
            config_hash,
            seed,
            model: model.into(),
            config,
        }
    }

    fn csv_header(&self) -> String {
        let config = serde_json::to_string(&self.config).expect("json value serializes");
        format!(
            "# config_hash: {}\n# seed: {}\n# model: {}\n# config: {}\n",
            self.config_hash, self.seed, self.model, config
        )
    }
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    metadata: &'a ReportMetadata,
    #[serde(flatten)]
    body: &'a T,
}

fn to_json<T: Serialize>(meta: &ReportMetadata, body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope {
        metadata: meta,
        body,
    })
    .expect("report serializes");
    s.push('\n');
    s
}

fn csv_rows(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

pub fn pope_json(meta: &ReportMetadata, report: &PopeReport) -> String {
    to_json(meta, report)
}

pub fn pope_csv(meta: &ReportMetadata, report: &PopeReport) -> String {
    let row = |name: &str, s: &PopeSummary| {
        let m = &s.metrics;
        vec![
            name.to_string(),
            s.items.to_string(),
            s.counts.tp.to_string(),
            s.counts.fp.to_string(),
            s.counts.fn_.to_string(),
            s.counts.tn.to_string(),
            s.ambiguous.to_string(),
            percent(m.accuracy),
            percent(m.precision),
            percent(m.recall),
            percent(m.f1),
        ]
    };
    let mut rows: Vec<Vec<String>> = report.settings.iter().map(|(k, s)| row(k, s)).collect();
    rows.push(row("overall", &report.overall));
    meta.csv_header()
        + &csv_rows(
            &[
                "setting", "items", "tp", "fp", "fn", "tn", "ambiguous", "accuracy", "precision",
                "recall", "f1",
            ],
            rows,
        )
}

pub fn mme_json(meta: &ReportMetadata, report: &MmeReport) -> String {
    to_json(meta, report)
}

pub fn mme_csv(meta: &ReportMetadata, report: &MmeReport) -> String {
    let mut rows: Vec<Vec<String>> = report
        .tasks
        .iter()
        .map(|(name, t)| {
            vec![
                name.clone(),
                t.questions.to_string(),
                t.images.to_string(),
                format!("{:.2}", t.accuracy),
                format!("{:.2}", t.accuracy_plus),
                format!("{:.2}", t.score),
            ]
        })
        .collect();
    rows.push(vec![
        "total".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        format!("{:.2}", report.total),
    ]);
    meta.csv_header()
        + &csv_rows(
            &["task", "questions", "images", "accuracy", "accuracy_plus", "score"],
            rows,
        )
}

pub fn cooccur_json(meta: &ReportMetadata, stats: &CooccurrenceStats) -> String {
    to_json(meta, stats)
}

/// Object table, followed by the conditional table when present.
pub fn cooccur_csv(meta: &ReportMetadata, stats: &CooccurrenceStats) -> String {
    let rows = stats
        .objects
        .rows
        .iter()
        .map(|r| {
            vec![
                r.object.clone(),
                r.hallucination_count.to_string(),
                r.mention_count.to_string(),
                format!("{:.4}", r.ratio),
            ]
        })
        .collect();
    let mut out = meta.csv_header()
        + &csv_rows(
            &["object", "hallucination_count", "mention_count", "ratio"],
            rows,
        );
    if let Some(c) = &stats.conditional {
        out.push_str(&format!(
            "# conditional on anchor: {} (captions: {}, empty: {})\n",
            c.anchor, c.captions, c.empty
        ));
        let rows = c
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.anchor.clone(),
                    r.object.clone(),
                    r.hallucination_count.to_string(),
                    r.mention_count.to_string(),
                    format!("{:.4}", r.conditional_hallucination_ratio),
                ]
            })
            .collect();
        out.push_str(&csv_rows(
            &[
                "anchor",
                "object",
                "hallucination_count",
                "mention_count",
                "conditional_hallucination_ratio",
            ],
            rows,
        ));
    }
    out
}
