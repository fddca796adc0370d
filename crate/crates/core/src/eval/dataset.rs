//! JSON Lines dataset files. Blank lines are skipped; errors name the line.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::answer::Label;
use crate::error::EvalError;
use crate::models::VisualContextRef;

pub fn parse_jsonl<T: DeserializeOwned>(text: &str, source: &str) -> Result<Vec<T>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| EvalError::Dataset {
            path: source.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, EvalError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_jsonl(&text, &path.display().to_string())
}

fn non_empty<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    let s = String::deserialize(d)?;
    if s.trim().is_empty() {
        return Err(serde::de::Error::custom("question text is empty"));
    }
    Ok(s)
}

fn default_setting() -> String {
    "default".into()
}

/// One POPE-style probe: "Is there a <object> in the image?".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopeItem {
    pub question_id: String,
    #[serde(rename = "visual_id")]
    pub visual: VisualContextRef,
    #[serde(rename = "text", deserialize_with = "non_empty")]
    pub question_text: String,
    pub label: Label,
    /// Sampling setting (random, popular, adversarial); reports group by it.
    #[serde(default = "default_setting")]
    pub setting: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MmeTask {
    Existence,
    Count,
    Position,
    Color,
    Other(String),
}

impl MmeTask {
    /// The four tasks summed into the hallucination-subset total.
    pub const HALLUCINATION: [MmeTask; 4] =
        [MmeTask::Existence, MmeTask::Count, MmeTask::Position, MmeTask::Color];

    pub fn name(&self) -> &str {
        match self {
            MmeTask::Existence => "existence",
            MmeTask::Count => "count",
            MmeTask::Position => "position",
            MmeTask::Color => "color",
            MmeTask::Other(s) => s,
        }
    }

    pub fn is_hallucination_task(&self) -> bool {
        !matches!(self, MmeTask::Other(_))
    }
}

impl From<&str> for MmeTask {
    fn from(s: &str) -> Self {
        match s.to_ascii_lowercase().as_str() {
            "existence" => MmeTask::Existence,
            "count" => MmeTask::Count,
            "position" => MmeTask::Position,
            "color" | "colour" => MmeTask::Color,
            _ => MmeTask::Other(s.to_string()),
        }
    }
}

impl Serialize for MmeTask {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for MmeTask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(MmeTask::from(s.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmeItem {
    pub image_id: String,
    #[serde(rename = "visual_id")]
    pub visual: VisualContextRef,
    pub task: MmeTask,
    #[serde(rename = "text", deserialize_with = "non_empty")]
    pub question_text: String,
    pub label: Label,
}

/// A generated caption with the objects truly present in its image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub visual_id: String,
    pub caption: String,
    pub truth: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pope_line() {
        let items: Vec<PopeItem> = parse_jsonl(
            "{\"question_id\":\"1\",\"visual_id\":\"img\",\"text\":\"Is there a dog?\",\"label\":\"yes\"}\n\n",
            "mem",
        )
        .unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].label, Label::Yes);
        assert_eq!(items[0].setting, "default");
    }

    #[test]
    fn malformed_line_is_named() {
        let text = "{\"question_id\":\"1\",\"visual_id\":\"img\",\"text\":\"q\",\"label\":\"yes\"}\n{oops\n";
        let err = parse_jsonl::<PopeItem>(text, "pope.jsonl").unwrap_err();
        assert!(err.to_string().starts_with("pope.jsonl:2:"), "{err}");
        let text = "{\"question_id\":\"1\",\"visual_id\":\"img\",\"text\":\"\",\"label\":\"yes\"}";
        assert!(parse_jsonl::<PopeItem>(text, "p").is_err());
        let text = "{\"question_id\":\"1\",\"visual_id\":\"img\",\"text\":\"q\",\"label\":\"maybe\"}";
        assert!(parse_jsonl::<PopeItem>(text, "p").is_err());
    }

    #[test]
    fn mme_task_names() {
        let items: Vec<MmeItem> = parse_jsonl(
            "{\"image_id\":\"a\",\"visual_id\":\"a\",\"task\":\"color\",\"text\":\"q\",\"label\":\"no\"}\n\
             {\"image_id\":\"a\",\"visual_id\":\"a\",\"task\":\"OCR\",\"text\":\"q\",\"label\":\"no\"}",
            "m",
        )
        .unwrap();
        assert_eq!(items[0].task, MmeTask::Color);
        assert_eq!(items[1].task, MmeTask::Other("OCR".into()));
        assert!(!items[1].task.is_hallucination_task());
    }
}
