//! Standard and disturbance instructions.
//!
//! A disturbance instruction is the query with a role prefix prepended. The
//! model interface exposes two instruction slots, one for the fusion module
//! and one for the language model, and [`Channel`] selects which of them
//! receive the disturbed text.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::InstructionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    #[default]
    Fusion,
    Llm,
    Both,
}

impl Channel {
    fn fusion(self) -> bool {
        matches!(self, Channel::Fusion | Channel::Both)
    }

    fn llm(self) -> bool {
        matches!(self, Channel::Llm | Channel::Both)
    }
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fusion" => Ok(Channel::Fusion),
            "llm" => Ok(Channel::Llm),
            "both" => Ok(Channel::Both),
            other => Err(format!("unknown channel {other:?} (expected fusion, llm or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstructionSpec {
    pub query_text: String,
    #[serde(default)]
    pub role_prefix: Option<String>,
    #[serde(default)]
    pub channel: Channel,
}

impl InstructionSpec {
    pub fn standard(query: impl Into<String>) -> Self {
        InstructionSpec {
            query_text: query.into(),
            role_prefix: None,
            channel: Channel::default(),
        }
    }

    pub fn disturbed(query: impl Into<String>, prefix: impl Into<String>, channel: Channel) -> Self {
        InstructionSpec {
            query_text: query.into(),
            role_prefix: Some(prefix.into()),
            channel,
        }
    }

    pub fn validate(&self) -> Result<(), InstructionError> {
        if self.query_text.is_empty() {
            return Err(InstructionError::EmptyQuery);
        }
        if let Some(p) = &self.role_prefix {
            if p.trim().is_empty() {
                return Err(InstructionError::EmptyPrefix);
            }
        }
        Ok(())
    }
}

/// The text delivered to each instruction slot of the model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComposedInstruction {
    pub fusion_text: String,
    pub llm_text: String,
}

/// Joins the role prefix and query with a single ASCII space on the selected
/// channels. Unselected channels receive the query unchanged.
pub fn compose(spec: &InstructionSpec) -> Result<ComposedInstruction, InstructionError> {
    spec.validate()?;
    let query = &spec.query_text;
    let Some(prefix) = &spec.role_prefix else {
        return Ok(ComposedInstruction {
            fusion_text: query.clone(),
            llm_text: query.clone(),
        });
    };
    let disturbed = format!("{prefix} {query}");
    let pick = |selected: bool| if selected { disturbed.clone() } else { query.clone() };
    Ok(ComposedInstruction {
        fusion_text: pick(spec.channel.fusion()),
        llm_text: pick(spec.channel.llm()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixEntry {
    pub name: String,
    pub text: String,
    pub polarity: Polarity,
}

/// Named role prefixes. Names are unique and texts non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PrefixCatalog {
    entries: Vec<PrefixEntry>,
}

/// Name of the negative prefix shipped in [`PrefixCatalog::builtin`].
pub const CONFUSED_DETECTOR: &str = "confused-detector";

/// Placeholder positive prefix. Replace it with a catalog file for real runs.
pub const POSITIVE_PLACEHOLDER: &str = "positive-placeholder";

impl PrefixCatalog {
    pub fn new(entries: Vec<PrefixEntry>) -> Result<Self, InstructionError> {
        let mut problems = Vec::new();
        let mut seen = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if let Some(first) = seen.insert(e.name.as_str(), i) {
                problems.push(format!(
                    "duplicate name {:?} (entries {first} and {i})",
                    e.name
                ));
            }
            if e.name.trim().is_empty() {
                problems.push(format!("entry {i} has an empty name"));
            }
            if e.text.trim().is_empty() {
                problems.push(format!("entry {i} ({:?}) has an empty text", e.name));
            }
        }
        if problems.is_empty() {
            Ok(PrefixCatalog { entries })
        } else {
            Err(InstructionError::Catalog(problems))
        }
    }

    pub fn builtin() -> Self {
        PrefixCatalog {
            entries: vec![
                PrefixEntry {
                    name: CONFUSED_DETECTOR.into(),
                    text: "You are a confused object detector,".into(),
                    polarity: Polarity::Negative,
                },
                PrefixEntry {
                    name: POSITIVE_PLACEHOLDER.into(),
                    text: "You are an object detector,".into(),
                    polarity: Polarity::Positive,
                },
            ],
        }
    }

    /// Parses a JSON array of `{"name", "text", "polarity"}` objects. An
    /// empty file yields an empty catalog.
    pub fn parse(text: &str, path: &Path) -> Result<Self, InstructionError> {
        if text.trim().is_empty() {
            return Ok(PrefixCatalog::default());
        }
        let entries: Vec<PrefixEntry> =
            serde_json::from_str(text).map_err(|source| InstructionError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        PrefixCatalog::new(entries)
    }

    pub fn entries(&self) -> &[PrefixEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&PrefixEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<PrefixCatalog, InstructionError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| InstructionError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    PrefixCatalog::parse(&text, path)
}
