use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_logits, LogitSource, ModelInfo, QueryContext, VisualContextRef};
use crate::error::ModelError;
use crate::types::LogitVector;

/// Exact-lookup model. Keys match on the raw strings and token sequence;
/// misses return the default vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MockTable {
    info: ModelInfo,
    default: LogitVector,
    entries: BTreeMap<QueryContext, LogitVector>,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    info: ModelInfo,
    default: Vec<f64>,
    #[serde(default)]
    entries: Vec<EntryFile>,
}

#[derive(Serialize, Deserialize)]
struct EntryFile {
    key: QueryContext,
    logits: Vec<f64>,
}

impl MockTable {
    pub fn new(info: ModelInfo, default: LogitVector) -> Result<Self, ModelError> {
        info.validate()?;
        check_vector(&info, &default, "default")?;
        Ok(MockTable {
            info,
            default,
            entries: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, key: QueryContext, logits: LogitVector) -> Result<(), ModelError> {
        self.info.check_context(&key)?;
        check_vector(&self.info, &logits, "entry")?;
        self.entries.insert(key, logits);
        Ok(())
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self, ModelError> {
        let file: TableFile = serde_json::from_str(text).map_err(|source| ModelError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let mut table = MockTable::new(file.info, parse_logits(file.default, "default")?)?;
        for (i, e) in file.entries.into_iter().enumerate() {
            let logits = parse_logits(e.logits, &format!("entry {i}"))?;
            table.insert(e.key, logits)?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        MockTable::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        let file = TableFile {
            info: self.info.clone(),
            default: self.default.values().to_vec(),
            entries: self
                .entries
                .iter()
                .map(|(k, v)| EntryFile {
                    key: k.clone(),
                    logits: v.values().to_vec(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("mock table serializes")
    }

    pub fn default_logits(&self) -> &LogitVector {
        &self.default
    }

    pub fn lookup(&self, ctx: &QueryContext) -> Option<&LogitVector> {
        self.entries.get(ctx)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Visual ids appearing in at least one key.
    pub fn visual_ids(&self) -> BTreeSet<&VisualContextRef> {
        self.entries.keys().map(|k| &k.visual).collect()
    }
}

fn check_vector(info: &ModelInfo, v: &LogitVector, what: &str) -> Result<(), ModelError> {
    if v.len() != info.vocab_size {
        return Err(ModelError::Invalid(format!(
            "{what} vector has length {}, vocabulary size is {}",
            v.len(),
            info.vocab_size
        )));
    }
    Ok(())
}

impl LogitSource for MockTable {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn next_logits(&self, ctx: &QueryContext) -> Result<LogitVector, ModelError> {
        self.info.check_context(ctx)?;
        Ok(self.lookup(ctx).unwrap_or(&self.default).clone())
    }
}
