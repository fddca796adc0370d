use std::fmt;

use contrast_core::{DecodeError, EvalError, InstructionError, ModelError};

/// A command failure carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const CONFIG: u8 = 1;
pub const MODEL: u8 = 2;
pub const INTERNAL: u8 = 3;

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            code: CONFIG,
            message: message.into(),
        }
    }

    pub fn io(what: &str, path: &std::path::Path, err: std::io::Error) -> Self {
        Failure::config(format!("{what} {}: {err}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::Invalid(_) | ModelError::Io { .. } | ModelError::Parse { .. } => CONFIG,
        _ => MODEL,
    }
}

fn decode_code(e: &DecodeError) -> u8 {
    match e {
        DecodeError::Model(_) => MODEL,
        DecodeError::Numeric(_) => INTERNAL,
        DecodeError::Config(_) | DecodeError::Instruction(_) | DecodeError::Tree(_) => CONFIG,
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure {
            code: model_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<DecodeError> for Failure {
    fn from(e: DecodeError) -> Self {
        Failure {
            code: decode_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let code = match &e {
            EvalError::Decode { source, .. } => decode_code(source),
            _ => CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<InstructionError> for Failure {
    fn from(e: InstructionError) -> Self {
        Failure::config(e.to_string())
    }
}
