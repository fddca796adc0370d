use serde::{Deserialize, Serialize};

use crate::error::DecodeError;
use crate::instruction::{compose, Channel, InstructionSpec};
use crate::models::{LogitSource, QueryContext, VisualContextRef};
use crate::types::{LogitVector, TokenId};

/// A recursive contrast expression over model queries.
///
/// `Contrast` evaluates to `base - lambda * penalty` in logit space. A plain
/// ICD tree is `Contrast(Leaf(standard), Leaf(disturbed), lambda)`; stacking
/// two visual contrasts under an instruction contrast gives the combined
/// ICD+VCD tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ContrastNode {
    Leaf {
        visual: VisualContextRef,
        instruction: InstructionSpec,
    },
    Contrast {
        base: Box<ContrastNode>,
        penalty: Box<ContrastNode>,
        lambda: f64,
    },
}

impl ContrastNode {
    pub fn leaf(visual: VisualContextRef, instruction: InstructionSpec) -> Self {
        ContrastNode::Leaf {
            visual,
            instruction,
        }
    }

    pub fn contrast(base: ContrastNode, penalty: ContrastNode, lambda: f64) -> Self {
        ContrastNode::Contrast {
            base: Box::new(base),
            penalty: Box::new(penalty),
            lambda,
        }
    }

    /// Leftmost leaf reached by following base edges.
    pub fn standard_leaf(&self) -> (&VisualContextRef, &InstructionSpec) {
        let mut node = self;
        loop {
            match node {
                ContrastNode::Leaf {
                    visual,
                    instruction,
                } => return (visual, instruction),
                ContrastNode::Contrast { base, .. } => node = base,
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            ContrastNode::Leaf { .. } => 1,
            ContrastNode::Contrast { base, penalty, .. } => base.leaf_count() + penalty.leaf_count(),
        }
    }

    /// Checks every λ, every instruction, and that the standard leaf is
    /// undisturbed.
    pub fn validate(&self) -> Result<(), DecodeError> {
        self.validate_inner()?;
        let (_, standard) = self.standard_leaf();
        if standard.role_prefix.is_some() {
            return Err(DecodeError::Tree(
                "the standard leaf must not carry a role prefix".into(),
            ));
        }
        Ok(())
    }

    fn validate_inner(&self) -> Result<(), DecodeError> {
        match self {
            ContrastNode::Leaf { instruction, .. } => Ok(instruction.validate()?),
            ContrastNode::Contrast {
                base,
                penalty,
                lambda,
            } => {
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return Err(DecodeError::Tree(format!("lambda {lambda} must be >= 0")));
                }
                base.validate_inner()?;
                penalty.validate_inner()
            }
        }
    }
}

pub(crate) fn leaf_context(
    visual: &VisualContextRef,
    instruction: &InstructionSpec,
    prefix_tokens: &[TokenId],
) -> Result<QueryContext, DecodeError> {
    let composed = compose(instruction)?;
    Ok(QueryContext {
        visual: visual.clone(),
        fusion_text: composed.fusion_text,
        llm_text: composed.llm_text,
        prefix_tokens: prefix_tokens.to_vec(),
    })
}

pub(crate) fn query_leaf<M: LogitSource + ?Sized>(
    model: &M,
    visual: &VisualContextRef,
    instruction: &InstructionSpec,
    prefix_tokens: &[TokenId],
) -> Result<LogitVector, DecodeError> {
    let ctx = leaf_context(visual, instruction, prefix_tokens)?;
    let logits = model.next_logits(&ctx)?;
    model.info().check_logits(&logits)?;
    Ok(logits)
}

/// Evaluates the tree: leaves query the model, contrasts subtract.
pub fn eval_tree<M: LogitSource + ?Sized>(
    node: &ContrastNode,
    model: &M,
    prefix_tokens: &[TokenId],
) -> Result<LogitVector, DecodeError> {
    eval_with_standard(node, model, prefix_tokens).map(|(contrasted, _)| contrasted)
}

/// Evaluates the tree and also returns the standard leaf's logits, querying
/// each leaf exactly once.
pub(crate) fn eval_with_standard<M: LogitSource + ?Sized>(
    node: &ContrastNode,
    model: &M,
    prefix_tokens: &[TokenId],
) -> Result<(LogitVector, LogitVector), DecodeError> {
    match node {
        ContrastNode::Leaf {
            visual,
            instruction,
        } => {
            let logits = query_leaf(model, visual, instruction, prefix_tokens)?;
            Ok((logits.clone(), logits))
        }
        ContrastNode::Contrast {
            base,
            penalty,
            lambda,
        } => {
            let (base_logits, standard) = eval_with_standard(base, model, prefix_tokens)?;
            let penalty_logits = eval_tree(penalty, model, prefix_tokens)?;
            Ok((base_logits.sub_scaled(&penalty_logits, *lambda)?, standard))
        }
    }
}

/// Which contrast tree to build for each benchmark item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "standard")]
    Standard,
    #[serde(rename = "icd")]
    Icd,
    #[serde(rename = "vcd")]
    Vcd,
    #[serde(rename = "icd+vcd")]
    IcdVcd,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(Method::Standard),
            "icd" => Ok(Method::Icd),
            "vcd" => Ok(Method::Vcd),
            "icd+vcd" | "icd-vcd" | "icdvcd" => Ok(Method::IcdVcd),
            other => Err(format!(
                "unknown method {other:?} (expected standard, icd, vcd or icd+vcd)"
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Standard => "standard",
            Method::Icd => "icd",
            Method::Vcd => "vcd",
            Method::IcdVcd => "icd+vcd",
        })
    }
}

/// Recipe that turns a (visual, question) pair into a [`ContrastNode`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeTemplate {
    pub method: Method,
    /// Weight of the instruction contrast.
    pub lambda: f64,
    /// Weight of the visual contrast.
    pub lambda_vcd: f64,
    pub prefix: Option<String>,
    pub channel: Channel,
    /// Appended to the visual id to name the distorted context.
    pub distortion_suffix: Option<String>,
}

impl TreeTemplate {
    pub fn standard() -> Self {
        TreeTemplate {
            method: Method::Standard,
            lambda: 1.0,
            lambda_vcd: 1.0,
            prefix: None,
            channel: Channel::Fusion,
            distortion_suffix: None,
        }
    }

    pub fn icd(prefix: impl Into<String>, lambda: f64) -> Self {
        TreeTemplate {
            method: Method::Icd,
            lambda,
            prefix: Some(prefix.into()),
            ..TreeTemplate::standard()
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        let needs_prefix = matches!(self.method, Method::Icd | Method::IcdVcd);
        let needs_suffix = matches!(self.method, Method::Vcd | Method::IcdVcd);
        if needs_prefix && self.prefix.as_deref().is_none_or(|p| p.trim().is_empty()) {
            return Err(DecodeError::Tree(format!(
                "method {} requires a role prefix",
                self.method
            )));
        }
        if needs_suffix && self.distortion_suffix.as_deref().is_none_or(str::is_empty) {
            return Err(DecodeError::Tree(format!(
                "method {} requires a distorted-visual suffix",
                self.method
            )));
        }
        Ok(())
    }

    pub fn instantiate(
        &self,
        visual: &VisualContextRef,
        question: &str,
    ) -> Result<ContrastNode, DecodeError> {
        self.validate()?;
        let standard = InstructionSpec::standard(question);
        let disturbed = || {
            InstructionSpec::disturbed(
                question,
                self.prefix.clone().unwrap_or_default(),
                self.channel,
            )
        };
        let distorted = || visual.with_suffix(self.distortion_suffix.as_deref().unwrap_or_default());
        let leaf = ContrastNode::leaf;
        let node = match self.method {
            Method::Standard => leaf(visual.clone(), standard),
            Method::Icd => ContrastNode::contrast(
                leaf(visual.clone(), standard),
                leaf(visual.clone(), disturbed()),
                self.lambda,
            ),
            Method::Vcd => ContrastNode::contrast(
                leaf(visual.clone(), standard.clone()),
                leaf(distorted(), standard),
                self.lambda_vcd,
            ),
            Method::IcdVcd => ContrastNode::contrast(
                ContrastNode::contrast(
                    leaf(visual.clone(), standard.clone()),
                    leaf(distorted(), standard),
                    self.lambda_vcd,
                ),
                ContrastNode::contrast(
                    leaf(visual.clone(), disturbed()),
                    leaf(distorted(), disturbed()),
                    self.lambda_vcd,
                ),
                self.lambda,
            ),
        };
        node.validate()?;
        Ok(node)
    }
}
