//! Run configuration: a config file merged with command-line flags.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use contrast_core::instruction::load_catalog;
use contrast_core::models::REMOTE_URL_ENV;
use contrast_core::{
    Channel, DecodeConfig, LogitSource, MockTable, Method, PrefixCatalog, RemoteModel,
    SyntheticBiasModel, TokenId, TreeTemplate,
};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::failure::Failure;

pub const DEFAULT_DISTORT_SUFFIX: &str = ".distorted";

/// Settings shared by every subcommand. Each one may also be given in the
/// `--config` file; flags win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// TOML or JSON file with default settings
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Mock logit table (JSON)
    #[arg(long, global = true, value_name = "FILE")]
    pub mock: Option<PathBuf>,
    /// Base URL of a logit server
    #[arg(long, global = true, value_name = "URL")]
    pub remote: Option<String>,
    /// Synthetic bias model definition (JSON)
    #[arg(long, global = true, value_name = "FILE")]
    pub synthetic: Option<PathBuf>,

    /// standard, icd, vcd or icd+vcd
    #[arg(long, global = true)]
    pub method: Option<Method>,
    /// Instruction contrast weight
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Visual contrast weight
    #[arg(long, global = true)]
    pub lambda_vcd: Option<f64>,
    /// Plausibility threshold relative to the best token
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub top_p: Option<f64>,
    #[arg(long, global = true)]
    pub repetition_penalty: Option<f64>,
    #[arg(long, global = true)]
    pub max_tokens: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Take the most likely token instead of sampling
    #[arg(long, global = true)]
    #[serde(default)]
    pub greedy: bool,
    /// Token id that ends decoding (kept in the output); repeatable
    #[arg(long = "stop-token", global = true, value_name = "ID")]
    #[serde(default)]
    pub stop_tokens: Vec<u32>,

    /// Role prefix name from the catalog
    #[arg(long, global = true, value_name = "NAME")]
    pub prefix: Option<String>,
    /// Literal role prefix text
    #[arg(long, global = true, value_name = "TEXT", conflicts_with = "prefix")]
    pub prefix_text: Option<String>,
    /// Prefix catalog (JSON); defaults to the built-in catalog
    #[arg(long, global = true, value_name = "FILE")]
    pub catalog: Option<PathBuf>,
    /// Instruction slot receiving the prefix: fusion, llm or both
    #[arg(long, global = true)]
    pub channel: Option<Channel>,
    /// Suffix naming the distorted visual context
    #[arg(long, global = true, value_name = "SUFFIX")]
    pub distort_suffix: Option<String>,

    /// Dataset file (JSON Lines)
    #[arg(long, global = true, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Number of decoding workers
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory for reports
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl Settings {
    /// Reads `--config` (if any) and lets the flags in `self` override it.
    pub fn resolve_file(self) -> Result<Settings, Failure> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path).map_err(|e| Failure::io("reading", &path, e))?;
        let file: Settings = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| Failure::config(format!("parsing {}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| Failure::config(format!("parsing {}: {e}", path.display())))?
        };
        Ok(self.over(file))
    }

    fn over(self, file: Settings) -> Settings {
        let source_flag = self.mock.is_some() || self.remote.is_some() || self.synthetic.is_some();
        let (mock, remote, synthetic) = if source_flag {
            (self.mock, self.remote, self.synthetic)
        } else {
            (file.mock, file.remote, file.synthetic)
        };
        let prefix_flag = self.prefix.is_some() || self.prefix_text.is_some();
        let (prefix, prefix_text) = if prefix_flag {
            (self.prefix, self.prefix_text)
        } else {
            (file.prefix, file.prefix_text)
        };
        Settings {
            config: self.config,
            mock,
            remote,
            synthetic,
            method: self.method.or(file.method),
            lambda: self.lambda.or(file.lambda),
            lambda_vcd: self.lambda_vcd.or(file.lambda_vcd),
            alpha: self.alpha.or(file.alpha),
            top_p: self.top_p.or(file.top_p),
            repetition_penalty: self.repetition_penalty.or(file.repetition_penalty),
            max_tokens: self.max_tokens.or(file.max_tokens),
            seed: self.seed.or(file.seed),
            greedy: self.greedy || file.greedy,
            stop_tokens: if self.stop_tokens.is_empty() {
                file.stop_tokens
            } else {
                self.stop_tokens
            },
            prefix,
            prefix_text,
            catalog: self.catalog.or(file.catalog),
            channel: self.channel.or(file.channel),
            distort_suffix: self.distort_suffix.or(file.distort_suffix),
            dataset: self.dataset.or(file.dataset),
            workers: self.workers.or(file.workers),
            out: self.out.or(file.out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Mock(PathBuf),
    Remote(String),
    Synthetic(PathBuf),
}

impl ModelSource {
    pub fn open(&self) -> Result<Box<dyn LogitSource>, Failure> {
        Ok(match self {
            ModelSource::Mock(p) => Box::new(MockTable::load(p)?),
            ModelSource::Remote(url) => Box::new(RemoteModel::connect(url)?),
            ModelSource::Synthetic(p) => Box::new(SyntheticBiasModel::load(p)?),
        })
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Option<ModelSource>,
    pub template: TreeTemplate,
    pub prefix_name: Option<String>,
    pub decode: DecodeConfig,
    pub dataset: Option<PathBuf>,
    pub workers: usize,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn from_settings(s: Settings) -> Result<RunConfig, Failure> {
        let sources: Vec<ModelSource> = [
            s.mock.map(ModelSource::Mock),
            s.remote.map(ModelSource::Remote),
            s.synthetic.map(ModelSource::Synthetic),
        ]
        .into_iter()
        .flatten()
        .collect();
        if sources.len() > 1 {
            return Err(Failure::config(
                "give only one of --mock, --remote and --synthetic",
            ));
        }
        let source = sources.into_iter().next().or_else(|| {
            std::env::var(REMOTE_URL_ENV)
                .ok()
                .filter(|u| !u.is_empty())
                .map(ModelSource::Remote)
        });

        let defaults = DecodeConfig::default();
        let lambda = s.lambda.unwrap_or(defaults.lambda);
        let decode = DecodeConfig {
            lambda,
            alpha: s.alpha.unwrap_or(defaults.alpha),
            top_p: s.top_p.unwrap_or(defaults.top_p),
            repetition_penalty: s.repetition_penalty.unwrap_or(defaults.repetition_penalty),
            max_tokens: s.max_tokens.unwrap_or(defaults.max_tokens),
            seed: s.seed.unwrap_or(defaults.seed),
            greedy: s.greedy,
            stop_tokens: s.stop_tokens.iter().copied().map(TokenId).collect::<BTreeSet<_>>(),
        };
        decode
            .validate()
            .map_err(|e| Failure::config(e.to_string()))?;

        let prefix = match (&s.prefix_text, &s.prefix) {
            (Some(text), _) => Some(text.clone()),
            (None, Some(name)) => Some(lookup_prefix(name, s.catalog.as_deref())?),
            (None, None) => None,
        };
        let template = TreeTemplate {
            method: s.method.unwrap_or(Method::Standard),
            lambda,
            lambda_vcd: s.lambda_vcd.unwrap_or(1.0),
            prefix,
            channel: s.channel.unwrap_or_default(),
            distortion_suffix: Some(
                s.distort_suffix
                    .unwrap_or_else(|| DEFAULT_DISTORT_SUFFIX.to_string()),
            ),
        };
        template.validate().map_err(|e| {
            Failure::config(format!("{e}; pass --prefix NAME or --prefix-text TEXT"))
        })?;
        if !template.lambda_vcd.is_finite() || template.lambda_vcd < 0.0 {
            return Err(Failure::config("lambda_vcd must be finite and >= 0"));
        }

        let workers = s.workers.unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        });
        if workers == 0 {
            return Err(Failure::config("--workers must be positive"));
        }
        Ok(RunConfig {
            source,
            template,
            prefix_name: if s.prefix_text.is_some() { None } else { s.prefix },
            decode,
            dataset: s.dataset,
            workers,
            out: s.out.unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    pub fn open_model(&self) -> Result<Box<dyn LogitSource>, Failure> {
        match &self.source {
            Some(src) => src.open(),
            None => Err(Failure::config(format!(
                "no model: pass --mock, --remote or --synthetic, or set {REMOTE_URL_ENV}"
            ))),
        }
    }

    pub fn dataset(&self) -> Result<&Path, Failure> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Failure::config("--dataset is required"))
    }

    /// Configuration echoed into report metadata. Leaves out settings that
    /// cannot change results: worker count, output directory and where the
    /// model is served from.
    pub fn echo(&self) -> Value {
        json!({
            "method": self.template.method,
            "lambda": self.template.lambda,
            "lambda_vcd": self.template.lambda_vcd,
            "prefix": self.template.prefix,
            "prefix_name": self.prefix_name,
            "channel": self.template.channel,
            "distortion_suffix": self.template.distortion_suffix,
            "decode": self.decode,
            "dataset": self.dataset.as_ref().map(|p| p.display().to_string()),
        })
    }
}

fn lookup_prefix(name: &str, catalog: Option<&Path>) -> Result<String, Failure> {
    let catalog = match catalog {
        Some(path) => load_catalog(path)?,
        None => PrefixCatalog::builtin(),
    };
    match catalog.get(name) {
        Some(entry) => Ok(entry.text.clone()),
        None => {
            let known: Vec<&str> = catalog.entries().iter().map(|e| e.name.as_str()).collect();
            Err(Failure::config(format!(
                "unknown prefix {name:?}; known prefixes: {}",
                known.join(", ")
            )))
        }
    }
}
