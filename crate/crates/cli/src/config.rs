use std::fs;
use std::path::Path;

use oowm_core::diagram::CollectOptions;
use oowm_core::embedding::{EmbeddingProvider, HashingEmbedder, ServiceConfig, ServiceEmbedder};
use oowm_core::envelope::EnvelopeOptions;
use oowm_core::grpo::{DEFAULT_CLIP, DEFAULT_EPSILON};
use oowm_core::parser::ParseMode;
use serde::Deserialize;

use crate::args::{EmbedderArg, ParseModeArg, RunArgs};
use crate::error::CliError;

/// Keys accepted in the config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    embedder: Option<EmbedderArg>,
    endpoint: Option<String>,
    timeout_ms: Option<u64>,
    retries: Option<u32>,
    batch_size: Option<usize>,
    threshold: Option<f64>,
    epsilon: Option<f64>,
    clip_eps: Option<f64>,
    parse_mode: Option<ParseModeArg>,
    parallelism: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub embedder: EmbedderArg,
    pub service: ServiceConfig,
    pub threshold: f64,
    pub epsilon: f64,
    pub clip_eps: f64,
    pub parse_mode: ParseMode,
    pub parallelism: usize,
    /// Reserved: nothing in the pipeline draws random numbers yet.
    #[allow(dead_code)]
    pub seed: u64,
    pub envelope: EnvelopeOptions,
    pub collect: CollectOptions,
}

fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}

impl RunConfig {
    /// Flags and environment arrive merged through `args`; the config file
    /// fills whatever they leave unset.
    pub fn resolve(args: &RunArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => load_file(path)?,
            None => FileConfig::default(),
        };
        let defaults = ServiceConfig::default();
        let parallelism = args
            .parallelism
            .or(file.parallelism)
            .unwrap_or(defaults.parallelism);
        let config = RunConfig {
            embedder: args
                .embedder
                .or(file.embedder)
                .unwrap_or(EmbedderArg::Offline),
            service: ServiceConfig {
                endpoint: args
                    .endpoint
                    .clone()
                    .or(file.endpoint)
                    .unwrap_or(defaults.endpoint),
                timeout_ms: args
                    .timeout_ms
                    .or(file.timeout_ms)
                    .unwrap_or(defaults.timeout_ms),
                max_retries: args
                    .retries
                    .or(file.retries)
                    .unwrap_or(defaults.max_retries),
                batch_size: args
                    .batch_size
                    .or(file.batch_size)
                    .unwrap_or(defaults.batch_size),
                parallelism,
                ..defaults
            },
            threshold: args
                .threshold
                .or(file.threshold)
                .unwrap_or(oowm_core::eval::DEFAULT_THRESHOLD),
            epsilon: args.epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON),
            clip_eps: args.clip_eps.or(file.clip_eps).unwrap_or(DEFAULT_CLIP),
            parse_mode: match args.parse_mode.or(file.parse_mode) {
                Some(ParseModeArg::Strict) => ParseMode::Strict,
                _ => ParseMode::Lenient,
            },
            parallelism,
            seed: args.seed.or(file.seed).unwrap_or(0),
            envelope: EnvelopeOptions {
                require_think_first: !args.allow_answer_first,
            },
            collect: CollectOptions {
                include_conditions: args.include_conditions,
            },
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |message: String| Err(CliError::Config(message));
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!(
                "threshold must be within [0, 1], got {}",
                self.threshold
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            ));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad(format!(
                "clip_eps must be within (0, 1), got {}",
                self.clip_eps
            ));
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if self.service.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.service.timeout_ms == 0 {
            return bad("timeout_ms must be at least 1".into());
        }
        if self.embedder == EmbedderArg::Service && !self.service.endpoint.starts_with("http://") {
            return bad(format!(
                "endpoint must be an http:// URL, got `{}`",
                self.service.endpoint
            ));
        }
        Ok(())
    }

    pub fn provider(&self) -> Box<dyn EmbeddingProvider> {
        match self.embedder {
            EmbedderArg::Offline => Box::new(HashingEmbedder::default()),
            EmbedderArg::Service => Box::new(ServiceEmbedder::new(self.service.clone())),
        }
    }
}
