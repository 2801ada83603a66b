//! Declarative pipeline configuration (TOML or JSON) with `key=value` overrides.
//!
//! Unknown keys are rejected. Credentials never appear here: the endpoint
//! section names the environment variable that holds the API key.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::contextizer::STANDARD_CONTEXT_SIZES;
use crate::corpus::FilterConfig;
use crate::elaborator::{ChatClient, EchoChatClient, ElaborationPolicy, HttpChatClient, RetryPolicy};
use crate::geometry::InterpolationParams;
use crate::timeline::SegmentParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("bad override {0:?}: expected key.path=value")]
    BadOverride(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Scraped songs, raw JSONL.
    pub raw: PathBuf,
    /// Filtered corpus output.
    pub corpus: PathBuf,
    /// Elaboration store (also the elaboration checkpoint).
    pub elabs: PathBuf,
    /// Directory receiving one dataset file per context size.
    pub datasets: PathBuf,
    /// Directory receiving JSON reports.
    pub reports: PathBuf,
}

impl Paths {
    fn rebase(&mut self, base: &Path) {
        for p in [&mut self.raw, &mut self.corpus, &mut self.elabs, &mut self.datasets, &mut self.reports] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    /// Built-in deterministic offline client.
    #[default]
    Fake,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub kind: EndpointKind,
    pub url: String,
    pub api_key_env: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_s: f64,
    pub max_inflight: usize,
    pub max_lines_per_request: usize,
    pub chunk_overlap: usize,
    pub requests_per_second: Option<f64>,
    pub retry: RetryPolicy,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        let p = ElaborationPolicy::default();
        Self {
            kind: EndpointKind::Fake,
            url: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            timeout_s: 120.0,
            max_inflight: p.max_inflight,
            max_lines_per_request: p.max_lines_per_request,
            chunk_overlap: p.chunk_overlap,
            requests_per_second: p.requests_per_second,
            retry: p.retry,
        }
    }
}

impl EndpointConfig {
    pub fn policy(&self) -> ElaborationPolicy {
        ElaborationPolicy {
            retry: self.retry,
            max_inflight: self.max_inflight,
            max_lines_per_request: self.max_lines_per_request,
            chunk_overlap: self.chunk_overlap,
            requests_per_second: self.requests_per_second,
        }
    }

    /// Instantiate the configured client. The API key is read from the
    /// environment here and nowhere else.
    pub fn build_client(&self) -> Result<Box<dyn ChatClient>, ConfigError> {
        match self.kind {
            EndpointKind::Fake => Ok(Box::new(EchoChatClient::new())),
            EndpointKind::Http => {
                let key = std::env::var(&self.api_key_env).ok();
                if key.is_none() {
                    log::warn!("{} is not set; sending requests without credentials", self.api_key_env);
                }
                let client = HttpChatClient::new(
                    self.url.clone(),
                    key,
                    self.model.clone(),
                    self.temperature,
                    Duration::from_secs_f64(self.timeout_s),
                )
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Ok(Box::new(client))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Render fractions as percentages in CLI output.
    pub percent: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { percent: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimelineConfig {
    pub fps: f64,
    pub transition_s: f64,
    pub break_threshold_s: f64,
    pub break_context_lines: usize,
}

impl Default for TimelineConfig {
    fn default() -> Self {
        let s = SegmentParams::default();
        Self {
            fps: 10.0,
            transition_s: 1.0,
            break_threshold_s: s.break_threshold_s,
            break_context_lines: s.break_context_lines,
        }
    }
}

impl TimelineConfig {
    pub fn segment_params(&self) -> SegmentParams {
        SegmentParams { break_threshold_s: self.break_threshold_s, break_context_lines: self.break_context_lines }
    }
}

fn default_context_sizes() -> Vec<usize> {
    STANDARD_CONTEXT_SIZES.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default = "default_context_sizes")]
    pub context_sizes: Vec<usize>,
    #[serde(default)]
    pub endpoint: EndpointConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub geometry: InterpolationParams,
    #[serde(default)]
    pub timeline: TimelineConfig,
}

impl PipelineConfig {
    /// Relative entries of `paths` resolve against the config file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut cfg = Self::from_tree(load_tree(path)?, overrides)?;
        if let Some(base) = path.parent() {
            cfg.paths.rebase(base);
        }
        Ok(cfg)
    }

    pub fn from_tree(mut tree: Value, overrides: &[String]) -> Result<Self, ConfigError> {
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: Self = serde_json::from_value(tree).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.into()));
        self.filter.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.context_sizes.is_empty() {
            return invalid("context_sizes must not be empty");
        }
        if self.endpoint.max_inflight == 0 {
            return invalid("endpoint.max_inflight must be >= 1");
        }
        if self.endpoint.max_lines_per_request <= self.endpoint.chunk_overlap {
            return invalid("endpoint.max_lines_per_request must exceed endpoint.chunk_overlap");
        }
        if self.endpoint.retry.max_attempts == 0 {
            return invalid("endpoint.retry.max_attempts must be >= 1");
        }
        if matches!(self.endpoint.requests_per_second, Some(r) if r.is_nan() || r <= 0.0) {
            return invalid("endpoint.requests_per_second must be positive");
        }
        if self.endpoint.kind == EndpointKind::Http && self.endpoint.url.is_empty() {
            return invalid("endpoint.url is required for http endpoints");
        }
        if self.geometry.n_steps < 2 || self.geometry.window == 0 {
            return invalid("geometry.n_steps must be >= 2 and geometry.window >= 1");
        }
        let tl = &self.timeline;
        if tl.fps.is_nan() || tl.fps <= 0.0 || tl.transition_s.is_nan() || tl.transition_s < 0.0 {
            return invalid("timeline.fps must be positive and timeline.transition_s non-negative");
        }
        Ok(())
    }
}

/// Parse a TOML (or, by `.json` extension, JSON) file into a generic tree.
pub fn load_tree(path: &Path) -> Result<Value, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&src).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    } else {
        toml::from_str(&src).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.message().to_string(),
        })
    }
}

/// Filter settings from either a full pipeline config (its `filter` table)
/// or a file holding only filter keys.
pub fn load_filter_config(path: &Path, overrides: &[String]) -> Result<FilterConfig, ConfigError> {
    let tree = load_tree(path)?;
    if tree.get("paths").is_some() {
        return Ok(PipelineConfig::from_tree(tree, overrides)?.filter);
    }
    let mut tree = tree;
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    let cfg: FilterConfig = serde_json::from_value(tree).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(cfg)
}

/// Set `a.b.c=value` in a config tree. The value is read as a TOML literal
/// (`3`, `true`, `[0, 1]`, `"x"`), falling back to a bare string.
pub fn apply_override(tree: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::BadOverride(spec.into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::BadOverride(spec.into()));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .and_then(|v| serde_json::to_value(v).ok())
        .unwrap_or_else(|| Value::String(raw.to_string()));

    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(ConfigError::BadOverride(spec.into()));
        }
        node = node
            .as_object_mut()
            .unwrap()
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    match node.as_object_mut() {
        Some(obj) => {
            obj.insert(parts[parts.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(ConfigError::BadOverride(spec.into())),
    }
}
