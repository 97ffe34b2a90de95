//! Engine configuration: one TOML file, every key optional, unknown keys
//! rejected. Secrets may come from the environment instead of the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentKind, AgentProfile, AgentSettings};
use crate::blending::{BlendingDimension, DimensionRule, Thresholds};
use crate::chunker::ChunkerConfig;
use crate::features::FeatureSettings;
use crate::llm::GatewayOptions;
use crate::retrieval::RetrievalParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Scripted responses from `mock_script`.
    Mock,
    Openai,
    Anthropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub provider: ProviderKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    /// Prefer `REVKIT_LLM_API_KEY`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mock_script: Option<PathBuf>,
    pub context_limit: usize,
    pub request_timeout_secs: u64,
    pub gateway: GatewayOptions,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::Mock,
            base_url: None,
            api_key: None,
            mock_script: None,
            context_limit: 128_000,
            request_timeout_secs: 120,
            gateway: GatewayOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentsConfig {
    pub enabled: Vec<AgentKind>,
    pub default_threshold: f64,
    /// Overrides of the per-agent confidence thresholds.
    pub thresholds: BTreeMap<AgentKind, f64>,
    pub weightage: BTreeMap<AgentKind, f64>,
    pub settings: AgentSettings,
}

impl Default for AgentsConfig {
    fn default() -> Self {
        Self {
            enabled: AgentKind::ALL.to_vec(),
            default_threshold: 0.6,
            thresholds: AgentKind::ALL.iter().map(|&k| (k, k.default_threshold())).collect(),
            weightage: AgentKind::ALL.iter().map(|&k| (k, 1.0)).collect(),
            settings: AgentSettings::default(),
        }
    }
}

impl AgentsConfig {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            per_agent: self.thresholds.clone(),
            default: self.default_threshold,
        }
    }

    pub fn profiles(&self) -> Vec<AgentProfile> {
        self.enabled
            .iter()
            .map(|&k| AgentProfile {
                kind: k,
                weightage: self.weightage.get(&k).copied().unwrap_or(1.0),
                confidence_threshold: self.thresholds.get(&k).copied().unwrap_or(self.default_threshold),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionConfig {
    pub rule: DimensionRule,
    pub order: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlendingConfig {
    pub dimensions: Vec<DimensionConfig>,
    /// Merge same-line comments through the model rather than by
    /// concatenation.
    pub summarize_with_model: bool,
}

impl Default for BlendingConfig {
    fn default() -> Self {
        Self {
            dimensions: vec![
                DimensionConfig {
                    rule: DimensionRule::ConfidenceFilter,
                    order: 10,
                },
                DimensionConfig {
                    rule: DimensionRule::OverlapSummarize,
                    order: 20,
                },
            ],
            summarize_with_model: true,
        }
    }
}

impl BlendingConfig {
    pub fn dimensions(&self) -> Vec<BlendingDimension> {
        self.dimensions.iter().map(|d| BlendingDimension::new(d.rule, d.order)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChunkingConfig {
    #[serde(flatten)]
    pub chunker: ChunkerConfig,
    pub languages: Vec<String>,
    /// Chunks live for the job timeout plus this margin.
    pub ttl_margin_secs: u64,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            chunker: ChunkerConfig::default(),
            languages: vec!["python".into()],
            ttl_margin_secs: 30 * 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderAccess {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api_base: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnowledgeAccess {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationsConfig {
    pub github: ProviderAccess,
    pub gitlab: ProviderAccess,
    pub bitbucket: ProviderAccess,
    /// Shared secret for webhook signatures; unset disables verification.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub webhook_secret: Option<String>,
    pub tracker: KnowledgeAccess,
    pub wiki: KnowledgeAccess,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub bind: String,
    /// Review jobs running at once.
    pub workers: usize,
    /// Accepted jobs waiting for a worker; further webhooks get 503.
    pub queue_capacity: usize,
    pub job_timeout_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            workers: 4,
            queue_capacity: 64,
            job_timeout_secs: 30 * 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    /// Larger diffs are skipped with a notice.
    pub max_changed_loc: usize,
    pub post_summary: bool,
    pub agents: AgentsConfig,
    pub retrieval: RetrievalParams,
    pub chunking: ChunkingConfig,
    pub llm: LlmConfig,
    pub blending: BlendingConfig,
    pub features: FeatureSettings,
    pub integrations: IntegrationsConfig,
    pub service: ServiceConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_changed_loc: 5000,
            post_summary: true,
            agents: AgentsConfig::default(),
            retrieval: RetrievalParams::default(),
            chunking: ChunkingConfig::default(),
            llm: LlmConfig::default(),
            blending: BlendingConfig::default(),
            features: FeatureSettings::default(),
            integrations: IntegrationsConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

/// Environment variables that override secrets in the file.
pub const ENV_OVERRIDES: &[&str] = &[
    "REVKIT_LLM_API_KEY",
    "REVKIT_GITHUB_TOKEN",
    "REVKIT_GITLAB_TOKEN",
    "REVKIT_BITBUCKET_TOKEN",
    "REVKIT_WEBHOOK_SECRET",
    "REVKIT_TRACKER_TOKEN",
    "REVKIT_WIKI_TOKEN",
];

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, applies process environment overrides, validates. Relative
    /// `mock_script` paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let (Some(script), Some(dir)) = (&cfg.llm.mock_script, path.parent()) {
            if script.is_relative() {
                cfg.llm.mock_script = Some(dir.join(script));
            }
        }
        cfg.apply_env(|k| std::env::var(k).ok());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        let i = &mut self.integrations;
        let slots: [(&str, &mut Option<String>); 7] = [
            ("REVKIT_LLM_API_KEY", &mut self.llm.api_key),
            ("REVKIT_GITHUB_TOKEN", &mut i.github.token),
            ("REVKIT_GITLAB_TOKEN", &mut i.gitlab.token),
            ("REVKIT_BITBUCKET_TOKEN", &mut i.bitbucket.token),
            ("REVKIT_WEBHOOK_SECRET", &mut i.webhook_secret),
            ("REVKIT_TRACKER_TOKEN", &mut i.tracker.token),
            ("REVKIT_WIKI_TOKEN", &mut i.wiki.token),
        ];
        for (key, slot) in slots {
            if let Some(v) = lookup(key).filter(|v| !v.is_empty()) {
                *slot = Some(v);
            }
        }
    }

    /// Every problem at once, not just the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.agents.enabled.is_empty() {
            errs.push("agents.enabled must name at least one agent".to_string());
        }
        let mut seen = self.agents.enabled.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.agents.enabled.len() {
            errs.push("agents.enabled lists an agent twice".into());
        }
        if !unit(self.agents.default_threshold) {
            errs.push("agents.default_threshold must be in [0, 1]".into());
        }
        for (k, t) in &self.agents.thresholds {
            if !unit(*t) {
                errs.push(format!("agents.thresholds.{k} must be in [0, 1]"));
            }
        }
        for (k, w) in &self.agents.weightage {
            if !(*w > 0.0 && *w <= 1.0) {
                errs.push(format!("agents.weightage.{k} must be in (0, 1]"));
            }
        }
        if self.agents.settings.model_id.trim().is_empty() {
            errs.push("agents.settings.model_id is empty".into());
        }
        if self.max_changed_loc == 0 {
            errs.push("max_changed_loc must be positive".into());
        }
        let r = &self.retrieval;
        if r.top_k == 0 {
            errs.push("retrieval.top_k must be positive".into());
        }
        if !(-1.0..=1.0).contains(&r.min_similarity) {
            errs.push("retrieval.min_similarity must be in [-1, 1]".into());
        }
        if r.chars_per_token == 0 || self.agents.settings.chars_per_token == 0 || self.features.chars_per_token == 0 {
            errs.push("chars_per_token must be positive".into());
        }
        if self.chunking.chunker.max_chunk_lines == 0 {
            errs.push("chunking.max_chunk_lines must be positive".into());
        }
        for l in &self.chunking.languages {
            if l != "python" {
                errs.push(format!("chunking.languages: unsupported language {l:?}"));
            }
        }
        let mut rules: Vec<_> = self.blending.dimensions.iter().map(|d| d.rule.name()).collect();
        rules.sort();
        if rules.windows(2).any(|w| w[0] == w[1]) {
            errs.push("blending.dimensions lists a rule twice".into());
        }
        match self.llm.provider {
            ProviderKind::Mock => {
                if self.llm.mock_script.is_none() {
                    errs.push("llm.mock_script is required for the mock provider".into());
                }
            }
            ProviderKind::Openai | ProviderKind::Anthropic => {
                if self.llm.api_key.as_deref().is_none_or(str::is_empty) {
                    errs.push("llm.api_key (or REVKIT_LLM_API_KEY) is required for live providers".into());
                }
            }
        }
        if self.llm.gateway.concurrency == 0 {
            errs.push("llm.gateway.concurrency must be positive".into());
        }
        if self.service.workers == 0 || self.service.queue_capacity == 0 {
            errs.push("service.workers and service.queue_capacity must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    /// The full default configuration as TOML, for reference.
    pub fn reference_toml() -> String {
        toml::to_string_pretty(&EngineConfig::default()).expect("default config serializes")
    }

    /// Lifetime of stored chunks: job timeout plus margin.
    pub fn chunk_ttl(&self) -> chrono::Duration {
        chrono::Duration::seconds((self.service.job_timeout_secs + self.chunking.ttl_margin_secs) as i64)
    }
}
