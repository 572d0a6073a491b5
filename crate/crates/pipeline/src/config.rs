//! TOML run configuration.
//!
//! Every knob has a default, so an empty file (or no file) is a valid
//! configuration; unknown keys are rejected to catch typos. The only value
//! that may interpolate an environment variable is the API key — secrets
//! stay out of config files, everything else stays out of the environment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cdecr_core::cluster::ClusterConfig;
use cdecr_core::direct::{ContextMode, DirectConfig, PromptMode};
use cdecr_core::pairscore::PairwiseConfig;
use cdecr_core::retrieve::RetrievalConfig;
use serde::{Deserialize, Serialize};

use crate::llm::ChatParams;
use crate::synth::SyntheticSpec;

/// Environment variable consulted when the config names no key source.
pub const API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("API key: environment variable `{0}` is not set")]
    MissingEnv(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed for every stage that trains or samples.
    pub seed: u64,
    pub paths: PathsConfig,
    pub llm: LlmSettings,
    pub retrieval: RetrievalSettings,
    pub pairwise: PairwiseSettings,
    pub clustering: ClusterSettings,
    pub provider: ProviderSettings,
    pub direct: DirectSettings,
    /// Split name → topic ids; topics absent from every split are unused.
    pub splits: BTreeMap<String, Vec<String>>,
    pub synth: SynthSettings,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Ok(toml::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Canonical-format corpus file.
    pub corpus: PathBuf,
    /// Directory all stage outputs go under (created on demand).
    pub out_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig { corpus: PathBuf::from("corpus.json"), out_dir: PathBuf::from("out") }
    }
}

impl PathsConfig {
    pub fn cache(&self) -> PathBuf {
        self.out_dir.join("cache.jsonl")
    }
    pub fn summaries(&self) -> PathBuf {
        self.out_dir.join("summaries.jsonl")
    }
    pub fn fused(&self) -> PathBuf {
        self.out_dir.join("fused.tsv")
    }
    pub fn token_vectors(&self) -> PathBuf {
        self.out_dir.join("tokens.tsv")
    }
    pub fn projection(&self) -> PathBuf {
        self.out_dir.join("projection.txt")
    }
    pub fn scorer(&self) -> PathBuf {
        self.out_dir.join("scorer.txt")
    }
    pub fn clusters(&self) -> PathBuf {
        self.out_dir.join("clusters.jsonl")
    }
    pub fn conll(&self) -> PathBuf {
        self.out_dir.join("predicted.conll")
    }
    pub fn gold_conll(&self) -> PathBuf {
        self.out_dir.join("gold.conll")
    }
    pub fn scores(&self) -> PathBuf {
        self.out_dir.join("scores.jsonl")
    }
    pub fn errors(&self) -> PathBuf {
        self.out_dir.join("errors.jsonl")
    }
    pub fn error_pairs(&self) -> PathBuf {
        self.out_dir.join("error_pairs.jsonl")
    }
    pub fn stats(&self) -> PathBuf {
        self.out_dir.join("stats.jsonl")
    }
    pub fn direct_log(&self) -> PathBuf {
        self.out_dir.join("direct_log.jsonl")
    }
    pub fn direct_clusters(&self) -> PathBuf {
        self.out_dir.join("direct_clusters.jsonl")
    }
    pub fn direct_scores(&self) -> PathBuf {
        self.out_dir.join("direct_scores.jsonl")
    }
    /// Mention-fact bank written by `synth` and replayed by the mock client.
    pub fn fact_bank(&self) -> PathBuf {
        self.out_dir.join("facts.jsonl")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    /// Sampling seed sent with each request, when the endpoint honors one.
    pub seed: Option<u64>,
    /// Worker threads for per-document summarization.
    pub max_concurrent: usize,
    /// Extra attempts after a failed call.
    pub retry_limit: usize,
    /// Key source: absent → the `LLM_API_KEY` environment variable;
    /// `"${SOME_VAR}"` → that environment variable. A literal key also
    /// works but does not belong in a config file.
    pub api_key: Option<String>,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            base_url: "https://api.openai.com".to_string(),
            model: "gpt-4".to_string(),
            temperature: 0.0,
            seed: Some(0),
            max_concurrent: 4,
            retry_limit: 2,
            api_key: None,
        }
    }
}

impl LlmSettings {
    pub fn resolve_api_key(&self) -> Result<String, ConfigError> {
        let read_env =
            |var: &str| std::env::var(var).map_err(|_| ConfigError::MissingEnv(var.to_string()));
        match &self.api_key {
            None => read_env(API_KEY_ENV),
            Some(value) => match value.strip_prefix("${").and_then(|v| v.strip_suffix('}')) {
                Some(var) => read_env(var),
                None => Ok(value.clone()),
            },
        }
    }

    pub fn chat_params(&self) -> ChatParams {
        ChatParams { model: self.model.clone(), temperature: self.temperature, seed: self.seed }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSettings {
    pub train_neighbor_size: usize,
    pub eval_neighbor_size: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub margin: f64,
    pub projection_dim: Option<usize>,
    /// `true`: search nearest neighbors within each topic separately.
    pub scope_by_topic: bool,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        let core = RetrievalConfig::default();
        RetrievalSettings {
            train_neighbor_size: core.train_neighbor_size,
            eval_neighbor_size: core.eval_neighbor_size,
            learning_rate: core.learning_rate,
            batch_size: core.batch_size,
            epochs: core.epochs,
            patience: core.patience,
            margin: core.margin,
            projection_dim: core.projection_dim,
            scope_by_topic: false,
        }
    }
}

impl RetrievalSettings {
    pub fn to_core(&self) -> RetrievalConfig {
        RetrievalConfig {
            train_neighbor_size: self.train_neighbor_size,
            eval_neighbor_size: self.eval_neighbor_size,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            patience: self.patience,
            margin: self.margin,
            projection_dim: self.projection_dim,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PairwiseSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub train_neighbor_size: usize,
}

impl Default for PairwiseSettings {
    fn default() -> Self {
        let core = PairwiseConfig::default();
        PairwiseSettings {
            learning_rate: core.learning_rate,
            batch_size: core.batch_size,
            epochs: core.epochs,
            patience: core.patience,
            train_neighbor_size: core.train_neighbor_size,
        }
    }
}

impl PairwiseSettings {
    /// The training seed comes from the run, not the config section.
    pub fn to_core(&self, seed: u64) -> PairwiseConfig {
        PairwiseConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            patience: self.patience,
            train_neighbor_size: self.train_neighbor_size,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSettings {
    /// Minimum average pairwise score for a merge.
    pub threshold: f64,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        ClusterSettings { threshold: ClusterConfig::default().threshold }
    }
}

impl ClusterSettings {
    pub fn to_core(&self) -> ClusterConfig {
        ClusterConfig { threshold: self.threshold }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    /// Deterministic hash embeddings computed on the fly.
    Hash,
    /// Vectors looked up from a token-vector file (document tokens only).
    Table,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSettings {
    pub kind: ProviderKind,
    pub dim: usize,
    /// Context window of the hash provider.
    pub window: usize,
    /// Per-offset decay of the hash provider.
    pub decay: f64,
    /// Token-vector file for the table provider; defaults to the `represent`
    /// stage's standard location under `paths.out_dir`.
    pub table_path: Option<PathBuf>,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        ProviderSettings {
            kind: ProviderKind::Hash,
            dim: 16,
            window: 8,
            decay: 0.7,
            table_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DirectMode {
    FewShot,
    ZeroShot,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DirectContext {
    FullDocuments,
    MentionSentences,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DirectSettings {
    pub mode: DirectMode,
    pub context: DirectContext,
    /// One request per topic (merged afterwards) instead of one global one.
    pub per_topic: bool,
    /// Whitespace-token budget per assembled prompt.
    pub input_token_budget: usize,
    /// Topics whose gold clustering forms the few-shot demonstration.
    pub demo_topics: Vec<String>,
}

impl Default for DirectSettings {
    fn default() -> Self {
        let core = DirectConfig::default();
        DirectSettings {
            mode: DirectMode::FewShot,
            context: DirectContext::FullDocuments,
            per_topic: core.per_topic,
            input_token_budget: core.input_token_budget,
            demo_topics: Vec::new(),
        }
    }
}

impl DirectSettings {
    pub fn to_core(&self) -> DirectConfig {
        DirectConfig {
            mode: match self.mode {
                DirectMode::FewShot => PromptMode::FewShot,
                DirectMode::ZeroShot => PromptMode::ZeroShot,
            },
            context: match self.context {
                DirectContext::FullDocuments => ContextMode::FullDocuments,
                DirectContext::MentionSentences => ContextMode::MentionSentences,
            },
            per_topic: self.per_topic,
            input_token_budget: self.input_token_budget,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub topics: usize,
    pub clusters_per_topic: usize,
    pub mentions_per_cluster: usize,
    pub dim: usize,
    /// Document-side ambiguity (0 = fully disambiguated documents).
    pub sigma: f64,
    /// Cluster-specific fact tokens per mock summary.
    pub signal: usize,
}

impl Default for SynthSettings {
    fn default() -> Self {
        let spec = SyntheticSpec::default();
        SynthSettings {
            topics: spec.topics,
            clusters_per_topic: spec.clusters_per_topic,
            mentions_per_cluster: spec.mentions_per_cluster,
            dim: spec.dim,
            sigma: spec.sigma,
            signal: spec.signal,
        }
    }
}

impl SynthSettings {
    pub fn to_spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            topics: self.topics,
            clusters_per_topic: self.clusters_per_topic,
            mentions_per_cluster: self.mentions_per_cluster,
            dim: self.dim,
            sigma: self.sigma,
            signal: self.signal,
            seed,
        }
    }
}
