//! Pipeline configuration: TOML file, command-line overrides, validation.
//!
//! A single TOML file configures every stage. Each value has a default,
//! every value can be overridden by a command-line flag, and the merged
//! result is validated once into an [`EffectiveConfig`] that the stages
//! consume. Validation failures are [`ConfigError`]s and exit the binary
//! with status 2, before any stage runs.
//!
//! The effective config also has a canonical JSON serialization whose
//! SHA-256 is recorded in the artifact manifest, so artifacts can be tied
//! to the exact configuration that produced them.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use flowmine_core::cluster::Linkage;

/// A configuration problem; always exits with status 2.
#[derive(Debug, Error)]
#[error("invalid configuration: {message}")]
pub struct ConfigError {
    /// What is wrong.
    pub message: String,
}

impl ConfigError {
    fn new(message: impl fmt::Display) -> Self {
        ConfigError {
            message: message.to_string(),
        }
    }
}

/// How the extraction batch is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchMode {
    /// The first `batch_size` conversations in file order.
    First,
    /// A seeded sample of `batch_size` conversations, stable under any
    /// reordering of the corpus file.
    Sample,
}

/// Where embedding vectors come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// A batched HTTP embedding service.
    Http,
    /// A pre-filled cache file only; unseen texts fail.
    Cache,
    /// The offline token-set embedder derived from the corpus.
    Synthetic,
}

/// Which path method extraction uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    /// Maximum-bottleneck path.
    Widest,
    /// Most-nodes path.
    Longest,
    /// Greatest-total-weight path.
    Maxweight,
    /// Completion-model summarization baseline.
    Prompt,
}

impl MethodKind {
    /// The tag recorded on flows mined with this method.
    pub fn tag(self) -> &'static str {
        match self {
            MethodKind::Widest => "widest",
            MethodKind::Longest => "longest",
            MethodKind::Maxweight => "maxweight",
            MethodKind::Prompt => "prompt",
        }
    }
}

/// Serializable stand-in for the normalizer's linkage choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkageKind {
    /// Mean pairwise distance.
    Average,
    /// Maximum pairwise distance.
    Complete,
    /// Minimum pairwise distance.
    Single,
}

impl LinkageKind {
    /// The core linkage this names.
    pub fn to_linkage(self) -> Linkage {
        match self {
            LinkageKind::Average => Linkage::Average,
            LinkageKind::Complete => Linkage::Complete,
            LinkageKind::Single => Linkage::Single,
        }
    }
}

fn parse_keyword<T: Copy>(raw: &str, table: &[(&str, T)], what: &str) -> Result<T, ConfigError> {
    table
        .iter()
        .find(|(name, _)| *name == raw)
        .map(|(_, value)| *value)
        .ok_or_else(|| {
            let options: Vec<&str> = table.iter().map(|(name, _)| *name).collect();
            ConfigError::new(format!(
                "{what} must be one of {}, got {raw:?}",
                options.join(", ")
            ))
        })
}

/// The embedding section of the TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingFile {
    provider: Option<String>,
    endpoint: Option<String>,
    cache_path: Option<PathBuf>,
    provider_tag: Option<String>,
}

/// The completion section of the TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompletionFile {
    endpoint: Option<String>,
    model: Option<String>,
    timeout_ms: Option<u64>,
    max_retries: Option<u32>,
    max_tokens: Option<u32>,
    parallelism: Option<usize>,
    max_prompt_batch: Option<usize>,
    annotation_template: Option<PathBuf>,
    flow_template: Option<PathBuf>,
    example_path: Option<PathBuf>,
}

/// The normalizer section of the TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormalizerFile {
    user_threshold: Option<f64>,
    agent_threshold: Option<f64>,
    linkage: Option<String>,
}

/// The extractor section of the TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtractorFile {
    method: Option<String>,
    epsilon: Option<f64>,
    kappa: Option<f64>,
    max_digressions: Option<usize>,
    max_path_nodes: Option<usize>,
}

/// The evaluation section of the TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateFile {
    similarity_threshold: Option<f64>,
    alignments: Option<PathBuf>,
}

/// The whole TOML file; all values optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    corpus: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    batch_size: Option<usize>,
    batch_mode: Option<String>,
    seed: Option<u64>,
    #[serde(default)]
    embedding: EmbeddingFile,
    #[serde(default)]
    completion: CompletionFile,
    #[serde(default)]
    normalizer: NormalizerFile,
    #[serde(default)]
    extractor: ExtractorFile,
    #[serde(default)]
    evaluate: EvaluateFile,
}

/// Command-line overrides, every field optional. Field names mirror the
/// TOML keys; the binary's flag definitions populate this.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    /// Corpus file path.
    pub corpus: Option<PathBuf>,
    /// Output directory.
    pub output_dir: Option<PathBuf>,
    /// Extraction batch size.
    pub batch_size: Option<usize>,
    /// Batch selection mode, `first` or `sample`.
    pub batch_mode: Option<String>,
    /// Seed for sampled batch selection.
    pub seed: Option<u64>,
    /// Embedding provider, `http`, `cache`, or `synthetic`.
    pub embedding_provider: Option<String>,
    /// Embedding service endpoint.
    pub embedding_endpoint: Option<String>,
    /// Embedding cache file path.
    pub embedding_cache: Option<PathBuf>,
    /// Completion service endpoint.
    pub completion_endpoint: Option<String>,
    /// Completion model name.
    pub completion_model: Option<String>,
    /// Completion retry limit.
    pub max_retries: Option<u32>,
    /// Concurrent conversations during annotation.
    pub parallelism: Option<usize>,
    /// User-side clustering distance threshold.
    pub user_threshold: Option<f64>,
    /// Agent-side clustering distance threshold.
    pub agent_threshold: Option<f64>,
    /// Clustering linkage, `average`, `complete`, or `single`.
    pub linkage: Option<String>,
    /// Extraction method, `widest`, `longest`, `maxweight`, or `prompt`.
    pub method: Option<String>,
    /// How many digressions to keep.
    pub digressions: Option<usize>,
    /// Digression candidate similarity threshold.
    pub epsilon: Option<f64>,
    /// Digression path similarity threshold.
    pub kappa: Option<f64>,
    /// Path search node bound.
    pub max_path_nodes: Option<usize>,
    /// Similarity threshold for soft step matching in evaluation.
    pub similarity_threshold: Option<f64>,
    /// Alignment file for precision/recall evaluation.
    pub alignments: Option<PathBuf>,
}

/// Validated embedding settings.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingConfig {
    /// Where vectors come from.
    pub provider: ProviderKind,
    /// Service endpoint; required when `provider` is `http`.
    pub endpoint: Option<String>,
    /// Cache file, loaded when present and required for `cache`.
    pub cache_path: Option<PathBuf>,
    /// Tag identifying the vector source; caches refuse to mix tags.
    pub provider_tag: String,
}

/// Validated completion settings.
#[derive(Debug, Clone, Serialize)]
pub struct CompletionConfig {
    /// Service endpoint; required for annotation of unannotated corpora
    /// and for the prompt extraction method.
    pub endpoint: Option<String>,
    /// Model name sent with every request.
    pub model: String,
    /// Per-request timeout in milliseconds.
    pub timeout_ms: u64,
    /// Retries after a failed request.
    pub max_retries: u32,
    /// Completion length cap sent with every request.
    pub max_tokens: u32,
    /// Conversations annotated concurrently.
    pub parallelism: usize,
    /// Most conversations one flow-summarization prompt may carry.
    pub max_prompt_batch: usize,
    /// Annotation prompt template file; `None` uses the bundled template.
    pub annotation_template: Option<PathBuf>,
    /// Flow-summarization template file; `None` uses the bundled template.
    pub flow_template: Option<PathBuf>,
    /// Worked annotation example file; `None` uses the bundled example.
    pub example_path: Option<PathBuf>,
}

/// Validated normalizer settings.
#[derive(Debug, Clone, Serialize)]
pub struct NormalizerConfig {
    /// User-side merge threshold (Euclidean distance of unit vectors).
    pub user_threshold: f64,
    /// Agent-side merge threshold.
    pub agent_threshold: f64,
    /// Cluster linkage.
    pub linkage: LinkageKind,
}

/// Validated extractor settings.
#[derive(Debug, Clone, Serialize)]
pub struct ExtractorConfig {
    /// Path method.
    pub method: MethodKind,
    /// Candidate similarity threshold, in `(0, 1]`.
    pub epsilon: f64,
    /// Path similarity threshold, in `(0, 1]`.
    pub kappa: f64,
    /// Digressions kept on the flow.
    pub max_digressions: usize,
    /// Node bound for path searches.
    pub max_path_nodes: usize,
}

/// Validated evaluation settings.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluateConfig {
    /// Cosine threshold for soft step matching, in `(0, 1]`.
    pub similarity_threshold: f64,
    /// Optional alignment file for precision/recall.
    pub alignments: Option<PathBuf>,
}

/// The merged, validated configuration every stage consumes.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveConfig {
    /// Corpus file.
    pub corpus: PathBuf,
    /// Directory receiving every artifact.
    pub output_dir: PathBuf,
    /// Extraction batch size.
    pub batch_size: usize,
    /// Batch selection mode.
    pub batch_mode: BatchMode,
    /// Seed for sampled batch selection.
    pub seed: u64,
    /// Embedding settings.
    pub embedding: EmbeddingConfig,
    /// Completion settings.
    pub completion: CompletionConfig,
    /// Normalizer settings.
    pub normalizer: NormalizerConfig,
    /// Extractor settings.
    pub extractor: ExtractorConfig,
    /// Evaluation settings.
    pub evaluate: EvaluateConfig,
}

fn require_unit_interval(value: f64, what: &str) -> Result<(), ConfigError> {
    if !(value > 0.0 && value <= 1.0) {
        return Err(ConfigError::new(format!(
            "{what} must be in (0, 1], got {value}"
        )));
    }
    Ok(())
}

fn require_positive_threshold(value: f64, what: &str) -> Result<(), ConfigError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(ConfigError::new(format!(
            "{what} must be a positive finite number, got {value}"
        )));
    }
    Ok(())
}

fn require_file(path: &Path, what: &str) -> Result<(), ConfigError> {
    if !path.is_file() {
        return Err(ConfigError::new(format!(
            "{what} {} does not exist or is not a file",
            path.display()
        )));
    }
    Ok(())
}

impl EffectiveConfig {
    /// Reads `path`, applies `overrides`, validates, and returns the
    /// effective configuration.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new(format!("cannot read config {}: {e}", path.display()))
        })?;
        let file: ConfigFile = toml::from_str(&raw).map_err(|e| {
            ConfigError::new(format!("cannot parse config {}: {e}", path.display()))
        })?;
        EffectiveConfig::merge(file, overrides)
    }

    fn merge(file: ConfigFile, overrides: &Overrides) -> Result<Self, ConfigError> {
        let corpus = overrides
            .corpus
            .clone()
            .or(file.corpus)
            .ok_or_else(|| ConfigError::new("corpus path is required (corpus = \"…\")"))?;
        let output_dir = overrides
            .output_dir
            .clone()
            .or(file.output_dir)
            .ok_or_else(|| ConfigError::new("output directory is required (output_dir = \"…\")"))?;
        let batch_size = overrides.batch_size.or(file.batch_size).unwrap_or(100);
        let batch_mode_raw = overrides
            .batch_mode
            .clone()
            .or(file.batch_mode)
            .unwrap_or_else(|| "first".to_string());
        let batch_mode = parse_keyword(
            &batch_mode_raw,
            &[("first", BatchMode::First), ("sample", BatchMode::Sample)],
            "batch_mode",
        )?;
        let seed = overrides.seed.or(file.seed).unwrap_or(0);

        let provider_raw = overrides
            .embedding_provider
            .clone()
            .or(file.embedding.provider)
            .unwrap_or_else(|| "synthetic".to_string());
        let provider = parse_keyword(
            &provider_raw,
            &[
                ("http", ProviderKind::Http),
                ("cache", ProviderKind::Cache),
                ("synthetic", ProviderKind::Synthetic),
            ],
            "embedding.provider",
        )?;
        let embedding = EmbeddingConfig {
            provider,
            endpoint: overrides
                .embedding_endpoint
                .clone()
                .or(file.embedding.endpoint),
            cache_path: overrides
                .embedding_cache
                .clone()
                .or(file.embedding.cache_path),
            provider_tag: file.embedding.provider_tag.unwrap_or_else(|| {
                match provider {
                    ProviderKind::Synthetic => crate::synthetic::SYNTHETIC_TAG.to_string(),
                    _ => "http".to_string(),
                }
            }),
        };

        let completion = CompletionConfig {
            endpoint: overrides
                .completion_endpoint
                .clone()
                .or(file.completion.endpoint),
            model: overrides
                .completion_model
                .clone()
                .or(file.completion.model)
                .unwrap_or_else(|| "default".to_string()),
            timeout_ms: file.completion.timeout_ms.unwrap_or(30_000),
            max_retries: overrides
                .max_retries
                .or(file.completion.max_retries)
                .unwrap_or(3),
            max_tokens: file.completion.max_tokens.unwrap_or(256),
            parallelism: overrides
                .parallelism
                .or(file.completion.parallelism)
                .unwrap_or(4),
            max_prompt_batch: file.completion.max_prompt_batch.unwrap_or(100),
            annotation_template: file.completion.annotation_template,
            flow_template: file.completion.flow_template,
            example_path: file.completion.example_path,
        };

        let linkage_raw = overrides
            .linkage
            .clone()
            .or(file.normalizer.linkage)
            .unwrap_or_else(|| "average".to_string());
        let normalizer = NormalizerConfig {
            user_threshold: overrides
                .user_threshold
                .or(file.normalizer.user_threshold)
                .unwrap_or(0.9),
            agent_threshold: overrides
                .agent_threshold
                .or(file.normalizer.agent_threshold)
                .unwrap_or(0.7),
            linkage: parse_keyword(
                &linkage_raw,
                &[
                    ("average", LinkageKind::Average),
                    ("complete", LinkageKind::Complete),
                    ("single", LinkageKind::Single),
                ],
                "normalizer.linkage",
            )?,
        };

        let method_raw = overrides
            .method
            .clone()
            .or(file.extractor.method)
            .unwrap_or_else(|| "widest".to_string());
        let extractor = ExtractorConfig {
            method: parse_keyword(
                &method_raw,
                &[
                    ("widest", MethodKind::Widest),
                    ("longest", MethodKind::Longest),
                    ("maxweight", MethodKind::Maxweight),
                    ("prompt", MethodKind::Prompt),
                ],
                "extractor.method",
            )?,
            epsilon: overrides.epsilon.or(file.extractor.epsilon).unwrap_or(0.8),
            kappa: overrides.kappa.or(file.extractor.kappa).unwrap_or(0.8),
            max_digressions: overrides
                .digressions
                .or(file.extractor.max_digressions)
                .unwrap_or(1),
            max_path_nodes: overrides
                .max_path_nodes
                .or(file.extractor.max_path_nodes)
                .unwrap_or(64),
        };

        let evaluate = EvaluateConfig {
            similarity_threshold: overrides
                .similarity_threshold
                .or(file.evaluate.similarity_threshold)
                .unwrap_or(0.8),
            alignments: overrides.alignments.clone().or(file.evaluate.alignments),
        };

        let config = EffectiveConfig {
            corpus,
            output_dir,
            batch_size,
            batch_mode,
            seed,
            embedding,
            completion,
            normalizer,
            extractor,
            evaluate,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        require_file(&self.corpus, "corpus file")?;
        if self.batch_size < 1 {
            return Err(ConfigError::new("batch_size must be at least 1"));
        }
        match self.embedding.provider {
            ProviderKind::Http => {
                if self.embedding.endpoint.is_none() {
                    return Err(ConfigError::new(
                        "embedding.provider = \"http\" requires embedding.endpoint",
                    ));
                }
                if let Some(cache) = &self.embedding.cache_path {
                    require_file(cache, "embedding cache file")?;
                }
            }
            ProviderKind::Cache => {
                let cache = self.embedding.cache_path.as_ref().ok_or_else(|| {
                    ConfigError::new("embedding.provider = \"cache\" requires embedding.cache_path")
                })?;
                require_file(cache, "embedding cache file")?;
            }
            ProviderKind::Synthetic => {
                if let Some(cache) = &self.embedding.cache_path {
                    require_file(cache, "embedding cache file")?;
                }
            }
        }
        if self.completion.parallelism < 1 {
            return Err(ConfigError::new("completion.parallelism must be at least 1"));
        }
        if self.completion.max_prompt_batch < 1 {
            return Err(ConfigError::new(
                "completion.max_prompt_batch must be at least 1",
            ));
        }
        for template in [
            &self.completion.annotation_template,
            &self.completion.flow_template,
            &self.completion.example_path,
        ]
        .into_iter()
        .flatten()
        {
            require_file(template, "template file")?;
        }
        require_positive_threshold(self.normalizer.user_threshold, "normalizer.user_threshold")?;
        require_positive_threshold(self.normalizer.agent_threshold, "normalizer.agent_threshold")?;
        require_unit_interval(self.extractor.epsilon, "extractor.epsilon")?;
        require_unit_interval(self.extractor.kappa, "extractor.kappa")?;
        if self.extractor.max_path_nodes < 1 {
            return Err(ConfigError::new("extractor.max_path_nodes must be at least 1"));
        }
        require_unit_interval(
            self.evaluate.similarity_threshold,
            "evaluate.similarity_threshold",
        )?;
        if let Some(alignments) = &self.evaluate.alignments {
            require_file(alignments, "alignments file")?;
        }
        Ok(())
    }

    /// Canonical JSON serialization of the configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configs serialize infallibly")
    }

    /// SHA-256 of the canonical serialization, hex-encoded.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn corpus_file() -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            "{}",
            "{\"id\":\"a\",\"turns\":[{\"role\":\"user\",\"text\":\"hi\"}]}"
        )
        .unwrap();
        file.flush().unwrap();
        file
    }

    fn config_with(corpus: &Path, body: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
        writeln!(
            file,
            "corpus = {:?}\noutput_dir = \"out\"\n{body}",
            corpus.display().to_string()
        )
        .unwrap();
        file.flush().unwrap();
        file
    }

    #[test]
    fn defaults_fill_every_unset_value() {
        let corpus = corpus_file();
        let config_file = config_with(corpus.path(), "");
        let config = EffectiveConfig::load(config_file.path(), &Overrides::default()).unwrap();
        assert_eq!(config.batch_size, 100);
        assert_eq!(config.batch_mode, BatchMode::First);
        assert_eq!(config.embedding.provider, ProviderKind::Synthetic);
        assert_eq!(config.normalizer.user_threshold, 0.9);
        assert_eq!(config.normalizer.agent_threshold, 0.7);
        assert_eq!(config.normalizer.linkage, LinkageKind::Average);
        assert_eq!(config.extractor.method, MethodKind::Widest);
        assert_eq!(config.extractor.epsilon, 0.8);
        assert_eq!(config.extractor.kappa, 0.8);
        assert_eq!(config.extractor.max_digressions, 1);
        assert_eq!(config.extractor.max_path_nodes, 64);
        assert_eq!(config.evaluate.similarity_threshold, 0.8);
        assert_eq!(config.completion.max_retries, 3);
        assert_eq!(config.completion.parallelism, 4);
        assert_eq!(config.completion.max_prompt_batch, 100);
    }

    #[test]
    fn overrides_beat_file_values() {
        let corpus = corpus_file();
        let config_file = config_with(
            corpus.path(),
            "batch_size = 7\n[extractor]\nmethod = \"longest\"\n",
        );
        let overrides = Overrides {
            batch_size: Some(11),
            method: Some("maxweight".to_string()),
            ..Overrides::default()
        };
        let config = EffectiveConfig::load(config_file.path(), &overrides).unwrap();
        assert_eq!(config.batch_size, 11);
        assert_eq!(config.extractor.method, MethodKind::Maxweight);
    }

    #[test]
    fn zero_batch_size_is_rejected() {
        let corpus = corpus_file();
        let config_file = config_with(corpus.path(), "batch_size = 0\n");
        let err = EffectiveConfig::load(config_file.path(), &Overrides::default()).unwrap_err();
        assert!(err.message.contains("batch_size"), "{}", err.message);
    }

    #[test]
    fn a_missing_corpus_file_is_rejected() {
        let config_file = config_with(Path::new("/nonexistent/corpus.jsonl"), "");
        let err = EffectiveConfig::load(config_file.path(), &Overrides::default()).unwrap_err();
        assert!(err.message.contains("corpus"), "{}", err.message);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let corpus = corpus_file();
        let config_file = config_with(corpus.path(), "surprise = true\n");
        let err = EffectiveConfig::load(config_file.path(), &Overrides::default()).unwrap_err();
        assert!(err.message.contains("surprise"), "{}", err.message);
    }

    #[test]
    fn http_provider_requires_an_endpoint() {
        let corpus = corpus_file();
        let config_file = config_with(corpus.path(), "[embedding]\nprovider = \"http\"\n");
        let err = EffectiveConfig::load(config_file.path(), &Overrides::default()).unwrap_err();
        assert!(err.message.contains("endpoint"), "{}", err.message);
    }

    #[test]
    fn epsilon_outside_the_unit_interval_is_rejected() {
        let corpus = corpus_file();
        let config_file = config_with(corpus.path(), "[extractor]\nepsilon = 1.5\n");
        let err = EffectiveConfig::load(config_file.path(), &Overrides::default()).unwrap_err();
        assert!(err.message.contains("epsilon"), "{}", err.message);
    }

    #[test]
    fn bad_keyword_values_list_the_options() {
        let corpus = corpus_file();
        let config_file = config_with(corpus.path(), "batch_mode = \"middle\"\n");
        let err = EffectiveConfig::load(config_file.path(), &Overrides::default()).unwrap_err();
        assert!(err.message.contains("first"), "{}", err.message);
        assert!(err.message.contains("sample"), "{}", err.message);
    }

    #[test]
    fn the_config_hash_is_stable_and_sensitive() {
        let corpus = corpus_file();
        let config_file = config_with(corpus.path(), "");
        let a = EffectiveConfig::load(config_file.path(), &Overrides::default()).unwrap();
        let b = EffectiveConfig::load(config_file.path(), &Overrides::default()).unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
        let overrides = Overrides {
            batch_size: Some(5),
            ..Overrides::default()
        };
        let c = EffectiveConfig::load(config_file.path(), &overrides).unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
    }
}
