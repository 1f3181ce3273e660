//! The five mining stages and their orchestration.
//!
//! Each stage reads its input artifact from the output directory, does its
//! work through the core library, and writes its output artifact plus an
//! updated manifest. Stages communicate only through those files, so
//! running the chained pipeline and running the stage commands one by one
//! produce byte-identical artifacts.
//!
//! The stages, in order:
//!
//! 1. **annotate** — corpus file → `annotated.jsonl` (pass-through when
//!    the corpus already carries canonical forms on every turn).
//! 2. **normalize** — `annotated.jsonl` → `normalized.jsonl`, merging
//!    near-duplicate canonical forms by agglomerative clustering.
//! 3. **graph** — `normalized.jsonl` → `graph.json`, the weighted
//!    interaction graph of the extraction batch.
//! 4. **extract** — `graph.json` → `flow.json`, `flow.colang`,
//!    `flow.dot`: the mined dialogue flow.
//! 5. **evaluate** — `flow.json` + held-out conversations →
//!    `eval_report.json`, `eval_report.txt`.
//!
//! A failed stage reports its own name so the exit path can say which
//! stage went wrong.

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use anyhow::{anyhow, bail, Context};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use flowmine_core::cluster::build_normalization;
use flowmine_core::corpus::{Conversation, Corpus};
use flowmine_core::embedding::{EmbeddingCache, EmbeddingProvider};
use flowmine_core::extract::{
    detect_digressions, longest_path, max_weight_path, widest_path, DialogueFlow,
};
use flowmine_core::graph::{build_graph, export_dot, select_endpoints};
use flowmine_core::metrics::{evaluate_alignments, score_flow, AlignmentReport};
use flowmine_core::prompt::{
    annotate_conversation, AnnotateError, AnnotationTemplate, FlowSummaryTemplate,
};

use crate::artifacts::{
    artifact_path, read_artifact, render_eval_report_json, render_flow_json, render_graph_json,
    write_artifact, ArtifactError, Manifest, METEOR_NOTE,
};
use crate::cachefile::{load_cache, save_cache};
use crate::config::{BatchMode, EffectiveConfig, MethodKind, ProviderKind};
use crate::http::{CompletionClient, HttpEmbeddingProvider};
use crate::interchange::{corpus_to_string, load_alignments, load_corpus, render_cluster_dump};
use crate::render::{render_colang, render_eval_table};
use crate::synthetic::SyntheticProvider;

/// Artifact written by the annotate stage.
pub const ANNOTATED_NAME: &str = "annotated.jsonl";
/// Artifact written by the normalize stage.
pub const NORMALIZED_NAME: &str = "normalized.jsonl";
/// Cluster dump written by the normalize stage on request.
pub const CLUSTERS_NAME: &str = "clusters.json";
/// Artifact written by the graph stage.
pub const GRAPH_NAME: &str = "graph.json";
/// Graph drawing written by the graph stage on request.
pub const GRAPH_DOT_NAME: &str = "graph.dot";
/// Artifact written by the extract stage.
pub const FLOW_NAME: &str = "flow.json";
/// Flow rendering written by the extract stage.
pub const FLOW_COLANG_NAME: &str = "flow.colang";
/// Flow drawing written by the extract stage.
pub const FLOW_DOT_NAME: &str = "flow.dot";
/// Machine-readable report written by the evaluate stage.
pub const EVAL_JSON_NAME: &str = "eval_report.json";
/// Human-readable report written by the evaluate stage.
pub const EVAL_TEXT_NAME: &str = "eval_report.txt";

/// Bundled annotation prompt; a config path can replace it.
const DEFAULT_ANNOTATION_TEMPLATE: &str = include_str!("../templates/annotation_prompt.txt");
/// Bundled flow-summarization prompt; a config path can replace it.
const DEFAULT_FLOW_TEMPLATE: &str = include_str!("../templates/flow_summary_prompt.txt");
/// Bundled worked annotation example; a config path can replace it.
const DEFAULT_EXAMPLE: &str = include_str!("../templates/annotation_example.txt");

/// A stage failure, naming the stage for the exit path.
#[derive(Debug, Error)]
#[error("stage {stage} failed: {message}")]
pub struct StageError {
    /// The stage that failed.
    pub stage: &'static str,
    /// What went wrong, outermost cause first.
    pub message: String,
}

impl StageError {
    fn wrap(stage: &'static str) -> impl FnOnce(anyhow::Error) -> StageError {
        move |e| StageError {
            stage,
            // `:#` flattens the context chain into one line.
            message: format!("{e:#}"),
        }
    }
}

// --- batch selection ------------------------------------------------------

/// The extraction batch and the held-out remainder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    /// Conversations the graph is built from.
    pub batch: Corpus,
    /// Conversations reserved for evaluation.
    pub holdout: Corpus,
}

/// Splits a corpus into extraction batch and holdout.
///
/// `first` mode takes the first `batch_size` conversations in file order;
/// `sample` mode shuffles the sorted conversation ids with a seeded
/// generator and takes `batch_size` of them, emitting both sides in
/// sorted-id order so the split is independent of file order. A corpus
/// smaller than twice the batch size falls back to an 80/20 split with a
/// logged warning.
pub fn split_corpus(corpus: &Corpus, batch_size: usize, mode: BatchMode, seed: u64) -> Split {
    let n = corpus.len();
    let take = if n < 2 * batch_size {
        let take = (n * 4 / 5).max(1).min(n);
        log::warn!(
            "corpus has {n} conversations, fewer than twice the batch size {batch_size}; \
             falling back to an 80/20 split ({take} extraction, {} held out)",
            n - take
        );
        take
    } else {
        batch_size
    };
    let (batch, holdout): (Vec<Conversation>, Vec<Conversation>) = match mode {
        BatchMode::First => {
            let conversations = corpus.conversations();
            (
                conversations[..take].to_vec(),
                conversations[take..].to_vec(),
            )
        }
        BatchMode::Sample => {
            let mut ids: Vec<&str> = corpus.conversations().iter().map(Conversation::id).collect();
            ids.sort_unstable();
            let mut shuffled = ids.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            shuffled.shuffle(&mut rng);
            let chosen: std::collections::BTreeSet<&str> =
                shuffled.into_iter().take(take).collect();
            let pick = |wanted: bool| -> Vec<Conversation> {
                ids.iter()
                    .filter(|id| chosen.contains(**id) == wanted)
                    .map(|id| {
                        corpus
                            .get(id)
                            .expect("ids were taken from this corpus")
                            .clone()
                    })
                    .collect()
            };
            (pick(true), pick(false))
        }
    };
    Split {
        batch: Corpus::new(batch).expect("a subset of a valid corpus stays valid"),
        holdout: Corpus::new(holdout).expect("a subset of a valid corpus stays valid"),
    }
}

// --- embeddings -----------------------------------------------------------

/// Text sent once to a remote embedding service to learn its vector
/// dimension when no cache file fixes it in advance.
const DIMENSION_PROBE_TEXT: &str = "dimension probe";

/// A cache plus the provider that fills it, ready for the core calls
/// that take both.
pub struct EmbeddingStack {
    /// The cache every lookup goes through.
    pub cache: EmbeddingCache,
    provider: Option<Box<dyn EmbeddingProvider>>,
    persist_path: Option<std::path::PathBuf>,
}

impl EmbeddingStack {
    /// The provider, if this configuration can fetch missing vectors.
    pub fn provider(&self) -> Option<&dyn EmbeddingProvider> {
        self.provider.as_deref()
    }

    /// The cache and provider as disjoint borrows, in the shape the core
    /// calls take them.
    pub fn parts(&mut self) -> (&mut EmbeddingCache, Option<&dyn EmbeddingProvider>) {
        (&mut self.cache, self.provider.as_deref())
    }

    /// Writes the cache back to its file so later stages and runs reuse
    /// the fetched vectors. A no-op unless this stack can fetch and a
    /// cache path is configured.
    pub fn persist(&self) -> anyhow::Result<()> {
        if let (Some(path), Some(_)) = (&self.persist_path, &self.provider) {
            save_cache(path, &self.cache)
                .with_context(|| format!("cannot persist the embedding cache to {}", path.display()))?;
        }
        Ok(())
    }
}

/// Builds the embedding stack for one stage.
///
/// * `synthetic` — deterministic one-hot vectors over the vocabulary of
///   `vocab_corpus`; needs no network.
/// * `http` — a remote service; the cache file (when configured) fixes
///   the vector dimension, otherwise one probe request learns it.
/// * `cache` — the cache file alone; any miss surfaces as an error
///   naming the missing text.
///
/// The remote client shares the completion client's network policy
/// (timeout and retry budget).
pub fn build_embedding_stack(
    cfg: &EffectiveConfig,
    vocab_corpus: &Corpus,
) -> anyhow::Result<EmbeddingStack> {
    let settings = &cfg.embedding;
    let load = |path: &Path| -> anyhow::Result<EmbeddingCache> {
        load_cache(path).with_context(|| format!("cannot load the embedding cache {}", path.display()))
    };
    match settings.provider {
        ProviderKind::Synthetic => {
            let provider = SyntheticProvider::from_corpus(vocab_corpus);
            let cache = match &settings.cache_path {
                Some(path) => load(path)?,
                None => EmbeddingCache::new(provider.dim(), provider.provider_tag())
                    .map_err(|e| anyhow!("cannot create the embedding cache: {e}"))?,
            };
            Ok(EmbeddingStack {
                cache,
                provider: Some(Box::new(provider)),
                persist_path: settings.cache_path.clone(),
            })
        }
        ProviderKind::Http => {
            let endpoint = settings
                .endpoint
                .as_deref()
                .expect("validation requires an endpoint for the http provider");
            let provider = HttpEmbeddingProvider::new(
                endpoint,
                &settings.provider_tag,
                cfg.completion.timeout_ms,
                cfg.completion.max_retries,
            );
            let cache = match &settings.cache_path {
                Some(path) => load(path)?,
                None => {
                    let probe = provider
                        .embed_batch(&[DIMENSION_PROBE_TEXT])
                        .map_err(|e| anyhow!("embedding dimension probe failed: {e}"))?;
                    let dim = probe.first().map(Vec::len).unwrap_or(0);
                    EmbeddingCache::new(dim, &settings.provider_tag)
                        .map_err(|e| anyhow!("embedding dimension probe returned an unusable vector: {e}"))?
                }
            };
            Ok(EmbeddingStack {
                cache,
                provider: Some(Box::new(provider)),
                persist_path: settings.cache_path.clone(),
            })
        }
        ProviderKind::Cache => {
            let path = settings
                .cache_path
                .as_deref()
                .expect("validation requires a cache path for the cache provider");
            Ok(EmbeddingStack {
                cache: load(path)?,
                provider: None,
                persist_path: None,
            })
        }
    }
}

// --- completion helpers ---------------------------------------------------

fn completion_client(cfg: &EffectiveConfig) -> anyhow::Result<CompletionClient> {
    let endpoint = cfg.completion.endpoint.as_deref().ok_or_else(|| {
        anyhow!("a completion endpoint is required (set completion.endpoint or --completion-endpoint)")
    })?;
    Ok(CompletionClient::new(
        endpoint,
        &cfg.completion.model,
        cfg.completion.timeout_ms,
        cfg.completion.max_retries,
        cfg.completion.max_tokens,
    ))
}

fn text_or_default(path: Option<&Path>, bundled: &str, what: &str) -> anyhow::Result<String> {
    match path {
        Some(p) => std::fs::read_to_string(p)
            .with_context(|| format!("cannot read the {what} file {}", p.display())),
        None => Ok(bundled.to_string()),
    }
}

fn annotation_template(cfg: &EffectiveConfig) -> anyhow::Result<AnnotationTemplate> {
    let text = text_or_default(
        cfg.completion.annotation_template.as_deref(),
        DEFAULT_ANNOTATION_TEMPLATE,
        "annotation template",
    )?;
    AnnotationTemplate::new(&text).map_err(|e| anyhow!("invalid annotation template: {e}"))
}

fn flow_template(cfg: &EffectiveConfig) -> anyhow::Result<FlowSummaryTemplate> {
    let text = text_or_default(
        cfg.completion.flow_template.as_deref(),
        DEFAULT_FLOW_TEMPLATE,
        "flow-summarization template",
    )?;
    FlowSummaryTemplate::new(&text).map_err(|e| anyhow!("invalid flow-summarization template: {e}"))
}

fn worked_example(cfg: &EffectiveConfig) -> anyhow::Result<String> {
    text_or_default(
        cfg.completion.example_path.as_deref(),
        DEFAULT_EXAMPLE,
        "worked annotation example",
    )
}

/// Annotates conversations concurrently, `parallelism` at a time, and
/// merges the results in corpus order.
///
/// Conversation `i` goes to worker `i % workers`, each worker annotates
/// its share sequentially (turn order inside a conversation is a data
/// dependency), and successful runs are merged by index — so the output
/// never depends on thread scheduling. On failure the remaining workers
/// stop early and the earliest recorded failure is reported.
fn annotate_parallel(
    corpus: &Corpus,
    service: &CompletionClient,
    template: &AnnotationTemplate,
    example: &str,
    parallelism: usize,
) -> Result<Corpus, AnnotateError> {
    let conversations = corpus.conversations();
    let workers = parallelism.max(1).min(conversations.len().max(1));
    let failed = AtomicBool::new(false);
    let mut slots: Vec<Option<Result<Conversation, AnnotateError>>> =
        (0..conversations.len()).map(|_| None).collect();

    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for worker in 0..workers {
            let failed = &failed;
            handles.push(scope.spawn(move || {
                let mut done = Vec::new();
                for index in (worker..conversations.len()).step_by(workers) {
                    if failed.load(Ordering::Relaxed) {
                        break;
                    }
                    let result =
                        annotate_conversation(&conversations[index], service, template, example);
                    if result.is_err() {
                        failed.store(true, Ordering::Relaxed);
                    }
                    done.push((index, result));
                }
                done
            }));
        }
        for handle in handles {
            for (index, result) in handle.join().expect("annotation workers do not panic") {
                slots[index] = Some(result);
            }
        }
    });

    let mut annotated = Vec::with_capacity(conversations.len());
    for slot in &slots {
        if let Some(Err(e)) = slot {
            return Err(e.clone());
        }
    }
    for slot in slots {
        if let Some(Ok(conversation)) = slot {
            annotated.push(conversation);
        }
    }
    Ok(Corpus::new(annotated).expect("annotation preserves corpus validity"))
}

// --- shared stage plumbing ------------------------------------------------

fn prepare_output_dir(cfg: &EffectiveConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(&cfg.output_dir).with_context(|| {
        format!(
            "cannot create the output directory {}",
            cfg.output_dir.display()
        )
    })
}

fn load_stage_corpus(
    cfg: &EffectiveConfig,
    name: &str,
    producing_stage: &str,
) -> anyhow::Result<Corpus> {
    let path = artifact_path(&cfg.output_dir, name);
    if !path.is_file() {
        bail!(
            "missing input artifact {name} in {}; run the {producing_stage} stage first",
            cfg.output_dir.display()
        );
    }
    Ok(load_corpus(&path)?)
}

fn save_artifacts(
    cfg: &EffectiveConfig,
    artifacts: &[(&str, &str)],
) -> anyhow::Result<()> {
    let mut manifest = Manifest::load_or_new(&cfg.output_dir, &cfg.config_hash());
    for (name, content) in artifacts {
        write_artifact(&cfg.output_dir, name, content, &mut manifest)?;
    }
    manifest.save(&cfg.output_dir)?;
    Ok(())
}

// --- the stages -----------------------------------------------------------

/// Annotate stage: corpus file → `annotated.jsonl`.
///
/// A corpus whose every turn already carries a canonical form passes
/// through without touching the completion service; otherwise the service
/// annotates the missing turns.
pub fn stage_annotate(cfg: &EffectiveConfig) -> Result<(), StageError> {
    run_annotate(cfg).map_err(StageError::wrap("annotate"))
}

fn run_annotate(cfg: &EffectiveConfig) -> anyhow::Result<()> {
    prepare_output_dir(cfg)?;
    let corpus = load_corpus(&cfg.corpus)?;
    let annotated = if corpus.annotated() {
        log::info!("corpus is already fully annotated; passing it through");
        corpus
    } else {
        let client = completion_client(cfg)
            .context("the corpus has unannotated turns, so annotation needs a completion service")?;
        let template = annotation_template(cfg)?;
        let example = worked_example(cfg)?;
        annotate_parallel(
            &corpus,
            &client,
            &template,
            &example,
            cfg.completion.parallelism,
        )?
    };
    save_artifacts(cfg, &[(ANNOTATED_NAME, &corpus_to_string(&annotated))])
}

/// Normalize stage: `annotated.jsonl` → `normalized.jsonl`, plus a
/// cluster dump when `dump_clusters` is set.
pub fn stage_normalize(cfg: &EffectiveConfig, dump_clusters: bool) -> Result<(), StageError> {
    run_normalize(cfg, dump_clusters).map_err(StageError::wrap("normalize"))
}

fn run_normalize(cfg: &EffectiveConfig, dump_clusters: bool) -> anyhow::Result<()> {
    prepare_output_dir(cfg)?;
    let corpus = load_stage_corpus(cfg, ANNOTATED_NAME, "annotate")?;
    let mut stack = build_embedding_stack(cfg, &corpus)?;
    let (cache, provider) = stack.parts();
    let normalization = build_normalization(
        &corpus,
        cfg.normalizer.user_threshold,
        cfg.normalizer.agent_threshold,
        cfg.normalizer.linkage.to_linkage(),
        cache,
        provider,
    )?;
    let normalized = normalization.apply(&corpus)?;
    log::info!(
        "normalized {} user and {} agent forms into {} and {} clusters",
        normalization.user.iter().map(|c| c.members.len()).sum::<usize>(),
        normalization.agent.iter().map(|c| c.members.len()).sum::<usize>(),
        normalization.user.len(),
        normalization.agent.len(),
    );
    stack.persist()?;
    let mut artifacts = vec![(NORMALIZED_NAME, corpus_to_string(&normalized))];
    if dump_clusters {
        artifacts.push((CLUSTERS_NAME, render_cluster_dump(&normalization, &corpus)));
    }
    let borrowed: Vec<(&str, &str)> = artifacts
        .iter()
        .map(|(name, content)| (*name, content.as_str()))
        .collect();
    save_artifacts(cfg, &borrowed)
}

/// Graph stage: `normalized.jsonl` → `graph.json`, plus a drawing when
/// `dot` is set. Only the extraction batch contributes edges; the
/// holdout stays unseen until evaluation.
pub fn stage_graph(cfg: &EffectiveConfig, dot: bool) -> Result<(), StageError> {
    run_graph(cfg, dot).map_err(StageError::wrap("graph"))
}

fn run_graph(cfg: &EffectiveConfig, dot: bool) -> anyhow::Result<()> {
    prepare_output_dir(cfg)?;
    let corpus = load_stage_corpus(cfg, NORMALIZED_NAME, "normalize")?;
    let split = split_corpus(&corpus, cfg.batch_size, cfg.batch_mode, cfg.seed);
    let graph = build_graph(&split.batch)?;
    log::info!(
        "built a graph of {} nodes and {} edges from {} conversations",
        graph.node_count(),
        graph.edge_count(),
        split.batch.len()
    );
    let mut artifacts = vec![(GRAPH_NAME, render_graph_json(&graph))];
    if dot {
        artifacts.push((GRAPH_DOT_NAME, export_dot(&graph, None)?));
    }
    let borrowed: Vec<(&str, &str)> = artifacts
        .iter()
        .map(|(name, content)| (*name, content.as_str()))
        .collect();
    save_artifacts(cfg, &borrowed)
}

/// Extract stage: `graph.json` → `flow.json`, `flow.colang`, `flow.dot`.
///
/// Graph methods mine the main path between the selected endpoints and
/// attach the highest-ranked digressions; the `prompt` method instead
/// asks the completion service to summarize the extraction batch.
pub fn stage_extract(cfg: &EffectiveConfig) -> Result<(), StageError> {
    run_extract(cfg).map_err(StageError::wrap("extract"))
}

fn run_extract(cfg: &EffectiveConfig) -> anyhow::Result<()> {
    prepare_output_dir(cfg)?;
    let graph_file = artifact_path(&cfg.output_dir, GRAPH_NAME);
    let raw = match read_artifact(&cfg.output_dir, GRAPH_NAME) {
        Ok(raw) => raw,
        Err(e @ ArtifactError::Missing { .. }) => {
            return Err(anyhow!(e).context("run the graph stage first"));
        }
        Err(e) => return Err(e.into()),
    };
    let graph = crate::artifacts::parse_graph_json(&raw, &graph_file)?;
    let corpus = load_stage_corpus(cfg, NORMALIZED_NAME, "normalize")?;

    let flow = match cfg.extractor.method {
        MethodKind::Prompt => {
            let split = split_corpus(&corpus, cfg.batch_size, cfg.batch_mode, cfg.seed);
            let client = completion_client(cfg)
                .context("the prompt extraction method needs a completion service")?;
            let template = flow_template(cfg)?;
            flowmine_core::prompt::baseline_flow(
                &split.batch,
                &client,
                &template,
                cfg.completion.max_prompt_batch,
            )?
        }
        method => {
            let endpoints = select_endpoints(&graph)?;
            let bound = cfg.extractor.max_path_nodes;
            let main = match method {
                MethodKind::Widest => widest_path(&graph, &endpoints.source, &endpoints.target, bound)?,
                MethodKind::Longest => longest_path(&graph, &endpoints.source, &endpoints.target, bound)?,
                MethodKind::Maxweight => {
                    max_weight_path(&graph, &endpoints.source, &endpoints.target, bound)?
                }
                MethodKind::Prompt => unreachable!("handled above"),
            };
            let mut stack = build_embedding_stack(cfg, &corpus)?;
            let (cache, provider) = stack.parts();
            let scan = detect_digressions(
                &graph,
                &main,
                cfg.extractor.epsilon,
                cfg.extractor.kappa,
                bound,
                cache,
                provider,
            )?;
            stack.persist()?;
            for branch in &scan.unreachable {
                log::warn!(
                    "digression candidate {:?} (branching from {:?}) cannot rejoin the main path; dropped",
                    branch.branch_head,
                    branch.branch_from
                );
            }
            let kept = scan
                .digressions
                .into_iter()
                .take(cfg.extractor.max_digressions)
                .collect::<Vec<_>>();
            DialogueFlow {
                main,
                digressions: kept,
                method_tag: method.tag().to_string(),
            }
        }
    };

    log::info!(
        "extracted a {}-step main path with {} digressions (method {})",
        flow.main.nodes.len(),
        flow.digressions.len(),
        flow.method_tag
    );
    // A prompt-derived flow may name steps outside the graph, so its
    // drawing shows the plain graph without highlighting.
    let highlight = if cfg.extractor.method == MethodKind::Prompt {
        None
    } else {
        Some(&flow)
    };
    let dot = export_dot(&graph, highlight)?;
    save_artifacts(
        cfg,
        &[
            (FLOW_NAME, &render_flow_json(&flow)),
            (FLOW_COLANG_NAME, &render_colang(&flow)),
            (FLOW_DOT_NAME, &dot),
        ],
    )
}

/// Evaluate stage: `flow.json` scored against the held-out conversations
/// → `eval_report.json`, `eval_report.txt`.
pub fn stage_evaluate(cfg: &EffectiveConfig) -> Result<(), StageError> {
    run_evaluate(cfg).map_err(StageError::wrap("evaluate"))
}

fn run_evaluate(cfg: &EffectiveConfig) -> anyhow::Result<()> {
    prepare_output_dir(cfg)?;
    let flow_file = artifact_path(&cfg.output_dir, FLOW_NAME);
    let raw = match read_artifact(&cfg.output_dir, FLOW_NAME) {
        Ok(raw) => raw,
        Err(e @ ArtifactError::Missing { .. }) => {
            return Err(anyhow!(e).context("run the extract stage first"));
        }
        Err(e) => return Err(e.into()),
    };
    let flow = crate::artifacts::parse_flow_json(&raw, &flow_file)?;
    let corpus = load_stage_corpus(cfg, NORMALIZED_NAME, "normalize")?;
    let split = split_corpus(&corpus, cfg.batch_size, cfg.batch_mode, cfg.seed);
    let mut stack = build_embedding_stack(cfg, &corpus)?;
    let (cache, provider) = stack.parts();
    let evaluation = score_flow(
        &flow,
        &split.holdout,
        cfg.evaluate.similarity_threshold,
        cache,
        provider,
    )?;
    let alignment: Option<AlignmentReport> = match &cfg.evaluate.alignments {
        Some(path) => {
            let alignments = load_alignments(path)?;
            Some(evaluate_alignments(&flow, &alignments, &split.holdout)?)
        }
        None => None,
    };
    stack.persist()?;

    let report_json = render_eval_report_json(&evaluation, &flow.method_tag, alignment.as_ref());
    let mut report_text = format!(
        "flow evaluation (method: {})\nnote: {METEOR_NOTE}\nconversations scored: {}\n\n{}",
        flow.method_tag,
        evaluation.per_conversation.len(),
        render_eval_table(&evaluation)
    );
    if let Some(report) = &alignment {
        report_text.push_str("\nalignment precision/recall\n");
        report_text.push_str(&format!(
            "{:<24} {:>10.6} {:>10.6}\n",
            "overall", report.overall.precision, report.overall.recall
        ));
        report_text.push_str(&format!(
            "{:<24} {:>10.6} {:>10.6}\n",
            "user", report.user.precision, report.user.recall
        ));
        report_text.push_str(&format!(
            "{:<24} {:>10.6} {:>10.6}\n",
            "bot", report.bot.precision, report.bot.recall
        ));
        for row in &report.per_conversation {
            report_text.push_str(&format!(
                "{:<24} {:>10.6} {:>10.6}\n",
                row.conversation_id, row.scores.precision, row.scores.recall
            ));
        }
    }
    log::info!(
        "scored {} held-out conversations: mean sentence overlap {:.6}",
        evaluation.per_conversation.len(),
        evaluation.summary.mean_bleu
    );
    save_artifacts(
        cfg,
        &[
            (EVAL_JSON_NAME, &report_json),
            (EVAL_TEXT_NAME, &report_text),
        ],
    )
}

/// Runs all five stages in order. Because each stage reads and writes
/// the same artifacts as its standalone command, the chained run is
/// byte-identical to running the stage commands one by one.
pub fn run_pipeline(
    cfg: &EffectiveConfig,
    dump_clusters: bool,
    dot: bool,
) -> Result<(), StageError> {
    stage_annotate(cfg)?;
    stage_normalize(cfg, dump_clusters)?;
    stage_graph(cfg, dot)?;
    stage_extract(cfg)?;
    stage_evaluate(cfg)?;
    Ok(())
}
