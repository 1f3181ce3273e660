//! The `flowmine` command: mines interpretable dialogue flows from
//! task-oriented conversation logs.
//!
//! Every stage command reads one TOML configuration file and accepts the
//! same override flags, so a setting can live in the file or on the
//! command line interchangeably. Exit status is `0` on success, `1` when
//! a stage fails (the message names the stage), and `2` when the
//! configuration is invalid.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flowmine::config::{ConfigError, EffectiveConfig, Overrides};
use flowmine::interchange::save_corpus;
use flowmine::pipeline::{
    run_pipeline, stage_annotate, stage_evaluate, stage_extract, stage_graph, stage_normalize,
    StageError,
};
use flowmine::synth;

/// Mines interpretable dialogue flows from task-oriented conversation logs.
#[derive(Debug, Parser)]
#[command(name = "flowmine", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration file plus the override flags shared by every stage.
#[derive(Debug, Args)]
struct RunArgs {
    /// Configuration file (TOML).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Corpus file.
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// Directory receiving every artifact.
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Extraction batch size.
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    /// Batch selection mode: first or sample.
    #[arg(long, value_name = "MODE")]
    batch_mode: Option<String>,
    /// Seed for sampled batch selection.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Embedding provider: http, cache, or synthetic.
    #[arg(long, value_name = "KIND")]
    embedding_provider: Option<String>,
    /// Embedding service endpoint.
    #[arg(long, value_name = "URL")]
    embedding_endpoint: Option<String>,
    /// Embedding cache file.
    #[arg(long, value_name = "FILE")]
    embedding_cache: Option<PathBuf>,
    /// Completion service endpoint.
    #[arg(long, value_name = "URL")]
    completion_endpoint: Option<String>,
    /// Completion model name.
    #[arg(long, value_name = "NAME")]
    completion_model: Option<String>,
    /// Retries after a failed service request.
    #[arg(long, value_name = "N")]
    max_retries: Option<u32>,
    /// Conversations annotated concurrently.
    #[arg(long, value_name = "N")]
    parallelism: Option<usize>,
    /// User-side clustering distance threshold.
    #[arg(long, value_name = "X")]
    user_threshold: Option<f64>,
    /// Agent-side clustering distance threshold.
    #[arg(long, value_name = "X")]
    agent_threshold: Option<f64>,
    /// Clustering linkage: average, complete, or single.
    #[arg(long, value_name = "KIND")]
    linkage: Option<String>,
    /// Extraction method: widest, longest, maxweight, or prompt.
    #[arg(long, value_name = "METHOD")]
    method: Option<String>,
    /// How many digressions to keep on the flow.
    #[arg(long, value_name = "K")]
    digressions: Option<usize>,
    /// Digression candidate similarity threshold, in (0, 1].
    #[arg(long, value_name = "X")]
    epsilon: Option<f64>,
    /// Digression path similarity threshold, in (0, 1].
    #[arg(long, value_name = "X")]
    kappa: Option<f64>,
    /// Node bound for path searches.
    #[arg(long, value_name = "N")]
    max_path_nodes: Option<usize>,
    /// Cosine threshold for soft step matching in evaluation.
    #[arg(long, value_name = "X")]
    similarity_threshold: Option<f64>,
    /// Alignment file for precision/recall evaluation.
    #[arg(long, value_name = "FILE")]
    alignments: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            corpus: self.corpus.clone(),
            output_dir: self.output_dir.clone(),
            batch_size: self.batch_size,
            batch_mode: self.batch_mode.clone(),
            seed: self.seed,
            embedding_provider: self.embedding_provider.clone(),
            embedding_endpoint: self.embedding_endpoint.clone(),
            embedding_cache: self.embedding_cache.clone(),
            completion_endpoint: self.completion_endpoint.clone(),
            completion_model: self.completion_model.clone(),
            max_retries: self.max_retries,
            parallelism: self.parallelism,
            user_threshold: self.user_threshold,
            agent_threshold: self.agent_threshold,
            linkage: self.linkage.clone(),
            method: self.method.clone(),
            digressions: self.digressions,
            epsilon: self.epsilon,
            kappa: self.kappa,
            max_path_nodes: self.max_path_nodes,
            similarity_threshold: self.similarity_threshold,
            alignments: self.alignments.clone(),
        }
    }

    fn load(&self) -> Result<EffectiveConfig, ConfigError> {
        EffectiveConfig::load(&self.config, &self.overrides())
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Annotate every turn of the corpus with a canonical form.
    Annotate(RunArgs),
    /// Merge near-duplicate canonical forms by clustering.
    Normalize {
        #[command(flatten)]
        args: RunArgs,
        /// Also write the cluster membership dump.
        #[arg(long)]
        dump_clusters: bool,
    },
    /// Build the weighted interaction graph from the extraction batch.
    Graph {
        #[command(flatten)]
        args: RunArgs,
        /// Also write a drawing of the graph.
        #[arg(long)]
        dot: bool,
    },
    /// Mine the dialogue flow from the interaction graph.
    Extract(RunArgs),
    /// Score the mined flow against the held-out conversations.
    Evaluate(RunArgs),
    /// Run annotate, normalize, graph, extract, and evaluate in order.
    Pipeline {
        #[command(flatten)]
        args: RunArgs,
        /// Also write the cluster membership dump.
        #[arg(long)]
        dump_clusters: bool,
        /// Also write a drawing of the graph.
        #[arg(long)]
        dot: bool,
    },
    /// Generate the bundled synthetic benchmark corpus.
    Synth {
        /// Corpus file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Conversations to generate.
        #[arg(long, value_name = "N", default_value_t = synth::DEFAULT_COUNT)]
        count: usize,
        /// Generator seed.
        #[arg(long, value_name = "N", default_value_t = synth::DEFAULT_SEED)]
        seed: u64,
    },
}

/// Everything that can end a run unsuccessfully, with its exit status.
enum Failure {
    /// Invalid configuration — exit 2.
    Config(ConfigError),
    /// A stage failed — exit 1, message names the stage.
    Stage(StageError),
    /// A failure outside any stage — exit 1.
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure::Stage(e)
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Annotate(args) => stage_annotate(&args.load()?)?,
        Command::Normalize {
            args,
            dump_clusters,
        } => stage_normalize(&args.load()?, dump_clusters)?,
        Command::Graph { args, dot } => stage_graph(&args.load()?, dot)?,
        Command::Extract(args) => stage_extract(&args.load()?)?,
        Command::Evaluate(args) => stage_evaluate(&args.load()?)?,
        Command::Pipeline {
            args,
            dump_clusters,
            dot,
        } => run_pipeline(&args.load()?, dump_clusters, dot)?,
        Command::Synth { out, count, seed } => {
            let (corpus, _) = synth::generate(count, seed);
            save_corpus(&out, &corpus)
                .map_err(|e| Failure::Other(format!("cannot write the corpus: {e}")))?;
            log::info!(
                "wrote {count} synthetic conversations (seed {seed}) to {}",
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(Failure::Other(message)) => {
            eprintln!("{message}");
            ExitCode::from(1)
        }
    }
}
