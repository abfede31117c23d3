//! `bases` — the operator-facing pipeline:
//! gen-profiles → simulate → build-dataset → evaluate / consistency.
//!
//! Exit codes: 0 on success with all outputs written, 2 for argument and
//! configuration problems, 1 for runtime failures. All randomness flows from
//! explicit `--seed` flags; nothing consults system entropy by default.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{
    BuildDatasetArgs, ConsistencyArgs, EvaluateArgs, GenProfilesArgs, SimulateArgs,
    cmd_build_dataset, cmd_consistency, cmd_evaluate, cmd_gen_profiles, cmd_simulate,
};
use config::{DEFAULT_SEED, FileConfig, parse_language};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 2.
    Usage(String),
    /// Runtime failure; exit code 1.
    Run(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn run(msg: impl Into<String>) -> Self {
        CliError::Run(msg.into())
    }
}

#[derive(Parser)]
#[command(
    name = "bases",
    version,
    about = "Large-scale web-search user behavior simulation",
    long_about = "Synthesizes user profiles, drives LLM-backed agents through search sessions, \
                  materializes WARRIORS-style datasets, and evaluates rankers over them."
)]
struct Cli {
    /// Language setting: en or zh.
    #[arg(long, global = true)]
    lang: Option<String>,

    /// Seed for this command's randomness (profile sampling, dataset split).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON config file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file or directory (meaning depends on the subcommand).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate user profiles from the attribute catalogs.
    GenProfiles {
        /// Number of profiles to generate.
        #[arg(long)]
        n: Option<usize>,
        /// Directory holding the per-attribute catalog files.
        #[arg(long)]
        catalog_dir: Option<PathBuf>,
        /// Contradiction-rule file overriding the built-in defaults.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Run one search session per profile.
    Simulate {
        /// Profiles JSONL produced by gen-profiles.
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Backend mode: mock or live.
        #[arg(long)]
        mode: Option<String>,
        /// Mock search corpus (JSONL of url/title/snippet). Mock mode only.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Mock LLM script (JSONL of match/response). Mock mode only.
        #[arg(long)]
        llm_script: Option<PathBuf>,
        /// OpenAI-compatible base URL. Live mode only.
        #[arg(long)]
        llm_endpoint: Option<String>,
        /// Model identifier. Live mode only.
        #[arg(long)]
        llm_model: Option<String>,
        /// Search endpoint URL. Live mode only.
        #[arg(long)]
        search_endpoint: Option<String>,
        /// Round cap per session.
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Prompt attempts per action before the session fails.
        #[arg(long)]
        parse_retries: Option<usize>,
        /// Sessions in flight at once.
        #[arg(long)]
        concurrency: Option<usize>,
    },
    /// Materialize sessions into the train/valid/test dataset layout.
    BuildDataset {
        /// Sessions JSONL produced by simulate.
        #[arg(long)]
        sessions: Option<PathBuf>,
        /// Label recorded in metadata for the search backend used.
        #[arg(long)]
        search_backend: Option<String>,
        /// Metadata timestamp override (RFC 3339); defaults to
        /// SOURCE_DATE_EPOCH when set, else the current time.
        #[arg(long)]
        created_at: Option<String>,
    },
    /// Rank a dataset's candidates and report MRR/NDCG.
    Evaluate {
        /// Dataset directory produced by build-dataset.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// session_search or click_prediction.
        #[arg(long)]
        task: Option<String>,
        /// bm25 (default) or external.
        #[arg(long)]
        ranker: Option<String>,
        /// Scores JSONL for the external ranker, one JSON array per instance.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Compare agent behavior against a human reference.
    Consistency {
        /// Pairs JSONL: {human, agent} queries or ranks per line.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// query_overlap (default), click_accuracy, or llm_judge.
        #[arg(long)]
        mode: Option<String>,
        /// Overlap normalization: jaccard (default) or reference.
        #[arg(long)]
        norm: Option<String>,
        /// Stopword list overriding the bundled one.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Mock LLM script for llm_judge mode.
        #[arg(long)]
        llm_script: Option<PathBuf>,
        /// OpenAI-compatible base URL for llm_judge mode.
        #[arg(long)]
        llm_endpoint: Option<String>,
        /// Model identifier for llm_judge mode.
        #[arg(long)]
        llm_model: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = FileConfig::load(cli.config.as_ref())?;
    let lang = parse_language(cli.lang.as_deref(), &config)?;
    let seed = cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    let out = cli.out.or_else(|| config.out.clone());

    match cli.command {
        Command::GenProfiles {
            n,
            catalog_dir,
            rules,
        } => cmd_gen_profiles(
            GenProfilesArgs {
                n,
                catalog_dir,
                rules,
                lang,
                seed,
                out: out.unwrap_or_else(|| PathBuf::from("profiles.jsonl")),
            },
            &config,
        ),
        Command::Simulate {
            profiles,
            mode,
            corpus,
            llm_script,
            llm_endpoint,
            llm_model,
            search_endpoint,
            max_rounds,
            parse_retries,
            concurrency,
        } => cmd_simulate(
            SimulateArgs {
                profiles,
                mode,
                corpus,
                llm_script,
                llm_endpoint,
                llm_model,
                search_endpoint,
                max_rounds,
                parse_retries,
                concurrency,
                out: out.unwrap_or_else(|| PathBuf::from("sessions.jsonl")),
            },
            &config,
        ),
        Command::BuildDataset {
            sessions,
            search_backend,
            created_at,
        } => cmd_build_dataset(
            BuildDatasetArgs {
                sessions,
                search_backend,
                created_at,
                lang,
                seed,
                out: out.unwrap_or_else(|| PathBuf::from("warriors")),
            },
            &config,
        ),
        Command::Evaluate {
            dataset,
            task,
            ranker,
            scores,
        } => cmd_evaluate(
            EvaluateArgs {
                dataset,
                task,
                ranker,
                scores,
                out,
            },
            &config,
        ),
        Command::Consistency {
            pairs,
            mode,
            norm,
            stopwords,
            llm_script,
            llm_endpoint,
            llm_model,
        } => cmd_consistency(
            ConsistencyArgs {
                pairs,
                mode,
                norm,
                stopwords,
                llm_script,
                llm_endpoint,
                llm_model,
                lang,
            },
            &config,
        ),
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    };
    std::process::exit(code);
}
