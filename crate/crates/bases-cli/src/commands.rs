//! The five pipeline commands.

/// Like `println!` but ignores write errors, so piping into `head` does not
/// kill the process with a broken-pipe panic.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bases_core::Language;
use bases_core::backends::{
    CorpusSearchClient, HttpLlmClient, HttpSearchClient, LlmClient, ScriptedLlm, SearchClient,
};
use bases_core::dataset::{
    DatasetMetadata, build_dataset, compute_stats, read_dataset, validate_dataset, write_dataset,
};
use bases_core::evaluation::{
    Bm25Ranker, ExternalScoresRanker, MetricsReport, OverlapNorm, Ranker, StopwordList, Task,
    click_top1_accuracy, evaluate, llm_judge_query_consistency, term_overlap_rate_with,
};
use bases_core::profiles::{
    RuleSet, UserProfile, attribute_marginals, generate_batch, load_catalogs,
};
use bases_core::simulation::{SimConfig, UserSession, run_batch_with_sink};
use serde::Deserialize;

use crate::CliError;
use crate::config::{BackendMode, FileConfig, llm_config, resolve_created_at, search_config};

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<Vec<T>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::usage(format!("cannot open {} {}: {e}", what, path.display())))?;
    let mut items = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::run(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(&line).map_err(|e| {
            CliError::run(format!(
                "{}:{}: invalid {what} line: {e}",
                path.display(),
                i + 1
            ))
        })?;
        items.push(item);
    }
    Ok(items)
}

fn load_rules(path: Option<&PathBuf>) -> Result<RuleSet, CliError> {
    match path {
        Some(p) => RuleSet::from_file(p).map_err(|e| CliError::usage(e.to_string())),
        None => Ok(RuleSet::default_rules()),
    }
}

pub struct GenProfilesArgs {
    pub n: Option<usize>,
    pub catalog_dir: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub lang: Language,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_gen_profiles(args: GenProfilesArgs, config: &FileConfig) -> Result<(), CliError> {
    let n = args
        .n
        .or(config.n_users)
        .ok_or_else(|| CliError::usage("--n (or n_users in the config file) is required"))?;
    if n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let catalog_dir = args
        .catalog_dir
        .or_else(|| config.catalog_dir.clone())
        .unwrap_or_else(|| PathBuf::from(crate::config::DEFAULT_CATALOG_DIR));
    if !catalog_dir.exists() {
        return Err(CliError::usage(format!(
            "catalog directory not found: {}",
            catalog_dir.display()
        )));
    }
    let rules_path = args.rules.or_else(|| config.rules.clone());
    let catalogs =
        load_catalogs(&catalog_dir, args.lang).map_err(|e| CliError::usage(e.to_string()))?;
    let rules = load_rules(rules_path.as_ref())?;

    let batch = generate_batch(&catalogs, &rules, n, args.seed, args.lang)
        .map_err(|e| CliError::run(e.to_string()))?;

    if let Some(parent) = args.out.parent()
        && !parent.as_os_str().is_empty()
    {
        std::fs::create_dir_all(parent).map_err(|e| CliError::run(e.to_string()))?;
    }
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(&args.out).map_err(|e| CliError::run(e.to_string()))?,
    );
    for profile in &batch.profiles {
        serde_json::to_writer(&mut out, profile).map_err(|e| CliError::run(e.to_string()))?;
        out.write_all(b"\n")
            .map_err(|e| CliError::run(e.to_string()))?;
    }
    out.flush().map_err(|e| CliError::run(e.to_string()))?;

    say!(
        "wrote {} profiles to {}",
        batch.summary.n_profiles,
        args.out.display()
    );
    say!(
        "repaired: {}  duplicate attribute tuples: {}",
        batch.summary.n_repaired,
        batch.summary.n_duplicate_tuples
    );
    let ages: Vec<u32> = batch.profiles.iter().map(|p| p.age).collect();
    let mean = ages.iter().map(|&a| a as f64).sum::<f64>() / ages.len() as f64;
    say!(
        "age: min {} max {} mean {:.1}",
        ages.iter().min().unwrap(),
        ages.iter().max().unwrap(),
        mean
    );
    let marginals = attribute_marginals(&batch.profiles);
    for attr in [
        "gender",
        "education",
        "wealth",
        "personality",
        "interest",
        "career",
        "location",
    ] {
        let Some(counts) = marginals.get(attr) else {
            continue;
        };
        let mut top: Vec<(&String, &usize)> = counts.iter().collect();
        top.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        let shown: Vec<String> = top
            .iter()
            .take(5)
            .map(|(v, c)| format!("{v} {:.1}%", **c as f64 * 100.0 / n as f64))
            .collect();
        let suffix = if counts.len() > 5 {
            format!(" (+{} more)", counts.len() - 5)
        } else {
            String::new()
        };
        say!("{attr}: {}{suffix}", shown.join(", "));
    }
    Ok(())
}

pub struct SimulateArgs {
    pub profiles: Option<PathBuf>,
    pub mode: Option<String>,
    pub corpus: Option<PathBuf>,
    pub llm_script: Option<PathBuf>,
    pub llm_endpoint: Option<String>,
    pub llm_model: Option<String>,
    pub search_endpoint: Option<String>,
    pub max_rounds: Option<usize>,
    pub parse_retries: Option<usize>,
    pub concurrency: Option<usize>,
    pub out: PathBuf,
}

pub fn cmd_simulate(args: SimulateArgs, config: &FileConfig) -> Result<(), CliError> {
    let profiles_path = args
        .profiles
        .ok_or_else(|| CliError::usage("--profiles is required"))?;
    let profiles: Vec<UserProfile> = read_jsonl(&profiles_path, "profiles")?;
    if profiles.is_empty() {
        return Err(CliError::usage(format!(
            "{} holds no profiles",
            profiles_path.display()
        )));
    }

    let mode = match args.mode.as_deref().or(config.backend_mode.as_deref()) {
        Some(raw) => BackendMode::from_str(raw).map_err(CliError::usage)?,
        None => BackendMode::Mock,
    };
    let sim_config = SimConfig {
        max_rounds: args.max_rounds.or(config.max_rounds).unwrap_or(5),
        parse_retries: args.parse_retries.or(config.parse_retries).unwrap_or(3),
        concurrency_limit: args.concurrency.or(config.concurrency_limit).unwrap_or(8),
    };
    if sim_config.max_rounds == 0 {
        return Err(CliError::usage("--max-rounds must be at least 1"));
    }

    let (llm, search, backend_label): (Box<dyn LlmClient>, Box<dyn SearchClient>, String) =
        match mode {
            BackendMode::Mock => {
                let corpus = args
                    .corpus
                    .or_else(|| config.corpus.clone())
                    .ok_or_else(|| CliError::usage("mock mode requires --corpus"))?;
                let script = args
                    .llm_script
                    .or_else(|| config.llm_script.clone())
                    .ok_or_else(|| CliError::usage("mock mode requires --llm-script"))?;
                let llm =
                    ScriptedLlm::from_jsonl(&script).map_err(|e| CliError::usage(e.to_string()))?;
                let client = CorpusSearchClient::from_path(&corpus)
                    .map_err(|e| CliError::usage(e.to_string()))?;
                let label = format!(
                    "mock-corpus:{}",
                    corpus.file_name().unwrap_or_default().to_string_lossy()
                );
                (Box::new(llm), Box::new(client), label)
            }
            BackendMode::Live => {
                let llm_cfg = llm_config(
                    &config.llm,
                    args.llm_endpoint.as_deref(),
                    args.llm_model.as_deref(),
                );
                let search_cfg = search_config(&config.search, args.search_endpoint.as_deref());
                let llm =
                    HttpLlmClient::new(&llm_cfg).map_err(|e| CliError::usage(e.to_string()))?;
                let search = HttpSearchClient::new(&search_cfg)
                    .map_err(|e| CliError::usage(e.to_string()))?;
                (Box::new(llm), Box::new(search), search_cfg.endpoint.clone())
            }
        };

    if let Some(parent) = args.out.parent()
        && !parent.as_os_str().is_empty()
    {
        std::fs::create_dir_all(parent).map_err(|e| CliError::run(e.to_string()))?;
    }
    let mut out = std::fs::File::create(&args.out).map_err(|e| CliError::run(e.to_string()))?;

    // Line-buffered flushing: completed sessions survive an interrupt.
    let batch = run_batch_with_sink(
        &profiles,
        llm.as_ref(),
        search.as_ref(),
        &sim_config,
        &mut |session| {
            let line = serde_json::to_string(session)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
            out.flush()
        },
    )
    .map_err(|e| CliError::run(e.to_string()))?;

    say!(
        "simulated {} sessions to {}",
        batch.sessions.len(),
        args.out.display()
    );
    say!(
        "finished: {}  capped: {}  failed: {}",
        batch.summary.finished,
        batch.summary.capped,
        batch.summary.failed
    );
    say!("search backend: {backend_label}");
    Ok(())
}

pub struct BuildDatasetArgs {
    pub sessions: Option<PathBuf>,
    pub search_backend: Option<String>,
    pub created_at: Option<String>,
    pub lang: Language,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_build_dataset(args: BuildDatasetArgs, _config: &FileConfig) -> Result<(), CliError> {
    let sessions_path = args
        .sessions
        .ok_or_else(|| CliError::usage("--sessions is required"))?;
    let sessions: Vec<UserSession> = read_jsonl(&sessions_path, "session")?;

    let metadata = DatasetMetadata {
        created_at: resolve_created_at(args.created_at.as_deref()),
        search_backend: args
            .search_backend
            .unwrap_or_else(|| "unspecified".to_string()),
        generator_version: env!("CARGO_PKG_VERSION").to_string(),
        language: args.lang,
    };
    let (dataset, excluded) = build_dataset(sessions, args.seed, args.lang, metadata)
        .map_err(|e| CliError::run(e.to_string()))?;
    write_dataset(&dataset, &args.out).map_err(|e| CliError::run(e.to_string()))?;

    if !excluded.is_empty() {
        let sidecar = args.out.join("failures.jsonl");
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(&sidecar).map_err(|e| CliError::run(e.to_string()))?,
        );
        for session in &excluded {
            serde_json::to_writer(&mut f, session).map_err(|e| CliError::run(e.to_string()))?;
            f.write_all(b"\n")
                .map_err(|e| CliError::run(e.to_string()))?;
        }
        f.flush().map_err(|e| CliError::run(e.to_string()))?;
    }

    let report = validate_dataset(&args.out).map_err(|e| CliError::run(e.to_string()))?;
    if !report.is_valid() {
        for v in &report.violations {
            eprintln!("{}:{}: {}", v.file, v.line, v.message);
        }
        return Err(CliError::run(format!(
            "dataset failed validation with {} violations",
            report.violations.len()
        )));
    }

    let stats = compute_stats(&dataset);
    say!("dataset written to {}", args.out.display());
    say!(
        "train: {}  valid: {}  test: {}",
        dataset.splits.train.len(),
        dataset.splits.valid.len(),
        dataset.splits.test.len()
    );
    say!(
        "avg queries/user: {:.2}  avg clicks/query: {:.2}",
        stats.avg_queries_per_user,
        stats.avg_clicks_per_query
    );
    say!("excluded failed sessions: {}", excluded.len());
    Ok(())
}

pub struct EvaluateArgs {
    pub dataset: Option<PathBuf>,
    pub task: Option<String>,
    pub ranker: Option<String>,
    pub scores: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn cmd_evaluate(args: EvaluateArgs, _config: &FileConfig) -> Result<(), CliError> {
    let dataset_dir = args
        .dataset
        .ok_or_else(|| CliError::usage("--dataset is required"))?;
    let task = match args.task.as_deref() {
        Some("session_search") => Task::SessionSearch,
        Some("click_prediction") => Task::ClickPrediction,
        Some(other) => {
            return Err(CliError::usage(format!(
                "unknown task `{other}` (expected session_search or click_prediction)"
            )));
        }
        None => return Err(CliError::usage("--task is required")),
    };

    let dataset = read_dataset(&dataset_dir).map_err(|e| CliError::usage(e.to_string()))?;
    let instances = bases_core::evaluation::build_instances(&dataset, task);
    if instances.is_empty() {
        return Err(CliError::run(format!(
            "no {task} instances in this dataset (session_search needs sessions with at least 2 rounds)"
        )));
    }

    let ranker_name = args.ranker.as_deref().unwrap_or("bm25");
    let ranker: Box<dyn Ranker> = match ranker_name {
        "bm25" => Box::new(Bm25Ranker::default()),
        "external" => {
            let scores_path = args
                .scores
                .ok_or_else(|| CliError::usage("--ranker external requires --scores"))?;
            let lines: Vec<Vec<f64>> = read_jsonl(&scores_path, "scores")?;
            let ranker = ExternalScoresRanker::new(lines, instances.len())
                .map_err(|e| CliError::run(e.to_string()))?;
            Box::new(ranker)
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown ranker `{other}` (expected bm25 or external)"
            )));
        }
    };

    let report = evaluate(ranker.as_ref(), &instances).map_err(|e| CliError::run(e.to_string()))?;
    say!(
        "{}",
        MetricsReport::table(std::slice::from_ref(&report)).trim_end()
    );

    let out = args
        .out
        .unwrap_or_else(|| dataset_dir.join(format!("report_{task}_{ranker_name}.json")));
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::run(e.to_string()))?;
    std::fs::write(&out, json + "\n").map_err(|e| CliError::run(e.to_string()))?;
    say!("report written to {}", out.display());
    Ok(())
}

#[derive(Debug, Deserialize)]
struct QueryPair {
    human: String,
    agent: String,
    #[serde(default)]
    profile: Option<UserProfile>,
}

#[derive(Debug, Deserialize)]
struct RankPair {
    human: u32,
    agent: u32,
}

pub struct ConsistencyArgs {
    pub pairs: Option<PathBuf>,
    pub mode: Option<String>,
    pub norm: Option<String>,
    pub stopwords: Option<PathBuf>,
    pub llm_script: Option<PathBuf>,
    pub llm_endpoint: Option<String>,
    pub llm_model: Option<String>,
    pub lang: Language,
}

/// Placeholder profile for judge pairs that do not carry one.
fn unspecified_profile(lang: Language) -> UserProfile {
    UserProfile {
        user_id: "unspecified".into(),
        age: 30,
        gender: "unspecified".into(),
        education: "unspecified".into(),
        career: "unspecified".into(),
        personality: "unspecified".into(),
        interest: "unspecified".into(),
        location: "unspecified".into(),
        wealth: "unspecified".into(),
        language_setting: lang,
        provenance: Default::default(),
    }
}

pub fn cmd_consistency(args: ConsistencyArgs, config: &FileConfig) -> Result<(), CliError> {
    let pairs_path = args
        .pairs
        .ok_or_else(|| CliError::usage("--pairs is required"))?;
    let mode = args.mode.as_deref().unwrap_or("query_overlap");

    match mode {
        "query_overlap" => {
            let pairs: Vec<QueryPair> = read_jsonl(&pairs_path, "query pair")?;
            if pairs.is_empty() {
                return Err(CliError::usage("pairs file is empty"));
            }
            let stopwords = match &args.stopwords {
                Some(path) => StopwordList::from_file(path)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?,
                None => StopwordList::for_language(args.lang),
            };
            let norm = match args.norm.as_deref() {
                None | Some("jaccard") => OverlapNorm::Jaccard,
                Some("reference") => OverlapNorm::ByReference,
                Some(other) => {
                    return Err(CliError::usage(format!(
                        "unknown norm `{other}` (expected jaccard or reference)"
                    )));
                }
            };
            let total: f64 = pairs
                .iter()
                .map(|p| term_overlap_rate_with(&p.human, &p.agent, &stopwords, norm))
                .sum();
            say!(
                "term_overlap_rate: {:.2} over {} pairs",
                total / pairs.len() as f64,
                pairs.len()
            );
        }
        "click_accuracy" => {
            let pairs: Vec<RankPair> = read_jsonl(&pairs_path, "rank pair")?;
            if pairs.is_empty() {
                return Err(CliError::usage("pairs file is empty"));
            }
            let tuples: Vec<(u32, u32)> = pairs.iter().map(|p| (p.agent, p.human)).collect();
            say!(
                "click_top1_accuracy: {:.2} over {} pairs",
                click_top1_accuracy(&tuples),
                tuples.len()
            );
        }
        "llm_judge" => {
            let pairs: Vec<QueryPair> = read_jsonl(&pairs_path, "query pair")?;
            if pairs.is_empty() {
                return Err(CliError::usage("pairs file is empty"));
            }
            let script = args.llm_script.or_else(|| config.llm_script.clone());
            let llm: Box<dyn LlmClient> = match script {
                Some(path) => Box::new(
                    ScriptedLlm::from_jsonl(&path).map_err(|e| CliError::usage(e.to_string()))?,
                ),
                None => {
                    let mut cfg = llm_config(
                        &config.llm,
                        args.llm_endpoint.as_deref(),
                        args.llm_model.as_deref(),
                    );
                    // Judging wants stable verdicts.
                    cfg.temperature = 0.0;
                    Box::new(HttpLlmClient::new(&cfg).map_err(|e| CliError::usage(e.to_string()))?)
                }
            };
            let fallback = unspecified_profile(args.lang);
            let mut yes = 0usize;
            for pair in &pairs {
                let profile = pair.profile.as_ref().unwrap_or(&fallback);
                let verdict =
                    llm_judge_query_consistency(llm.as_ref(), profile, &pair.human, &pair.agent)
                        .map_err(|e| CliError::run(e.to_string()))?;
                yes += usize::from(verdict);
            }
            say!(
                "llm_judge_consistency: {:.2} over {} pairs",
                yes as f64 / pairs.len() as f64,
                pairs.len()
            );
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown mode `{other}` (expected query_overlap, click_accuracy, or llm_judge)"
            )));
        }
    }
    Ok(())
}
