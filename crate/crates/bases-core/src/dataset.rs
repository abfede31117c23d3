//! Materializing sessions into the WARRIORS dataset layout.
//!
//! A dataset directory holds `train.jsonl`, `valid.jsonl`, `test.jsonl`
//! (one session per line), `metadata.json`, and `stats.json`. The split is
//! user-level — no user straddles splits — drawn by a seeded shuffle at
//! 98/1/1 with round-half-up and at least one user in each eval split.
//! Failed sessions never enter a dataset; callers keep them in a sidecar log.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Language;
use crate::simulation::{Termination, UserSession};

pub const SPLIT_FILES: [&str; 3] = ["train.jsonl", "valid.jsonl", "test.jsonl"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("need at least 3 users to split, got {0}")]
    TooFewUsers(usize),
    #[error("no sessions left after filtering failures")]
    EmptyAfterFilter,
    #[error("duplicate user_id in sessions: {0}")]
    DuplicateUser(String),
    #[error("{file}: {detail}")]
    Decode { file: String, detail: String },
    #[error("missing dataset file: {0}")]
    MissingFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Provenance of a dataset build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub created_at: String,
    /// e.g. `mock-corpus:corpus_en.jsonl` or a live endpoint label.
    pub search_backend: String,
    pub generator_version: String,
    pub language: Language,
}

/// User-level split membership, kept sorted for canonical comparisons.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarriorsDataset {
    pub language: Language,
    /// Included sessions, sorted by user_id.
    pub sessions: Vec<UserSession>,
    pub splits: SplitAssignment,
    pub metadata: DatasetMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_users: usize,
    /// Rounded half-up to 2 decimals from exact integer arithmetic.
    pub avg_queries_per_user: f64,
    /// 1.00 by construction: every persisted round has exactly one click.
    pub avg_clicks_per_query: f64,
}

/// Eval-split size for `n` users: 1% rounded half up, at least 1.
fn eval_split_size(n: usize) -> usize {
    ((n + 50) / 100).max(1)
}

fn round2(numer: u64, denom: u64) -> f64 {
    if denom == 0 {
        return 0.0;
    }
    // cents = round_half_up(100 * numer / denom), in integers.
    let cents = (200 * numer as u128 + denom as u128) / (2 * denom as u128);
    cents as f64 / 100.0
}

/// Builds a dataset from raw sessions: failures are filtered out (and
/// returned separately), included sessions are canonically ordered, and
/// users are partitioned 98/1/1 by a shuffle seeded with `split_seed`.
pub fn build_dataset(
    sessions: Vec<UserSession>,
    split_seed: u64,
    language: Language,
    metadata: DatasetMetadata,
) -> Result<(WarriorsDataset, Vec<UserSession>), DatasetError> {
    let (mut included, excluded): (Vec<UserSession>, Vec<UserSession>) =
        sessions.into_iter().partition(|s| {
            matches!(
                s.terminated_by,
                Termination::FinishAction | Termination::MaxRounds
            )
        });
    if included.is_empty() {
        return Err(DatasetError::EmptyAfterFilter);
    }
    included.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    let mut seen = BTreeSet::new();
    for s in &included {
        if !seen.insert(s.user_id.as_str()) {
            return Err(DatasetError::DuplicateUser(s.user_id.clone()));
        }
    }

    let n = included.len();
    if n < 3 {
        return Err(DatasetError::TooFewUsers(n));
    }
    let n_eval = eval_split_size(n);

    let mut user_ids: Vec<String> = included.iter().map(|s| s.user_id.clone()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(split_seed);
    user_ids.shuffle(&mut rng);

    let mut splits = SplitAssignment {
        valid: user_ids[..n_eval].to_vec(),
        test: user_ids[n_eval..2 * n_eval].to_vec(),
        train: user_ids[2 * n_eval..].to_vec(),
    };
    splits.train.sort();
    splits.valid.sort();
    splits.test.sort();

    let dataset = WarriorsDataset {
        language,
        sessions: included,
        splits,
        metadata,
    };
    Ok((dataset, excluded))
}

/// Averages over included sessions, computed in exact integer arithmetic
/// before the final 2-decimal rounding.
pub fn compute_stats(dataset: &WarriorsDataset) -> DatasetStats {
    let n_users = dataset.sessions.len();
    let total_rounds: u64 = dataset.sessions.iter().map(|s| s.rounds.len() as u64).sum();
    DatasetStats {
        n_users,
        avg_queries_per_user: round2(total_rounds, n_users as u64),
        // One click per round is enforced by the session schema.
        avg_clicks_per_query: round2(total_rounds, total_rounds),
    }
}

/// Writes the dataset layout into `dir` (creating it), one session JSON per
/// line, byte-deterministic for a fixed dataset.
pub fn write_dataset(dataset: &WarriorsDataset, dir: &Path) -> Result<(), DatasetError> {
    std::fs::create_dir_all(dir)?;
    let membership: BTreeMap<&str, &Vec<String>> = BTreeMap::from([
        ("train.jsonl", &dataset.splits.train),
        ("valid.jsonl", &dataset.splits.valid),
        ("test.jsonl", &dataset.splits.test),
    ]);
    for (file, users) in membership {
        let users: BTreeSet<&str> = users.iter().map(String::as_str).collect();
        let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join(file))?);
        for session in &dataset.sessions {
            if users.contains(session.user_id.as_str()) {
                serde_json::to_writer(&mut out, session).map_err(|e| DatasetError::Decode {
                    file: file.to_string(),
                    detail: e.to_string(),
                })?;
                out.write_all(b"\n")?;
            }
        }
        out.flush()?;
    }
    let metadata = serde_json::to_string_pretty(&dataset.metadata).expect("metadata serializes");
    std::fs::write(dir.join("metadata.json"), metadata + "\n")?;
    let stats = serde_json::to_string_pretty(&compute_stats(dataset)).expect("stats serialize");
    std::fs::write(dir.join("stats.json"), stats + "\n")?;
    Ok(())
}

/// Reads a dataset directory back into memory.
pub fn read_dataset(dir: &Path) -> Result<WarriorsDataset, DatasetError> {
    let metadata_path = dir.join("metadata.json");
    if !metadata_path.exists() {
        return Err(DatasetError::MissingFile(
            metadata_path.display().to_string(),
        ));
    }
    let metadata: DatasetMetadata = serde_json::from_str(&std::fs::read_to_string(&metadata_path)?)
        .map_err(|e| DatasetError::Decode {
            file: metadata_path.display().to_string(),
            detail: e.to_string(),
        })?;

    let mut sessions = Vec::new();
    let mut splits = SplitAssignment::default();
    for file in SPLIT_FILES {
        let path = dir.join(file);
        if !path.exists() {
            return Err(DatasetError::MissingFile(path.display().to_string()));
        }
        let reader = std::io::BufReader::new(std::fs::File::open(&path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let session: UserSession =
                serde_json::from_str(&line).map_err(|e| DatasetError::Decode {
                    file: format!("{}:{}", path.display(), i + 1),
                    detail: e.to_string(),
                })?;
            let bucket = match file {
                "train.jsonl" => &mut splits.train,
                "valid.jsonl" => &mut splits.valid,
                _ => &mut splits.test,
            };
            bucket.push(session.user_id.clone());
            sessions.push(session);
        }
    }
    sessions.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    splits.train.sort();
    splits.valid.sort();
    splits.test.sort();
    let language = metadata.language;
    Ok(WarriorsDataset {
        language,
        sessions,
        splits,
        metadata,
    })
}

/// One problem found by validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetViolation {
    pub file: String,
    /// 1-based line, or 0 for file-level problems.
    pub line: usize,
    pub message: String,
}

/// Everything validation found; empty means the layout is valid.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<DatasetViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_session(session: &UserSession) -> Vec<String> {
    let mut problems = Vec::new();
    if !matches!(
        session.terminated_by,
        Termination::FinishAction | Termination::MaxRounds
    ) {
        problems.push("failed session included in dataset".to_string());
    }
    if session.rounds.is_empty() {
        problems.push("session has no rounds".to_string());
    }
    for (i, round) in session.rounds.iter().enumerate() {
        let want = i as u32 + 1;
        if round.round_index != want {
            problems.push(format!(
                "round_index {} out of order (expected {want})",
                round.round_index
            ));
        }
        if round.query.trim().is_empty() {
            problems.push(format!("round {want}: empty query"));
        }
        let k = round.results.len();
        if k == 0 || k > 10 {
            problems.push(format!("round {want}: {k} results (expected 1..=10)"));
        }
        for (j, r) in round.results.iter().enumerate() {
            if r.rank != j as u32 + 1 {
                problems.push(format!(
                    "round {want}: result rank {} at position {} (expected {})",
                    r.rank,
                    j + 1,
                    j + 1
                ));
            }
            if r.url.is_empty() || r.title.is_empty() {
                problems.push(format!(
                    "round {want}: result {} missing url or title",
                    j + 1
                ));
            }
        }
        if round.clicked_rank < 1 || round.clicked_rank as usize > k {
            problems.push(format!(
                "round {want}: clicked_rank {} outside 1..={k}",
                round.clicked_rank
            ));
        }
    }
    problems
}

/// Checks every schema invariant of a dataset directory: per-line session
/// shape, rank and click bounds, round ordering, the user-level split
/// partition, the 98/1/1 size rule, and stats consistency.
pub fn validate_dataset(dir: &Path) -> Result<ValidationReport, DatasetError> {
    let mut report = ValidationReport::default();
    let mut seen_users: BTreeMap<String, &'static str> = BTreeMap::new();
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut total_rounds: u64 = 0;

    for file in SPLIT_FILES {
        let path = dir.join(file);
        if !path.exists() {
            return Err(DatasetError::MissingFile(path.display().to_string()));
        }
        let reader = std::io::BufReader::new(std::fs::File::open(&path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let session: UserSession = match serde_json::from_str(&line) {
                Ok(s) => s,
                Err(e) => {
                    report.violations.push(DatasetViolation {
                        file: file.to_string(),
                        line: lineno,
                        message: format!("undecodable session: {e}"),
                    });
                    continue;
                }
            };
            *counts.entry(file).or_insert(0) += 1;
            total_rounds += session.rounds.len() as u64;
            for message in check_session(&session) {
                report.violations.push(DatasetViolation {
                    file: file.to_string(),
                    line: lineno,
                    message,
                });
            }
            if let Some(other) = seen_users.insert(session.user_id.clone(), file) {
                report.violations.push(DatasetViolation {
                    file: file.to_string(),
                    line: lineno,
                    message: format!(
                        "user {} appears in both {other} and {file}: split is not a partition",
                        session.user_id
                    ),
                });
            }
        }
    }

    let n: usize = counts.values().sum();
    if n > 0 {
        let expected_eval = eval_split_size(n);
        for file in ["valid.jsonl", "test.jsonl"] {
            let got = counts.get(file).copied().unwrap_or(0);
            if got != expected_eval {
                report.violations.push(DatasetViolation {
                    file: file.to_string(),
                    line: 0,
                    message: format!("split size {got}, expected {expected_eval} for {n} users"),
                });
            }
        }
    }

    let stats_path = dir.join("stats.json");
    match std::fs::read_to_string(&stats_path) {
        Ok(raw) => match serde_json::from_str::<DatasetStats>(&raw) {
            Ok(stats) => {
                if stats.n_users != n {
                    report.violations.push(DatasetViolation {
                        file: "stats.json".to_string(),
                        line: 0,
                        message: format!("n_users {} but split files hold {n}", stats.n_users),
                    });
                }
                let expected_avg = round2(total_rounds, n as u64);
                if (stats.avg_queries_per_user - expected_avg).abs() > 1e-9 {
                    report.violations.push(DatasetViolation {
                        file: "stats.json".to_string(),
                        line: 0,
                        message: format!(
                            "avg_queries_per_user {} but sessions give {expected_avg}",
                            stats.avg_queries_per_user
                        ),
                    });
                }
            }
            Err(e) => report.violations.push(DatasetViolation {
                file: "stats.json".to_string(),
                line: 0,
                message: format!("undecodable stats: {e}"),
            }),
        },
        Err(_) => report.violations.push(DatasetViolation {
            file: "stats.json".to_string(),
            line: 0,
            message: "missing stats.json".to_string(),
        }),
    }
    if !dir.join("metadata.json").exists() {
        report.violations.push(DatasetViolation {
            file: "metadata.json".to_string(),
            line: 0,
            message: "missing metadata.json".to_string(),
        });
    }

    Ok(report)
}
