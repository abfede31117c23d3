//! Ranking evaluation over session data.
//!
//! Builds session-search and click-prediction instances from a dataset,
//! scores them with BM25 or any pluggable [`Ranker`], and reports MRR,
//! NDCG@1, and NDCG@3. Candidates are ranked by descending score with ties
//! broken by original candidate order, which makes every number here
//! deterministic.

mod bm25;
mod consistency;
mod text;

pub use bm25::{Bm25Index, Bm25Params};
pub use consistency::{
    OverlapNorm, click_top1_accuracy, llm_judge_query_consistency, term_overlap_rate,
    term_overlap_rate_with,
};
pub use text::{StopwordList, tokenize};

use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::BackendError;
use crate::dataset::WarriorsDataset;

/// The two supported ranking tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Rank the current round's candidates using earlier rounds as context.
    SessionSearch,
    /// Rank a round's own result list to predict the click, no context.
    ClickPrediction,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::SessionSearch => write!(f, "session_search"),
            Task::ClickPrediction => write!(f, "click_prediction"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub query: String,
    pub clicked_document_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub doc_id: String,
    pub document_text: String,
}

/// One evaluation item: a query, up to ten candidates, and the single
/// positive (clicked) candidate's index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingInstance {
    pub task: Task,
    /// Prior rounds' (query, clicked document text); empty for
    /// click_prediction and for the session-search of round one (which is
    /// why session-search instances only exist from round two on).
    pub history: Vec<HistoryEntry>,
    pub query: String,
    pub candidates: Vec<Candidate>,
    /// Zero-based index into `candidates`.
    pub positive_index: usize,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no {0} instances can be built from this dataset")]
    NoInstances(Task),
    #[error("cannot evaluate an empty instance list")]
    EmptyInstances,
    #[error("ranker `{ranker}` returned {got} scores for instance {index} ({expected} candidates)")]
    ScoreLengthMismatch {
        ranker: String,
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("external scores misaligned: expected {expected} instances, got {got}")]
    ScoreCountMismatch { expected: usize, got: usize },
    #[error("non-finite score for instance {0}")]
    NonFiniteScore(usize),
    #[error("judge verdict unparseable after {attempts} attempts; last output: {raw:?}")]
    UnparseableVerdict { attempts: usize, raw: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn document_text(title: &str, snippet: &str) -> String {
    format!("{title} {snippet}")
}

/// Builds instances for `task`, ordered by user_id then round index.
///
/// click_prediction: one instance per round over that round's results.
/// session_search: one instance per round with at least one prior round,
/// carrying the prior (query, clicked document) pairs as history.
pub fn build_instances(dataset: &WarriorsDataset, task: Task) -> Vec<RankingInstance> {
    let mut instances = Vec::new();
    // dataset.sessions is already sorted by user_id.
    for session in &dataset.sessions {
        let mut history: Vec<HistoryEntry> = Vec::new();
        for round in &session.rounds {
            let candidates: Vec<Candidate> = round
                .results
                .iter()
                .map(|r| Candidate {
                    doc_id: r.url.clone(),
                    document_text: document_text(&r.title, &r.snippet),
                })
                .collect();
            let positive_index = (round.clicked_rank - 1) as usize;
            match task {
                Task::ClickPrediction => instances.push(RankingInstance {
                    task,
                    history: Vec::new(),
                    query: round.query.clone(),
                    candidates: candidates.clone(),
                    positive_index,
                }),
                Task::SessionSearch => {
                    if !history.is_empty() {
                        instances.push(RankingInstance {
                            task,
                            history: history.clone(),
                            query: round.query.clone(),
                            candidates: candidates.clone(),
                            positive_index,
                        });
                    }
                }
            }
            let clicked = &round.results[positive_index];
            history.push(HistoryEntry {
                query: round.query.clone(),
                clicked_document_text: document_text(&clicked.title, &clicked.snippet),
            });
        }
    }
    instances
}

/// Scores one instance with BM25, treating the instance's candidate set as
/// the corpus. For session search, history queries are prepended to the
/// current query; clicked-document text stays out of the lexical query.
pub fn bm25_score(instance: &RankingInstance, params: &Bm25Params) -> Vec<f64> {
    let texts: Vec<&str> = instance
        .candidates
        .iter()
        .map(|c| c.document_text.as_str())
        .collect();
    let index = Bm25Index::from_texts(&texts);
    let mut query = String::new();
    for h in &instance.history {
        query.push_str(&h.query);
        query.push(' ');
    }
    query.push_str(&instance.query);
    index.score(&query, params)
}

/// Anything that can score a candidate list.
pub trait Ranker {
    fn name(&self) -> &str;
    /// One finite score per candidate, higher is better.
    fn score(&self, instance: &RankingInstance) -> Vec<f64>;
}

/// The BM25 reference ranker.
#[derive(Debug, Default)]
pub struct Bm25Ranker {
    pub params: Bm25Params,
}

impl Ranker for Bm25Ranker {
    fn name(&self) -> &str {
        "bm25"
    }

    fn score(&self, instance: &RankingInstance) -> Vec<f64> {
        bm25_score(instance, &self.params)
    }
}

/// Seeded random scores; the no-signal baseline.
pub struct RandomRanker {
    rng: Mutex<ChaCha12Rng>,
}

impl RandomRanker {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Mutex::new(ChaCha12Rng::seed_from_u64(seed)),
        }
    }
}

impl Ranker for RandomRanker {
    fn name(&self) -> &str {
        "random"
    }

    fn score(&self, instance: &RankingInstance) -> Vec<f64> {
        let mut rng = self.rng.lock().unwrap();
        (0..instance.candidates.len())
            .map(|_| rng.random::<f64>())
            .collect()
    }
}

/// Precomputed scores aligned to the instance ordering, e.g. from an
/// external neural ranker run.
pub struct ExternalScoresRanker {
    scores: Vec<Vec<f64>>,
    cursor: Mutex<usize>,
}

impl ExternalScoresRanker {
    /// `scores[i]` must hold one score per candidate of instance `i`.
    pub fn new(scores: Vec<Vec<f64>>, n_instances: usize) -> Result<Self, EvalError> {
        if scores.len() != n_instances {
            return Err(EvalError::ScoreCountMismatch {
                expected: n_instances,
                got: scores.len(),
            });
        }
        Ok(Self {
            scores,
            cursor: Mutex::new(0),
        })
    }
}

impl Ranker for ExternalScoresRanker {
    fn name(&self) -> &str {
        "external"
    }

    fn score(&self, _instance: &RankingInstance) -> Vec<f64> {
        let mut cursor = self.cursor.lock().unwrap();
        let scores = self.scores.get(*cursor).cloned().unwrap_or_default();
        *cursor += 1;
        scores
    }
}

/// Evaluation results for one task. Metric values are in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    pub ranker: String,
    pub n_instances: usize,
    pub mrr: f64,
    pub ndcg_at_1: f64,
    pub ndcg_at_3: f64,
}

impl MetricsReport {
    /// Aligned plain-text table, metrics ×100 with two decimals.
    pub fn table(reports: &[MetricsReport]) -> String {
        let mut out = format!(
            "{:<16} {:<10} {:>8} {:>8} {:>8} {:>8}\n",
            "task", "ranker", "n", "MRR", "NDCG@1", "NDCG@3"
        );
        for r in reports {
            out.push_str(&format!(
                "{:<16} {:<10} {:>8} {:>8.2} {:>8.2} {:>8.2}\n",
                r.task.to_string(),
                r.ranker,
                r.n_instances,
                r.mrr * 100.0,
                r.ndcg_at_1 * 100.0,
                r.ndcg_at_3 * 100.0
            ));
        }
        out
    }
}

/// Rank (1-based) of the positive candidate under descending score with ties
/// broken by original candidate order: candidates strictly better, plus
/// earlier candidates scoring equal, come first.
fn positive_rank(scores: &[f64], positive_index: usize) -> usize {
    let p = scores[positive_index];
    let better = scores.iter().filter(|&&s| s > p).count();
    let earlier_ties = scores[..positive_index].iter().filter(|&&s| s == p).count();
    better + earlier_ties + 1
}

fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    // Single binary-relevant candidate: ideal DCG is 1.
    if rank <= k {
        1.0 / ((rank as f64) + 1.0).log2()
    } else {
        0.0
    }
}

/// Scores every instance with `ranker` and averages reciprocal rank and
/// NDCG@{1,3} of the single positive candidate.
pub fn evaluate(
    ranker: &dyn Ranker,
    instances: &[RankingInstance],
) -> Result<MetricsReport, EvalError> {
    if instances.is_empty() {
        return Err(EvalError::EmptyInstances);
    }
    let mut sum_rr = 0.0;
    let mut sum_ndcg1 = 0.0;
    let mut sum_ndcg3 = 0.0;
    for (index, instance) in instances.iter().enumerate() {
        let scores = ranker.score(instance);
        if scores.len() != instance.candidates.len() {
            return Err(EvalError::ScoreLengthMismatch {
                ranker: ranker.name().to_string(),
                index,
                got: scores.len(),
                expected: instance.candidates.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(EvalError::NonFiniteScore(index));
        }
        let rank = positive_rank(&scores, instance.positive_index);
        sum_rr += 1.0 / rank as f64;
        sum_ndcg1 += ndcg_at_k(rank, 1);
        sum_ndcg3 += ndcg_at_k(rank, 3);
    }
    let n = instances.len() as f64;
    Ok(MetricsReport {
        task: instances[0].task,
        ranker: ranker.name().to_string(),
        n_instances: instances.len(),
        mrr: sum_rr / n,
        ndcg_at_1: sum_ndcg1 / n,
        ndcg_at_3: sum_ndcg3 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Language;
    use crate::backends::SearchResult;
    use crate::dataset::{DatasetMetadata, build_dataset};
    use crate::simulation::{SessionRound, Termination, UserSession};

    fn metadata() -> DatasetMetadata {
        DatasetMetadata {
            created_at: "2026-01-01T00:00:00Z".into(),
            search_backend: "mock".into(),
            generator_version: "0.1.0".into(),
            language: Language::English,
        }
    }

    fn session(user_id: &str, queries: &[&str], clicked: &[u32]) -> UserSession {
        let rounds = queries
            .iter()
            .zip(clicked)
            .enumerate()
            .map(|(i, (q, &c))| SessionRound {
                round_index: i as u32 + 1,
                query: q.to_string(),
                results: (1..=4u32)
                    .map(|r| SearchResult {
                        rank: r,
                        url: format!("https://d/{user_id}/{i}/{r}"),
                        title: format!("doc {r} about {q}"),
                        snippet: "snippet".into(),
                    })
                    .collect(),
                clicked_rank: c,
                click_reason: String::new(),
            })
            .collect();
        UserSession {
            user_id: user_id.into(),
            language: Language::English,
            rounds,
            terminated_by: Termination::FinishAction,
            failure_detail: None,
        }
    }

    fn dataset() -> WarriorsDataset {
        let sessions = vec![
            session("ua", &["alpha", "beta", "gamma"], &[2, 1, 3]),
            session("ub", &["delta"], &[4]),
            session("uc", &["epsilon", "zeta"], &[1, 2]),
        ];
        build_dataset(sessions, 5, Language::English, metadata())
            .unwrap()
            .0
    }

    struct FixedRanker(Vec<Vec<f64>>);
    impl Ranker for FixedRanker {
        fn name(&self) -> &str {
            "fixed"
        }
        fn score(&self, instance: &RankingInstance) -> Vec<f64> {
            self.0
                .iter()
                .find(|s| s.len() == instance.candidates.len())
                .cloned()
                .unwrap_or_else(|| vec![0.0; instance.candidates.len()])
        }
    }

    #[test]
    fn instance_counts_match_round_structure() {
        let ds = dataset();
        let clicks = build_instances(&ds, Task::ClickPrediction);
        assert_eq!(clicks.len(), 6);
        assert!(clicks.iter().all(|i| i.history.is_empty()));

        let sessions = build_instances(&ds, Task::SessionSearch);
        // 3-round session gives 2, 1-round gives 0, 2-round gives 1.
        assert_eq!(sessions.len(), 3);
        assert!(sessions.iter().all(|i| !i.history.is_empty()));
    }

    #[test]
    fn clicked_rank_becomes_zero_based_positive_index() {
        let ds = dataset();
        let clicks = build_instances(&ds, Task::ClickPrediction);
        // First instance is user ua round 1, clicked_rank 2.
        assert_eq!(clicks[0].positive_index, 1);
        assert_eq!(clicks[0].query, "alpha");
    }

    #[test]
    fn instance_building_is_deterministic() {
        let ds = dataset();
        assert_eq!(
            build_instances(&ds, Task::SessionSearch),
            build_instances(&ds, Task::SessionSearch)
        );
    }

    #[test]
    fn session_history_carries_prior_clicked_documents() {
        let ds = dataset();
        let instances = build_instances(&ds, Task::SessionSearch);
        let second = &instances[0]; // ua round 2
        assert_eq!(second.history.len(), 1);
        assert_eq!(second.history[0].query, "alpha");
        assert!(
            second.history[0]
                .clicked_document_text
                .contains("doc 2 about alpha")
        );
    }

    #[test]
    fn perfect_ranker_scores_one_everywhere() {
        let ds = dataset();
        let instances = build_instances(&ds, Task::ClickPrediction);
        struct Oracle;
        impl Ranker for Oracle {
            fn name(&self) -> &str {
                "oracle"
            }
            fn score(&self, instance: &RankingInstance) -> Vec<f64> {
                (0..instance.candidates.len())
                    .map(|i| {
                        if i == instance.positive_index {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
        }
        let report = evaluate(&Oracle, &instances).unwrap();
        assert_eq!(report.mrr, 1.0);
        assert_eq!(report.ndcg_at_1, 1.0);
        assert_eq!(report.ndcg_at_3, 1.0);
    }

    #[test]
    fn positive_at_rank_two_matches_direct_dcg() {
        let instance = RankingInstance {
            task: Task::ClickPrediction,
            history: vec![],
            query: "q".into(),
            candidates: (0..4)
                .map(|i| Candidate {
                    doc_id: i.to_string(),
                    document_text: String::new(),
                })
                .collect(),
            positive_index: 0,
        };
        // Positive scores lower than exactly one other candidate.
        let ranker = FixedRanker(vec![vec![0.5, 0.9, 0.1, 0.0]]);
        let report = evaluate(&ranker, std::slice::from_ref(&instance)).unwrap();
        assert!((report.mrr - 0.5).abs() < 1e-12);
        assert_eq!(report.ndcg_at_1, 0.0);
        assert!((report.ndcg_at_3 - 1.0 / 3f64.log2()).abs() < 1e-12);
        assert!((report.ndcg_at_3 - 0.6309297535714574).abs() < 1e-9);
    }

    #[test]
    fn ties_break_by_candidate_order() {
        let instance = RankingInstance {
            task: Task::ClickPrediction,
            history: vec![],
            query: "q".into(),
            candidates: (0..3)
                .map(|i| Candidate {
                    doc_id: i.to_string(),
                    document_text: String::new(),
                })
                .collect(),
            positive_index: 1,
        };
        let ranker = FixedRanker(vec![vec![0.7, 0.7, 0.7]]);
        let report = evaluate(&ranker, &[instance]).unwrap();
        // All tied: positive at index 1 lands at rank 2.
        assert!((report.mrr - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wrong_length_scores_name_the_instance() {
        let ds = dataset();
        let instances = build_instances(&ds, Task::ClickPrediction);
        struct Short;
        impl Ranker for Short {
            fn name(&self) -> &str {
                "short"
            }
            fn score(&self, _: &RankingInstance) -> Vec<f64> {
                vec![1.0]
            }
        }
        match evaluate(&Short, &instances) {
            Err(EvalError::ScoreLengthMismatch {
                index,
                got,
                expected,
                ..
            }) => {
                assert_eq!(index, 0);
                assert_eq!(got, 1);
                assert_eq!(expected, 4);
            }
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn empty_instances_are_refused() {
        assert!(matches!(
            evaluate(&Bm25Ranker::default(), &[]),
            Err(EvalError::EmptyInstances)
        ));
    }

    #[test]
    fn bm25_prefers_the_candidate_sharing_query_terms() {
        let instance = RankingInstance {
            task: Task::ClickPrediction,
            history: vec![],
            query: "hiking trails".into(),
            candidates: vec![
                Candidate {
                    doc_id: "a".into(),
                    document_text: "stock market news".into(),
                },
                Candidate {
                    doc_id: "b".into(),
                    document_text: "best hiking trails guide".into(),
                },
                Candidate {
                    doc_id: "c".into(),
                    document_text: "cooking pasta at home".into(),
                },
            ],
            positive_index: 1,
        };
        let scores = bm25_score(&instance, &Bm25Params::default());
        assert!(scores[1] > scores[0]);
        assert!(scores[1] > scores[2]);
    }

    #[test]
    fn session_search_query_includes_history_queries() {
        let with_history = RankingInstance {
            task: Task::SessionSearch,
            history: vec![HistoryEntry {
                query: "alpine".into(),
                clicked_document_text: "ignored".into(),
            }],
            query: "boots".into(),
            candidates: vec![
                Candidate {
                    doc_id: "a".into(),
                    document_text: "alpine boots review".into(),
                },
                Candidate {
                    doc_id: "b".into(),
                    document_text: "boots catalogue".into(),
                },
            ],
            positive_index: 0,
        };
        let scores = bm25_score(&with_history, &Bm25Params::default());
        assert!(
            scores[0] > scores[1],
            "history term should favor candidate a"
        );
    }

    #[test]
    fn external_scores_must_align_in_count() {
        assert!(matches!(
            ExternalScoresRanker::new(vec![vec![1.0]], 2),
            Err(EvalError::ScoreCountMismatch {
                expected: 2,
                got: 1
            })
        ));
    }
}
