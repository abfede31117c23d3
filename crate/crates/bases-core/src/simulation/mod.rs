//! The session engine: one agent per profile walking the
//! search→click→finish state machine.
//!
//! Per round: render the query prompt, parse the action (re-asking on parse
//! errors up to the retry budget), search, then — unless the result page is
//! empty — render the click prompt and record exactly one click. A `Finish`
//! action, the round cap, or retry exhaustion ends the session; backend
//! failures become a `failure` termination, never a panic, and completed
//! rounds are preserved.

mod actions;
mod prompts;

pub use actions::{ActionParseError, AgentAction, parse_click_action, parse_query_action};
pub use prompts::{render_click_prompt, render_profile, render_query_prompt, render_scratchpad};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Language;
use crate::backends::{LlmClient, SearchClient, SearchResult, llm_complete, web_search};
use crate::profiles::UserProfile;

/// One completed interaction round, always with exactly one click.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRound {
    /// 1-based, consecutive within a session.
    pub round_index: u32,
    pub query: String,
    pub results: Vec<SearchResult>,
    /// 1-based rank into `results`.
    pub clicked_rank: u32,
    /// Raw model output for the click, kept verbatim.
    #[serde(default)]
    pub click_reason: String,
}

/// Why a session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    FinishAction,
    MaxRounds,
    Failure,
}

/// A user's full search session: the dataset unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSession {
    pub user_id: String,
    pub language: Language,
    pub rounds: Vec<SessionRound>,
    pub terminated_by: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_detail: Option<String>,
}

/// The browsing history injected into prompts: one entry per completed round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scratchpad {
    pub entries: Vec<ScratchpadEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScratchpadEntry {
    pub query: String,
    pub clicked_title: String,
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("click prompt requires a result page of 1..=10 results, got {0}")]
    BadResultPage(usize),
}

/// Engine knobs. Defaults: 5 rounds, 3 parse attempts, 8 concurrent sessions.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Hard cap on query rounds per session (counting zero-hit rounds).
    pub max_rounds: usize,
    /// Total prompt attempts per action before the session fails.
    pub parse_retries: usize,
    /// Sessions in flight at once in `run_batch`.
    pub concurrency_limit: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            max_rounds: 5,
            parse_retries: 3,
            concurrency_limit: 8,
        }
    }
}

enum AskOutcome {
    Action(AgentAction),
    Failed(String),
}

/// Asks the LLM and parses with `parse`, re-asking the same prompt on parse
/// errors until the budget is spent. Backend errors fail immediately (the
/// client already retried transport-level problems).
fn ask_and_parse(
    llm: &dyn LlmClient,
    prompt: &str,
    attempts: usize,
    parse: impl Fn(&str) -> Result<AgentAction, ActionParseError>,
    what: &str,
) -> AskOutcome {
    let mut last_error = String::new();
    for _ in 0..attempts {
        let raw = match llm_complete(llm, prompt) {
            Ok(raw) => raw,
            Err(e) => return AskOutcome::Failed(format!("{what}: backend error: {e}")),
        };
        match parse(&raw) {
            Ok(action) => return AskOutcome::Action(action),
            Err(e) => last_error = e.to_string(),
        }
    }
    AskOutcome::Failed(format!(
        "{what}: parse failed after {attempts} attempts: {last_error}"
    ))
}

/// Runs one agent through a full session. Infallible by design: every failure
/// mode is encoded in the returned session's termination.
pub fn run_session(
    profile: &UserProfile,
    llm: &dyn LlmClient,
    search: &dyn SearchClient,
    config: &SimConfig,
) -> UserSession {
    let language = profile.language_setting;
    let mut rounds: Vec<SessionRound> = Vec::new();
    let mut scratchpad = Scratchpad::default();
    let mut query_rounds = 0usize;

    let (terminated_by, failure_detail) = loop {
        if query_rounds >= config.max_rounds {
            break (Termination::MaxRounds, None);
        }

        let prompt = render_query_prompt(profile, &scratchpad, config.max_rounds, language);
        let action = match ask_and_parse(
            llm,
            &prompt,
            config.parse_retries,
            parse_query_action,
            "query action",
        ) {
            AskOutcome::Action(a) => a,
            AskOutcome::Failed(detail) => break (Termination::Failure, Some(detail)),
        };

        let query = match action {
            AgentAction::Finish => break (Termination::FinishAction, None),
            AgentAction::Search(q) => q,
            AgentAction::Click { .. } => {
                break (
                    Termination::Failure,
                    Some("query action: parser produced a click".to_string()),
                );
            }
        };

        query_rounds += 1;
        let results = match web_search(search, &query) {
            Ok(r) => r,
            Err(e) => {
                break (
                    Termination::Failure,
                    Some(format!("search backend error: {e}")),
                );
            }
        };
        if results.is_empty() {
            // Zero-hit query: the round is discarded but still counts
            // toward the cap, and the session moves on to the next query.
            continue;
        }

        let click_prompt =
            match render_click_prompt(profile, &scratchpad, &query, &results, language) {
                Ok(p) => p,
                Err(e) => break (Termination::Failure, Some(e.to_string())),
            };
        let n_results = results.len();
        let (rank, reason) = match ask_and_parse(
            llm,
            &click_prompt,
            config.parse_retries,
            |raw| parse_click_action(raw, n_results),
            "click action",
        ) {
            AskOutcome::Action(AgentAction::Click { rank, reason }) => (rank, reason),
            AskOutcome::Action(_) => {
                break (
                    Termination::Failure,
                    Some("click action: parser produced a non-click".to_string()),
                );
            }
            AskOutcome::Failed(detail) => break (Termination::Failure, Some(detail)),
        };

        let clicked_title = results[(rank - 1) as usize].title.clone();
        scratchpad.entries.push(ScratchpadEntry {
            query: query.clone(),
            clicked_title,
        });
        rounds.push(SessionRound {
            round_index: rounds.len() as u32 + 1,
            query,
            results,
            clicked_rank: rank,
            click_reason: reason,
        });
    };

    // A session with no completed round carries no behavior; persisting it as
    // finished/capped would break the non-empty-rounds invariant.
    let (terminated_by, failure_detail) =
        if rounds.is_empty() && terminated_by != Termination::Failure {
            (
                Termination::Failure,
                Some(format!(
                    "session ended ({terminated_by:?}) before any completed round"
                )),
            )
        } else {
            (terminated_by, failure_detail)
        };

    UserSession {
        user_id: profile.user_id.clone(),
        language,
        rounds,
        terminated_by,
        failure_detail,
    }
}

/// Outcome counters for a batch run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub finished: usize,
    pub capped: usize,
    pub failed: usize,
}

impl BatchSummary {
    fn record(&mut self, session: &UserSession) {
        match session.terminated_by {
            Termination::FinishAction => self.finished += 1,
            Termination::MaxRounds => self.capped += 1,
            Termination::Failure => self.failed += 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimBatch {
    pub sessions: Vec<UserSession>,
    pub summary: BatchSummary,
}

/// Runs one session per profile with at most `concurrency_limit` in flight.
/// Output order matches input order regardless of completion order, and
/// per-session failures are recorded, never propagated.
pub fn run_batch(
    profiles: &[UserProfile],
    llm: &dyn LlmClient,
    search: &dyn SearchClient,
    config: &SimConfig,
) -> SimBatch {
    run_batch_with_sink(profiles, llm, search, config, &mut |_| Ok(()))
        .expect("no-op sink cannot fail")
}

/// Like [`run_batch`], additionally handing each session to `sink` in input
/// order as soon as its prefix of the batch is complete — this is what lets
/// the CLI flush finished sessions to disk while the batch is still running.
pub fn run_batch_with_sink(
    profiles: &[UserProfile],
    llm: &dyn LlmClient,
    search: &dyn SearchClient,
    config: &SimConfig,
    sink: &mut dyn FnMut(&UserSession) -> std::io::Result<()>,
) -> Result<SimBatch, std::io::Error> {
    assert!(!profiles.is_empty(), "session batch must not be empty");
    let workers = config.concurrency_limit.clamp(1, profiles.len());
    let next = std::sync::atomic::AtomicUsize::new(0);
    let (tx, rx) = std::sync::mpsc::channel::<(usize, UserSession)>();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || {
                loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= profiles.len() {
                        break;
                    }
                    let session = run_session(&profiles[i], llm, search, config);
                    if tx.send((i, session)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);

        let mut summary = BatchSummary::default();
        let mut slots: Vec<Option<UserSession>> = (0..profiles.len()).map(|_| None).collect();
        let mut next_emit = 0usize;
        let mut sink_result = Ok(());
        for (i, session) in rx {
            summary.record(&session);
            slots[i] = Some(session);
            while next_emit < slots.len() && slots[next_emit].is_some() {
                if sink_result.is_ok() {
                    sink_result = sink(slots[next_emit].as_ref().unwrap());
                }
                next_emit += 1;
            }
        }
        sink_result?;
        let sessions: Vec<UserSession> = slots.into_iter().map(Option::unwrap).collect();
        Ok(SimBatch { sessions, summary })
    })
}
