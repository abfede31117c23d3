//! Pluggable LLM and search-engine clients.
//!
//! The simulation engine only sees the [`LlmClient`] and [`SearchClient`]
//! traits. Live implementations speak OpenAI-compatible chat completions and
//! a minimal `{query} -> {results}` JSON contract over HTTP with retries and
//! rate limiting; the mock implementations are pure functions of their
//! inputs, so everything downstream of them is reproducible offline.

mod http;
mod mock;
mod rate_limit;

pub use http::{
    HttpLlmClient, HttpSearchClient, HttpTransport, LlmConfig, SearchConfig, UreqTransport,
};
pub use mock::{
    CorpusSearchClient, PromptRecorder, ScriptEntry, ScriptedLlm, SequenceLlm,
    mock_search_from_corpus,
};
pub use rate_limit::{Clock, RateLimiter, SystemClock, VirtualClock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One ranked result on a search page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Position on the page, 1-based, unique within a result list.
    pub rank: u32,
    pub url: String,
    pub title: String,
    #[serde(default)]
    pub snippet: String,
}

/// Text completion backend. Implementations must be shareable across
/// concurrently running sessions.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

/// Search backend returning at most ten ranked results.
pub trait SearchClient: Send + Sync {
    fn search(&self, query: &str) -> Result<Vec<SearchResult>, BackendError>;
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("prompt must not be empty")]
    EmptyPrompt,
    #[error("search query must not be empty")]
    EmptyQuery,
    #[error("credential environment variable `{0}` is not set")]
    MissingCredential(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
    #[error("request failed after {attempts} attempts (last status: {last_status:?}): {detail}")]
    RetriesExhausted {
        attempts: u32,
        last_status: Option<u16>,
        detail: String,
    },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("mock script exhausted after {0} responses")]
    ScriptExhausted(usize),
    #[error("no mock script entry matches prompt starting with {0:?}")]
    ScriptMiss(String),
    #[error("{path}:{line}: malformed corpus line: {detail}")]
    CorpusLoad {
        path: String,
        line: usize,
        detail: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Completes `prompt` against `client`, enforcing the non-empty-prompt
/// precondition. Transport retries live inside the client.
pub fn llm_complete(client: &dyn LlmClient, prompt: &str) -> Result<String, BackendError> {
    if prompt.trim().is_empty() {
        return Err(BackendError::EmptyPrompt);
    }
    client.complete(prompt)
}

/// Searches `query` against `client` and normalizes the result page:
/// entries with an empty URL or title are dropped, the page is cut to ten
/// results, and ranks are reassigned consecutively from 1.
///
/// An empty list signals no hits, not an error.
pub fn web_search(
    client: &dyn SearchClient,
    query: &str,
) -> Result<Vec<SearchResult>, BackendError> {
    if query.trim().is_empty() {
        return Err(BackendError::EmptyQuery);
    }
    let raw = client.search(query)?;
    let results = raw
        .into_iter()
        .filter(|r| !r.url.is_empty() && !r.title.is_empty())
        .take(10)
        .enumerate()
        .map(|(i, mut r)| {
            r.rank = i as u32 + 1;
            r
        })
        .collect();
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<SearchResult>);
    impl SearchClient for Fixed {
        fn search(&self, _q: &str) -> Result<Vec<SearchResult>, BackendError> {
            Ok(self.0.clone())
        }
    }

    fn result(rank: u32, title: &str) -> SearchResult {
        SearchResult {
            rank,
            url: format!("https://example.org/{rank}"),
            title: title.to_string(),
            snippet: String::new(),
        }
    }

    #[test]
    fn empty_prompt_is_rejected() {
        let llm = SequenceLlm::new(["hi"]);
        assert!(matches!(
            llm_complete(&llm, "  "),
            Err(BackendError::EmptyPrompt)
        ));
    }

    #[test]
    fn empty_query_is_rejected() {
        let client = Fixed(vec![]);
        assert!(matches!(
            web_search(&client, ""),
            Err(BackendError::EmptyQuery)
        ));
    }

    #[test]
    fn web_search_truncates_and_reranks() {
        let many: Vec<SearchResult> = (1..=15).map(|i| result(i, "t")).collect();
        let out = web_search(&Fixed(many), "q").unwrap();
        assert_eq!(out.len(), 10);
        let ranks: Vec<u32> = out.iter().map(|r| r.rank).collect();
        assert_eq!(ranks, (1..=10).collect::<Vec<u32>>());
    }

    #[test]
    fn web_search_drops_untitled_entries() {
        let mut items = vec![result(1, "keep"), result(2, "")];
        items.push(SearchResult {
            rank: 3,
            url: String::new(),
            title: "no url".into(),
            snippet: String::new(),
        });
        let out = web_search(&Fixed(items), "q").unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].title, "keep");
    }
}
