//! Deterministic offline backends.
//!
//! [`SequenceLlm`] replays a fixed list of responses. [`ScriptedLlm`] maps
//! prompt substrings to responses (first match wins), which is enough to
//! script whole multi-user batches because prompts embed the profile and the
//! browsing history. [`CorpusSearchClient`] serves BM25-ranked results from a
//! JSONL corpus.

use std::collections::VecDeque;
use std::io::BufRead;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, LlmClient, SearchClient, SearchResult};
use crate::evaluation::{Bm25Index, Bm25Params};

/// Replays responses in order, ignoring the prompt. Handy for single-session
/// tests where the exact call sequence is known.
pub struct SequenceLlm {
    responses: Mutex<VecDeque<String>>,
    total: usize,
}

impl SequenceLlm {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let responses: VecDeque<String> = responses.into_iter().map(Into::into).collect();
        let total = responses.len();
        Self {
            responses: Mutex::new(responses),
            total,
        }
    }
}

impl LlmClient for SequenceLlm {
    fn complete(&self, _prompt: &str) -> Result<String, BackendError> {
        self.responses
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(BackendError::ScriptExhausted(self.total))
    }
}

/// One line of a mock LLM script: if `pattern` occurs in the prompt, reply
/// with `response`. An empty pattern matches every prompt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub pattern: String,
    pub response: String,
    /// Optional artificial latency, for exercising interruption and
    /// concurrency behavior.
    #[serde(default)]
    pub delay_ms: u64,
}

/// Substring-keyed scripted LLM; a pure function of the prompt, so it is safe
/// to share across concurrently running sessions.
pub struct ScriptedLlm {
    entries: Vec<ScriptEntry>,
}

impl ScriptedLlm {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self { entries }
    }

    /// Loads a JSONL script of `{"match": ..., "response": ...}` lines.
    pub fn from_jsonl(path: &Path) -> Result<Self, BackendError> {
        let file = std::fs::File::open(path)?;
        let mut entries = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry =
                serde_json::from_str(&line).map_err(|e| BackendError::CorpusLoad {
                    path: path.display().to_string(),
                    line: i + 1,
                    detail: e.to_string(),
                })?;
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }
}

impl LlmClient for ScriptedLlm {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        for entry in &self.entries {
            if entry.pattern.is_empty() || prompt.contains(&entry.pattern) {
                if entry.delay_ms > 0 {
                    std::thread::sleep(std::time::Duration::from_millis(entry.delay_ms));
                }
                return Ok(entry.response.clone());
            }
        }
        let preview: String = prompt.chars().take(80).collect();
        Err(BackendError::ScriptMiss(preview))
    }
}

/// Wraps any client and records every prompt it receives, for tests that
/// assert on rendered prompt content.
pub struct PromptRecorder<C> {
    inner: C,
    prompts: Mutex<Vec<String>>,
}

impl<C> PromptRecorder<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

impl<C: LlmClient> LlmClient for PromptRecorder<C> {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        self.prompts.lock().unwrap().push(prompt.to_string());
        self.inner.complete(prompt)
    }
}

#[derive(Debug, Clone, Deserialize)]
struct CorpusDoc {
    url: String,
    title: String,
    #[serde(default)]
    snippet: String,
}

/// Deterministic search backend over a fixed JSONL corpus of
/// `{url, title, snippet}` documents, ranked by BM25 over title + snippet.
/// Zero-scoring documents are treated as misses.
pub struct CorpusSearchClient {
    docs: Vec<CorpusDoc>,
    index: Bm25Index,
    params: Bm25Params,
}

impl CorpusSearchClient {
    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        let file = std::fs::File::open(path)?;
        let mut docs = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: CorpusDoc =
                serde_json::from_str(&line).map_err(|e| BackendError::CorpusLoad {
                    path: path.display().to_string(),
                    line: i + 1,
                    detail: e.to_string(),
                })?;
            docs.push(doc);
        }
        Ok(Self::from_docs(docs))
    }

    fn from_docs(docs: Vec<CorpusDoc>) -> Self {
        let texts: Vec<String> = docs
            .iter()
            .map(|d| format!("{} {}", d.title, d.snippet))
            .collect();
        let index = Bm25Index::from_texts(&texts);
        Self {
            docs,
            index,
            params: Bm25Params::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

impl SearchClient for CorpusSearchClient {
    fn search(&self, query: &str) -> Result<Vec<SearchResult>, BackendError> {
        let scores = self.index.score(query, &self.params);
        let mut hits: Vec<(usize, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|(_, s)| *s > 0.0)
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(hits
            .into_iter()
            .take(10)
            .enumerate()
            .map(|(pos, (i, _))| SearchResult {
                rank: pos as u32 + 1,
                url: self.docs[i].url.clone(),
                title: self.docs[i].title.clone(),
                snippet: self.docs[i].snippet.clone(),
            })
            .collect())
    }
}

/// Builds a deterministic mock search client from a JSONL corpus file.
pub fn mock_search_from_corpus(path: &Path) -> Result<CorpusSearchClient, BackendError> {
    CorpusSearchClient::from_path(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn corpus_file(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f.flush().unwrap();
        f
    }

    #[test]
    fn sequence_llm_replays_in_order_then_errors() {
        let llm = SequenceLlm::new(["Search[weather]", "1"]);
        assert_eq!(llm.complete("x").unwrap(), "Search[weather]");
        assert_eq!(llm.complete("x").unwrap(), "1");
        assert!(matches!(
            llm.complete("x"),
            Err(BackendError::ScriptExhausted(2))
        ));
    }

    #[test]
    fn scripted_llm_takes_first_match() {
        let llm = ScriptedLlm::new(vec![
            ScriptEntry {
                pattern: "history".into(),
                response: "A".into(),
                delay_ms: 0,
            },
            ScriptEntry {
                pattern: "".into(),
                response: "B".into(),
                delay_ms: 0,
            },
        ]);
        assert_eq!(llm.complete("my history here").unwrap(), "A");
        assert_eq!(llm.complete("nothing relevant").unwrap(), "B");
    }

    #[test]
    fn scripted_llm_without_fallback_misses() {
        let llm = ScriptedLlm::new(vec![ScriptEntry {
            pattern: "xyzzy".into(),
            response: "A".into(),
            delay_ms: 0,
        }]);
        assert!(matches!(
            llm.complete("plover"),
            Err(BackendError::ScriptMiss(_))
        ));
    }

    #[test]
    fn corpus_client_caps_results_at_corpus_size() {
        let f = corpus_file(&[
            r#"{"url": "u1", "title": "rust guide", "snippet": "intro to rust"}"#,
            r#"{"url": "u2", "title": "rust book", "snippet": ""}"#,
            r#"{"url": "u3", "title": "cooking", "snippet": "pasta"}"#,
        ]);
        let client = mock_search_from_corpus(f.path()).unwrap();
        let results = client.search("rust").unwrap();
        assert!(results.len() <= 3);
        assert_eq!(results.len(), 2);
    }

    #[test]
    fn corpus_client_is_deterministic() {
        let f = corpus_file(&[
            r#"{"url": "u1", "title": "alpha beta", "snippet": "x"}"#,
            r#"{"url": "u2", "title": "beta gamma", "snippet": "y"}"#,
        ]);
        let a = mock_search_from_corpus(f.path())
            .unwrap()
            .search("beta")
            .unwrap();
        let b = mock_search_from_corpus(f.path())
            .unwrap()
            .search("beta")
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unique_match_lands_at_rank_one_with_manual_bm25_score() {
        // One matching doc out of three: df=1, N=3, tf=1.
        // Doc lengths: 2, 2, 2 (title+snippet tokens), avgdl=2, so the
        // normalizer is 1 and the score is ln((3-1+0.5)/(1+0.5)+1) * 1.0.
        let f = corpus_file(&[
            r#"{"url": "u1", "title": "alpha beta", "snippet": ""}"#,
            r#"{"url": "u2", "title": "gamma delta", "snippet": ""}"#,
            r#"{"url": "u3", "title": "epsilon zeta", "snippet": ""}"#,
        ]);
        let client = mock_search_from_corpus(f.path()).unwrap();
        let results = client.search("gamma").unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(results[0].rank, 1);
        assert_eq!(results[0].url, "u2");

        let expected = ((3.0f64 - 1.0 + 0.5) / 1.5 + 1.0).ln();
        let scores = client.index.score("gamma", &client.params);
        assert!((scores[1] - expected).abs() < 1e-9);
    }

    #[test]
    fn twenty_doc_corpus_matches_brute_force_ranking() {
        // Oracle: score-and-sort computed here from first principles, with
        // its own tokenization (plain lowercase words keep both in step).
        let docs: Vec<(String, String)> = (0..20)
            .map(|i| {
                let title = match i % 5 {
                    0 => format!("rust tutorial part {i}"),
                    1 => format!("advanced rust patterns volume {i}"),
                    2 => format!("cooking column number {i}"),
                    3 => format!("rust rust deep dive {i}"),
                    _ => format!("gardening notes week {i}"),
                };
                (format!("u{i}"), title)
            })
            .collect();

        let lines: Vec<String> = docs
            .iter()
            .map(|(u, t)| format!(r#"{{"url": "{u}", "title": "{t}", "snippet": ""}}"#))
            .collect();
        let line_refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let f = corpus_file(&line_refs);
        let client = mock_search_from_corpus(f.path()).unwrap();
        let results = client.search("rust").unwrap();

        let tokenized: Vec<Vec<&str>> = docs
            .iter()
            .map(|(_, t)| t.split_whitespace().collect())
            .collect();
        let n = tokenized.len() as f64;
        let df = tokenized.iter().filter(|d| d.contains(&"rust")).count() as f64;
        let avgdl = tokenized.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
        let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
        let mut expected: Vec<(usize, f64)> = tokenized
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let tf = d.iter().filter(|w| **w == "rust").count() as f64;
                let score = if tf == 0.0 {
                    0.0
                } else {
                    let norm = 1.0 - 0.75 + 0.75 * d.len() as f64 / avgdl;
                    idf * tf * 2.2 / (tf + 1.2 * norm)
                };
                (i, score)
            })
            .filter(|(_, s)| *s > 0.0)
            .collect();
        expected.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        assert_eq!(results.len(), 10);
        for (pos, (doc_idx, _)) in expected.iter().take(10).enumerate() {
            assert_eq!(results[pos].rank, pos as u32 + 1);
            assert_eq!(results[pos].url, docs[*doc_idx].0, "at rank {}", pos + 1);
        }
    }

    #[test]
    fn zero_hit_query_returns_empty_list() {
        let f = corpus_file(&[r#"{"url": "u1", "title": "alpha", "snippet": ""}"#]);
        let client = mock_search_from_corpus(f.path()).unwrap();
        assert!(client.search("omega").unwrap().is_empty());
    }

    #[test]
    fn malformed_corpus_line_is_reported_with_its_number() {
        let f = corpus_file(&[
            r#"{"url": "u1", "title": "ok", "snippet": ""}"#,
            r#"{"url": "u2", "broken"#,
        ]);
        match mock_search_from_corpus(f.path()) {
            Err(BackendError::CorpusLoad { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected CorpusLoad, got {:?}", other.map(|c| c.len())),
        }
    }
}
