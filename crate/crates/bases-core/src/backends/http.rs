//! Live HTTP clients: OpenAI-compatible chat completions for the LLM and a
//! minimal `{query} -> {results}` JSON contract for search.
//!
//! Transport is behind a trait so retry and backoff behavior is tested with
//! fault injection instead of a network.

use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::rate_limit::{Clock, RateLimiter, SystemClock};
use super::{BackendError, LlmClient, SearchClient, SearchResult};

/// Blocking JSON-over-HTTP POST. Returns `(status, body)` on any HTTP
/// response; `Err` is reserved for transport failures (DNS, refused
/// connections, timeouts).
pub trait HttpTransport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
    ) -> Result<(u16, String), String>;
}

/// Production transport backed by `ureq`.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }
}

impl HttpTransport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
    ) -> Result<(u16, String), String> {
        let mut req = self.agent.post(url);
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req
            .content_type("application/json")
            .send(body)
            .map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

/// Configuration shared by both live clients.
#[derive(Debug, Clone)]
pub struct LlmConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `https://api.openai.com/v1`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key. An empty value
    /// in the environment sends no Authorization header.
    pub api_key_env: String,
    pub timeout: Duration,
    /// Additional attempts after the first failed one.
    pub max_retries: u32,
    pub temperature: f64,
    /// Requests per second, shared across all callers of this client.
    pub rate_limit_per_sec: Option<u32>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: "gpt-3.5-turbo".to_string(),
            api_key_env: "BASES_LLM_API_KEY".to_string(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            temperature: 0.7,
            rate_limit_per_sec: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Endpoint accepting `{"query": ...}` and returning
    /// `{"results": [{"url", "title", "snippet"}, ...]}`.
    pub endpoint: String,
    pub api_key_env: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub rate_limit_per_sec: Option<u32>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            api_key_env: "BASES_SEARCH_API_KEY".to_string(),
            timeout: Duration::from_secs(30),
            max_retries: 3,
            rate_limit_per_sec: None,
        }
    }
}

const BASE_BACKOFF: Duration = Duration::from_millis(250);

struct Retrier {
    clock: Arc<dyn Clock>,
    limiter: Option<RateLimiter>,
    max_retries: u32,
}

impl Retrier {
    fn new(clock: Arc<dyn Clock>, rate_limit_per_sec: Option<u32>, max_retries: u32) -> Self {
        let limiter = rate_limit_per_sec.map(|r| RateLimiter::new(r, clock.clone()));
        Self {
            clock,
            limiter,
            max_retries,
        }
    }

    /// Runs `request` with exponential backoff. 429 and 5xx responses and
    /// transport failures are retried; other statuses fail immediately.
    fn run(
        &self,
        mut request: impl FnMut() -> Result<(u16, String), String>,
    ) -> Result<String, BackendError> {
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            let outcome = request();
            let (last_status, detail) = match outcome {
                Ok((status, body)) if (200..300).contains(&status) => return Ok(body),
                Ok((status, body)) if status == 429 || status >= 500 => {
                    (Some(status), truncate(&body))
                }
                Ok((status, body)) => {
                    return Err(BackendError::RetriesExhausted {
                        attempts: attempt,
                        last_status: Some(status),
                        detail: truncate(&body),
                    });
                }
                Err(e) => (None, e),
            };
            if attempt > self.max_retries {
                return Err(BackendError::RetriesExhausted {
                    attempts: attempt,
                    last_status,
                    detail,
                });
            }
            self.clock.sleep(BASE_BACKOFF * 2u32.pow(attempt - 1));
        }
    }
}

fn truncate(s: &str) -> String {
    const MAX: usize = 300;
    if s.len() <= MAX {
        s.to_string()
    } else {
        let mut end = MAX;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &s[..end])
    }
}

fn auth_headers(api_key_env: &str) -> Result<Vec<(String, String)>, BackendError> {
    let key = std::env::var(api_key_env)
        .map_err(|_| BackendError::MissingCredential(api_key_env.to_string()))?;
    if key.is_empty() {
        Ok(vec![])
    } else {
        Ok(vec![("Authorization".to_string(), format!("Bearer {key}"))])
    }
}

/// Live LLM client speaking the chat-completions protocol.
pub struct HttpLlmClient {
    transport: Arc<dyn HttpTransport>,
    retrier: Retrier,
    url: String,
    model: String,
    temperature: f64,
    headers: Vec<(String, String)>,
}

impl HttpLlmClient {
    pub fn new(config: &LlmConfig) -> Result<Self, BackendError> {
        let transport = Arc::new(UreqTransport::new(config.timeout));
        Self::with_transport(config, transport, Arc::new(SystemClock::new()))
    }

    pub fn with_transport(
        config: &LlmConfig,
        transport: Arc<dyn HttpTransport>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, BackendError> {
        if config.endpoint.is_empty() {
            return Err(BackendError::Config("LLM endpoint is not set".to_string()));
        }
        Ok(Self {
            transport,
            retrier: Retrier::new(clock, config.rate_limit_per_sec, config.max_retries),
            url: format!("{}/chat/completions", config.endpoint.trim_end_matches('/')),
            model: config.model.clone(),
            temperature: config.temperature,
            headers: auth_headers(&config.api_key_env)?,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        })
        .to_string();
        let raw = self
            .retrier
            .run(|| self.transport.post_json(&self.url, &self.headers, &body))?;
        let parsed: ChatResponse = serde_json::from_str(&raw)
            .map_err(|e| BackendError::Protocol(format!("chat completion decode: {e}")))?;
        let choice =
            parsed.choices.into_iter().next().ok_or_else(|| {
                BackendError::Protocol("chat completion has no choices".to_string())
            })?;
        Ok(choice.message.content)
    }
}

/// Live search client for the minimal JSON search contract.
pub struct HttpSearchClient {
    transport: Arc<dyn HttpTransport>,
    retrier: Retrier,
    url: String,
    headers: Vec<(String, String)>,
}

impl HttpSearchClient {
    pub fn new(config: &SearchConfig) -> Result<Self, BackendError> {
        let transport = Arc::new(UreqTransport::new(config.timeout));
        Self::with_transport(config, transport, Arc::new(SystemClock::new()))
    }

    pub fn with_transport(
        config: &SearchConfig,
        transport: Arc<dyn HttpTransport>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, BackendError> {
        if config.endpoint.is_empty() {
            return Err(BackendError::Config(
                "search endpoint is not set".to_string(),
            ));
        }
        Ok(Self {
            transport,
            retrier: Retrier::new(clock, config.rate_limit_per_sec, config.max_retries),
            url: config.endpoint.clone(),
            headers: auth_headers(&config.api_key_env)?,
        })
    }
}

#[derive(Deserialize)]
struct SearchResponse {
    #[serde(default)]
    results: Vec<SearchResponseItem>,
}

#[derive(Deserialize)]
struct SearchResponseItem {
    url: String,
    title: String,
    #[serde(default)]
    snippet: String,
}

impl SearchClient for HttpSearchClient {
    fn search(&self, query: &str) -> Result<Vec<SearchResult>, BackendError> {
        let body = json!({ "query": query }).to_string();
        let raw = self
            .retrier
            .run(|| self.transport.post_json(&self.url, &self.headers, &body))?;
        let parsed: SearchResponse = serde_json::from_str(&raw)
            .map_err(|e| BackendError::Protocol(format!("search response decode: {e}")))?;
        Ok(parsed
            .results
            .into_iter()
            .enumerate()
            .map(|(i, item)| SearchResult {
                rank: i as u32 + 1,
                url: item.url,
                title: item.title,
                snippet: item.snippet,
            })
            .collect())
    }
}
