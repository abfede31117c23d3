//! Run configuration with the precedence flags > config file > defaults.

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use bases_core::Language;
use bases_core::backends::{LlmConfig, SearchConfig};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_CATALOG_DIR: &str = "data/catalogs";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendMode {
    Mock,
    Live,
}

impl FromStr for BackendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mock" => Ok(BackendMode::Mock),
            "live" => Ok(BackendMode::Live),
            other => Err(format!(
                "unknown backend mode `{other}` (expected mock/live)"
            )),
        }
    }
}

/// JSON config file shape; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub lang: Option<String>,
    pub seed: Option<u64>,
    pub catalog_dir: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub n_users: Option<usize>,
    pub max_rounds: Option<usize>,
    pub parse_retries: Option<usize>,
    pub concurrency_limit: Option<usize>,
    pub backend_mode: Option<String>,
    pub corpus: Option<PathBuf>,
    pub llm_script: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub llm: LlmFileConfig,
    #[serde(default)]
    pub search: SearchFileConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmFileConfig {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_ms: Option<u64>,
    pub max_retries: Option<u32>,
    pub temperature: Option<f64>,
    pub rate_limit_per_sec: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchFileConfig {
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_ms: Option<u64>,
    pub max_retries: Option<u32>,
    pub rate_limit_per_sec: Option<u32>,
}

impl FileConfig {
    pub fn load(path: Option<&PathBuf>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&raw)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }
}

pub fn parse_language(flag: Option<&str>, config: &FileConfig) -> Result<Language, CliError> {
    let raw = flag
        .map(str::to_string)
        .or_else(|| config.lang.clone())
        .unwrap_or_else(|| "en".to_string());
    Language::from_str(&raw).map_err(CliError::usage)
}

/// Assembles the live LLM client config from config-file values.
pub fn llm_config(
    file: &LlmFileConfig,
    endpoint_flag: Option<&str>,
    model_flag: Option<&str>,
) -> LlmConfig {
    let defaults = LlmConfig::default();
    LlmConfig {
        endpoint: endpoint_flag
            .map(str::to_string)
            .or_else(|| file.endpoint.clone())
            .unwrap_or(defaults.endpoint),
        model: model_flag
            .map(str::to_string)
            .or_else(|| file.model.clone())
            .unwrap_or(defaults.model),
        api_key_env: file.api_key_env.clone().unwrap_or(defaults.api_key_env),
        timeout: file
            .timeout_ms
            .map(Duration::from_millis)
            .unwrap_or(defaults.timeout),
        max_retries: file.max_retries.unwrap_or(defaults.max_retries),
        temperature: file.temperature.unwrap_or(defaults.temperature),
        rate_limit_per_sec: file.rate_limit_per_sec.or(defaults.rate_limit_per_sec),
    }
}

pub fn search_config(file: &SearchFileConfig, endpoint_flag: Option<&str>) -> SearchConfig {
    let defaults = SearchConfig::default();
    SearchConfig {
        endpoint: endpoint_flag
            .map(str::to_string)
            .or_else(|| file.endpoint.clone())
            .unwrap_or(defaults.endpoint),
        api_key_env: file.api_key_env.clone().unwrap_or(defaults.api_key_env),
        timeout: file
            .timeout_ms
            .map(Duration::from_millis)
            .unwrap_or(defaults.timeout),
        max_retries: file.max_retries.unwrap_or(defaults.max_retries),
        rate_limit_per_sec: file.rate_limit_per_sec.or(defaults.rate_limit_per_sec),
    }
}

/// RFC 3339 UTC timestamp from unix seconds, for dataset metadata.
pub fn rfc3339_utc(unix_secs: u64) -> String {
    let days = unix_secs / 86_400;
    let rem = unix_secs % 86_400;
    let (hh, mm, ss) = (rem / 3600, (rem % 3600) / 60, rem % 60);

    // Gregorian civil date from day number (days since 1970-01-01).
    let z = days as i64 + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097) as u64;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = yoe as i64 + era * 400 + i64::from(month <= 2);

    format!("{year:04}-{month:02}-{day:02}T{hh:02}:{mm:02}:{ss:02}Z")
}

/// The metadata timestamp: explicit flag, else SOURCE_DATE_EPOCH for
/// reproducible builds, else the current time.
pub fn resolve_created_at(flag: Option<&str>) -> String {
    if let Some(ts) = flag {
        return ts.to_string();
    }
    if let Ok(epoch) = std::env::var("SOURCE_DATE_EPOCH")
        && let Ok(secs) = epoch.trim().parse::<u64>()
    {
        return rfc3339_utc(secs);
    }
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default()
        .as_secs();
    rfc3339_utc(now)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rfc3339_matches_known_timestamps() {
        assert_eq!(rfc3339_utc(0), "1970-01-01T00:00:00Z");
        assert_eq!(rfc3339_utc(1_700_000_000), "2023-11-14T22:13:20Z");
        assert_eq!(rfc3339_utc(951_782_400), "2000-02-29T00:00:00Z");
    }

    #[test]
    fn flags_override_config_file_values() {
        let file = LlmFileConfig {
            endpoint: Some("http://from-config".into()),
            model: Some("config-model".into()),
            temperature: Some(0.0),
            ..Default::default()
        };
        let resolved = llm_config(&file, Some("http://from-flag"), None);
        assert_eq!(resolved.endpoint, "http://from-flag");
        assert_eq!(resolved.model, "config-model");
        assert_eq!(resolved.temperature, 0.0);
        assert_eq!(resolved.api_key_env, "BASES_LLM_API_KEY");
    }
}
