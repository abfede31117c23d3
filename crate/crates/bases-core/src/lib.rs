//! Large-scale simulation of web-search user behavior with LLM-backed agents.
//!
//! The pipeline has five stages, each a module of this crate:
//!
//! 1. [`profiles`] — synthesize unique, contradiction-free user profiles at
//!    scale from editable attribute catalogs, or derive them from real-data
//!    context via an LLM.
//! 2. [`backends`] — pluggable LLM and search-engine clients with
//!    deterministic offline mocks, rate limiting, and retries.
//! 3. [`simulation`] — drive one agent per profile through the
//!    search→click→finish session state machine with strict output parsing.
//! 4. [`dataset`] — materialize sessions into the WARRIORS dataset layout:
//!    validation, statistics, and the 98/1/1 user-level split.
//! 5. [`evaluation`] — session-search and click-prediction instances, BM25
//!    and pluggable rankers, MRR/NDCG metrics, and behavior-consistency
//!    metrics.
//!
//! Everything is deterministic given explicit seeds; live backends are the
//! only source of nondeterminism and are optional.

pub mod backends;
pub mod dataset;
pub mod evaluation;
pub mod profiles;
pub mod simulation;

use serde::{Deserialize, Serialize};

/// Language setting for a simulated user and everything derived from it:
/// catalogs, prompt templates, tokenization defaults, and dataset metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    English,
    Chinese,
}

impl Language {
    /// Short code used for catalog subdirectories and CLI flags.
    pub fn code(self) -> &'static str {
        match self {
            Language::English => "en",
            Language::Chinese => "zh",
        }
    }
}

impl std::fmt::Display for Language {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Language::English => write!(f, "english"),
            Language::Chinese => write!(f, "chinese"),
        }
    }
}

impl std::str::FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "en" | "english" => Ok(Language::English),
            "zh" | "chinese" => Ok(Language::Chinese),
            other => Err(format!("unknown language `{other}` (expected en/zh)")),
        }
    }
}

/// Splits a 64-bit master seed into independent per-index seeds.
///
/// SplitMix64 is a bijection on u64, so distinct indices always yield
/// distinct seeds for a fixed master seed.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
