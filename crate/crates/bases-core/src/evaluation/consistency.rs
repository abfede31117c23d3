//! Behavior-consistency metrics: how closely agent behavior tracks a human
//! reference, measured per query pair (term overlap, optionally an LLM
//! judge) and per click pair (top-1 accuracy).

use super::EvalError;
use super::text::StopwordList;
use crate::backends::{LlmClient, llm_complete};
use crate::profiles::UserProfile;
use crate::simulation::render_profile;

/// Verdict parse attempts for the LLM judge.
pub const JUDGE_PARSE_RETRIES: usize = 3;

/// How the shared-term count is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapNorm {
    /// |A ∩ B| / |A ∪ B| — symmetric and bounded; the default.
    Jaccard,
    /// |A ∩ B| / |A| with A the reference (human) query's terms.
    ByReference,
}

/// Overlap of stopword-filtered token sets of two queries, in [0, 1].
/// Both sets empty after stopword removal yields 0.
pub fn term_overlap_rate(query_a: &str, query_b: &str, stopwords: &StopwordList) -> f64 {
    term_overlap_rate_with(query_a, query_b, stopwords, OverlapNorm::Jaccard)
}

pub fn term_overlap_rate_with(
    query_a: &str,
    query_b: &str,
    stopwords: &StopwordList,
    norm: OverlapNorm,
) -> f64 {
    let a: std::collections::HashSet<String> =
        stopwords.content_tokens(query_a).into_iter().collect();
    let b: std::collections::HashSet<String> =
        stopwords.content_tokens(query_b).into_iter().collect();
    let intersection = a.intersection(&b).count() as f64;
    let denom = match norm {
        OverlapNorm::Jaccard => a.union(&b).count() as f64,
        OverlapNorm::ByReference => a.len() as f64,
    };
    if denom == 0.0 {
        0.0
    } else {
        intersection / denom
    }
}

/// Fraction of (agent, human) click pairs that picked the same rank.
pub fn click_top1_accuracy(pairs: &[(u32, u32)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits = pairs.iter().filter(|(agent, human)| agent == human).count();
    hits as f64 / pairs.len() as f64
}

const JUDGE_PROMPT: &str = "You are judging a simulated web-search user.

** User profile **
{profile}

** Human query **
{human_query}

** Agent query **
{agent_query}

Does the agent query match the human query's search intent and adhere to the user profile? Answer strictly YES or NO.
";

fn parse_verdict(raw: &str) -> Option<bool> {
    let word: String = raw
        .trim()
        .chars()
        .skip_while(|c| !c.is_alphabetic())
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_ascii_lowercase();
    match word.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Asks the LLM whether `agent_query` is consistent with `human_query` given
/// the profile, expecting a strict YES/NO verdict (leading token, case
/// insensitive). Re-asks up to the retry budget.
pub fn llm_judge_query_consistency(
    llm: &dyn LlmClient,
    profile: &UserProfile,
    human_query: &str,
    agent_query: &str,
) -> Result<bool, EvalError> {
    let prompt = JUDGE_PROMPT
        .replace("{profile}", &render_profile(profile))
        .replace("{human_query}", human_query)
        .replace("{agent_query}", agent_query);
    let mut last_raw = String::new();
    for _ in 0..JUDGE_PARSE_RETRIES {
        let raw = llm_complete(llm, &prompt)?;
        if let Some(verdict) = parse_verdict(&raw) {
            return Ok(verdict);
        }
        last_raw = raw;
    }
    Err(EvalError::UnparseableVerdict {
        attempts: JUDGE_PARSE_RETRIES,
        raw: last_raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Language;
    use crate::backends::SequenceLlm;

    fn en_stopwords() -> StopwordList {
        StopwordList::for_language(Language::English)
    }

    #[test]
    fn identical_queries_overlap_fully() {
        assert_eq!(
            term_overlap_rate("bollywood growth", "bollywood growth", &en_stopwords()),
            1.0
        );
    }

    #[test]
    fn stopwords_and_order_are_ignored() {
        // "of" is a stopword, so the content-term sets are equal.
        assert_eq!(
            term_overlap_rate("bollywood growth", "growth of bollywood", &en_stopwords()),
            1.0
        );
    }

    #[test]
    fn disjoint_vocabulary_overlaps_zero() {
        assert_eq!(
            term_overlap_rate("alpha beta", "gamma delta", &en_stopwords()),
            0.0
        );
    }

    #[test]
    fn all_stopword_queries_overlap_zero() {
        assert_eq!(
            term_overlap_rate("the of a", "the of a", &en_stopwords()),
            0.0
        );
    }

    #[test]
    fn partial_overlap_is_jaccard() {
        // {alpha, beta} vs {beta, gamma}: 1 shared of 3 distinct.
        let rate = term_overlap_rate("alpha beta", "beta gamma", &en_stopwords());
        assert!((rate - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reference_normalization_divides_by_first_query() {
        let rate = term_overlap_rate_with(
            "alpha beta",
            "beta gamma delta",
            &en_stopwords(),
            OverlapNorm::ByReference,
        );
        assert!((rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chinese_overlap_works_on_bigrams() {
        let zh = StopwordList::for_language(Language::Chinese);
        assert_eq!(term_overlap_rate("明天天气", "明天天气", &zh), 1.0);
        assert!(term_overlap_rate("明天天气", "天气预报", &zh) > 0.0);
    }

    #[test]
    fn click_accuracy_counts_exact_matches() {
        assert_eq!(click_top1_accuracy(&[(1, 1), (2, 2)]), 1.0);
        assert_eq!(click_top1_accuracy(&[(1, 1), (2, 3)]), 0.5);
        assert_eq!(click_top1_accuracy(&[(4, 1)]), 0.0);
    }

    fn profile() -> UserProfile {
        UserProfile {
            user_id: "u1".into(),
            age: 30,
            gender: "female".into(),
            education: "bachelor's degree".into(),
            career: "teacher".into(),
            personality: "curious".into(),
            interest: "hiking".into(),
            location: "Tokyo".into(),
            wealth: "middle income".into(),
            language_setting: Language::English,
            provenance: Default::default(),
        }
    }

    #[test]
    fn judge_parses_leading_verdicts() {
        let yes = SequenceLlm::new(["YES"]);
        assert!(llm_judge_query_consistency(&yes, &profile(), "a", "b").unwrap());

        let no = SequenceLlm::new(["no, because the topics differ"]);
        assert!(!llm_judge_query_consistency(&no, &profile(), "a", "b").unwrap());
    }

    #[test]
    fn judge_retries_then_errors_on_noncommittal_output() {
        let llm = SequenceLlm::new(["maybe", "perhaps", "unclear"]);
        match llm_judge_query_consistency(&llm, &profile(), "a", "b") {
            Err(EvalError::UnparseableVerdict { attempts, raw }) => {
                assert_eq!(attempts, 3);
                assert_eq!(raw, "unclear");
            }
            other => panic!("expected UnparseableVerdict, got {other:?}"),
        }
    }
}
