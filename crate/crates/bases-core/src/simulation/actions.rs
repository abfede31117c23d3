//! Strict parsing of agent outputs into actions.
//!
//! Query outputs must contain `Search[...]` or `Finish[...]` (case
//! insensitive; `Search` wins when both appear). Click outputs are resolved
//! by the first `Title <n>` mention, falling back to the first standalone
//! in-range integer. Anything else is a parse error that the engine answers
//! by re-asking; there is deliberately no silent fallback click.

use thiserror::Error;

/// The three things an agent can do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentAction {
    /// Issue a search query (non-empty after trimming).
    Search(String),
    /// End the session.
    Finish,
    /// Click the result at `rank`, keeping the raw output as the reason.
    Click { rank: u32, reason: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ActionParseError {
    #[error("no Search[...] or Finish[...] action found in output: {0:?}")]
    NoQueryAction(String),
    #[error("no clickable title number in 1..={n_results} found in output: {raw:?}")]
    NoClickTarget { n_results: usize, raw: String },
}

/// Finds `pattern` (ASCII, case-insensitive) in `haystack`, returning the
/// byte offset just past the match.
fn find_ci(haystack: &str, pattern: &str, from: usize) -> Option<usize> {
    let h = haystack.as_bytes();
    let p = pattern.as_bytes();
    if from + p.len() > h.len() {
        return None;
    }
    (from..=h.len() - p.len())
        .find(|&i| h[i..i + p.len()].eq_ignore_ascii_case(p))
        .map(|i| i + p.len())
}

fn bracket_content(raw: &str, open: usize) -> Option<&str> {
    let close = raw[open..].find(']')? + open;
    Some(&raw[open..close])
}

/// Parses the output of a query prompt. The first `Search[...]` with
/// non-empty bracket content wins; otherwise any `Finish[...]` means finish.
pub fn parse_query_action(raw: &str) -> Result<AgentAction, ActionParseError> {
    let mut at = 0;
    while let Some(open) = find_ci(raw, "search[", at) {
        match bracket_content(raw, open) {
            Some(content) if !content.trim().is_empty() => {
                return Ok(AgentAction::Search(content.trim().to_string()));
            }
            _ => at = open,
        }
    }
    let mut at = 0;
    while let Some(after) = find_ci(raw, "finish", at) {
        // Accept `Finish[...]` as well as the template's `Finish [Finish]`.
        if raw[after..].trim_start().starts_with('[') {
            return Ok(AgentAction::Finish);
        }
        at = after;
    }
    Err(ActionParseError::NoQueryAction(preview(raw)))
}

/// Parses the output of a click prompt over `n_results` titles.
pub fn parse_click_action(raw: &str, n_results: usize) -> Result<AgentAction, ActionParseError> {
    debug_assert!((1..=10).contains(&n_results));
    let in_range = |n: u32| n >= 1 && n as usize <= n_results;

    // First preference: an explicit `Title <n>` mention.
    let mut at = 0;
    while let Some(after) = find_ci(raw, "title", at) {
        let rest = &raw[after..];
        let skipped = rest.len() - rest.trim_start().len();
        if let Some((n, _)) = leading_integer(rest.trim_start())
            && in_range(n)
        {
            return Ok(AgentAction::Click {
                rank: n,
                reason: raw.trim().to_string(),
            });
        }
        at = after + skipped;
    }

    // Fallback: the first standalone integer within range.
    for (n, _) in standalone_integers(raw) {
        if in_range(n) {
            return Ok(AgentAction::Click {
                rank: n,
                reason: raw.trim().to_string(),
            });
        }
    }
    Err(ActionParseError::NoClickTarget {
        n_results,
        raw: preview(raw),
    })
}

fn leading_integer(s: &str) -> Option<(u32, usize)> {
    let digits: String = s.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    digits.parse().ok().map(|n| (n, digits.len()))
}

/// Maximal ASCII digit runs that are not embedded in a longer alphanumeric
/// token (so the `3` of `mp3` does not count).
fn standalone_integers(raw: &str) -> Vec<(u32, usize)> {
    let chars: Vec<char> = raw.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let before_ok = start == 0 || !chars[start - 1].is_alphanumeric();
            let after_ok = i == chars.len() || !chars[i].is_alphanumeric();
            if before_ok && after_ok {
                let digits: String = chars[start..i].iter().collect();
                if let Ok(n) = digits.parse() {
                    out.push((n, start));
                }
            }
        } else {
            i += 1;
        }
    }
    out
}

fn preview(raw: &str) -> String {
    const MAX: usize = 120;
    let trimmed = raw.trim();
    if trimmed.chars().count() <= MAX {
        trimmed.to_string()
    } else {
        let cut: String = trimmed.chars().take(MAX).collect();
        format!("{cut}…")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_template_examples() {
        assert_eq!(
            parse_query_action("Search[pseudocyesis information]").unwrap(),
            AgentAction::Search("pseudocyesis information".into())
        );
        assert_eq!(
            parse_query_action("Finish[finish]").unwrap(),
            AgentAction::Finish
        );
        assert_eq!(
            parse_query_action("Finish [Finish]").unwrap(),
            AgentAction::Finish
        );
    }

    #[test]
    fn search_wins_when_both_actions_appear() {
        assert_eq!(
            parse_query_action("I could Finish[finish] but instead Search[cats]").unwrap(),
            AgentAction::Search("cats".into())
        );
    }

    #[test]
    fn matching_is_case_insensitive() {
        assert_eq!(
            parse_query_action("SEARCH[Mixed Case Query]").unwrap(),
            AgentAction::Search("Mixed Case Query".into())
        );
        assert_eq!(
            parse_query_action("FINISH[done]").unwrap(),
            AgentAction::Finish
        );
    }

    #[test]
    fn empty_search_brackets_fall_through_to_finish() {
        assert_eq!(
            parse_query_action("Search[ ] Finish[finish]").unwrap(),
            AgentAction::Finish
        );
    }

    #[test]
    fn prose_without_actions_is_a_parse_error() {
        assert!(matches!(
            parse_query_action("I think I'm done."),
            Err(ActionParseError::NoQueryAction(_))
        ));
        assert!(parse_query_action("finish without brackets").is_err());
    }

    #[test]
    fn finish_prose_before_the_action_still_finishes() {
        assert_eq!(
            parse_query_action("Time to finish now. Finish[finish]").unwrap(),
            AgentAction::Finish
        );
    }

    #[test]
    fn bare_number_clicks() {
        assert_eq!(
            parse_click_action("7", 10).unwrap(),
            AgentAction::Click {
                rank: 7,
                reason: "7".into()
            }
        );
    }

    #[test]
    fn chinese_reason_then_title_number_clicks() {
        let raw = "我会选择Title 3: 徒步路线推荐, 因为与兴趣相关";
        match parse_click_action(raw, 10).unwrap() {
            AgentAction::Click { rank, reason } => {
                assert_eq!(rank, 3);
                assert_eq!(reason, raw);
            }
            other => panic!("unexpected action {other:?}"),
        }
    }

    #[test]
    fn out_of_range_numbers_are_skipped_until_an_in_range_one() {
        assert_eq!(
            parse_click_action("2024 news say pick 3", 10).unwrap(),
            AgentAction::Click {
                rank: 3,
                reason: "2024 news say pick 3".into()
            }
        );
        // `Title 11` is out of range but a later `Title 2` applies.
        assert_eq!(
            parse_click_action("Title 11 is wrong, Title 2 fits", 10).unwrap(),
            AgentAction::Click {
                rank: 2,
                reason: "Title 11 is wrong, Title 2 fits".into()
            }
        );
    }

    #[test]
    fn words_and_embedded_digits_do_not_click() {
        assert!(matches!(
            parse_click_action("eleven", 10),
            Err(ActionParseError::NoClickTarget { n_results: 10, .. })
        ));
        assert!(parse_click_action("mp3 players", 10).is_err());
        assert!(parse_click_action("17", 5).is_err());
    }

    #[test]
    fn title_mention_beats_earlier_standalone_integer() {
        assert_eq!(
            parse_click_action("option 4? no - Title 2", 10).unwrap(),
            AgentAction::Click {
                rank: 2,
                reason: "option 4? no - Title 2".into()
            }
        );
    }
}
