//! Unicode-aware tokenization and stopword handling shared by BM25 scoring
//! and the query-overlap metric.
//!
//! Non-CJK text is split on non-alphanumeric characters and lowercased.
//! Contiguous CJK runs are expanded into character bigrams (a single
//! character when the run has length 1), which keeps the tokenizer
//! dependency-free while giving BM25 and overlap something useful to match
//! on for Chinese queries.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use crate::Language;

const EN_STOPWORDS: &str = include_str!("../../../../data/stopwords/en.txt");
const ZH_STOPWORDS: &str = include_str!("../../../../data/stopwords/zh.txt");

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF      // CJK extension A
        | 0x4E00..=0x9FFF    // CJK unified ideographs
        | 0xF900..=0xFAFF    // CJK compatibility ideographs
        | 0x20000..=0x2FA1F  // CJK extensions B..F
        | 0x3040..=0x30FF    // hiragana + katakana
        | 0xAC00..=0xD7AF    // hangul syllables
    )
}

/// Tokenizes `text` into lowercase word tokens and CJK character bigrams.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut cjk_run: Vec<char> = Vec::new();

    let flush_word = |word: &mut String, tokens: &mut Vec<String>| {
        if !word.is_empty() {
            tokens.push(std::mem::take(word));
        }
    };
    let flush_cjk = |run: &mut Vec<char>, tokens: &mut Vec<String>| {
        match run.len() {
            0 => {}
            1 => tokens.push(run[0].to_string()),
            n => {
                for i in 0..n - 1 {
                    let mut bigram = String::new();
                    bigram.push(run[i]);
                    bigram.push(run[i + 1]);
                    tokens.push(bigram);
                }
            }
        }
        run.clear();
    };

    for c in text.chars() {
        if is_cjk(c) {
            flush_word(&mut word, &mut tokens);
            cjk_run.push(c);
        } else if c.is_alphanumeric() {
            flush_cjk(&mut cjk_run, &mut tokens);
            word.extend(c.to_lowercase());
        } else {
            flush_word(&mut word, &mut tokens);
            flush_cjk(&mut cjk_run, &mut tokens);
        }
    }
    flush_word(&mut word, &mut tokens);
    flush_cjk(&mut cjk_run, &mut tokens);
    tokens
}

/// A set of tokens removed before computing query overlap.
#[derive(Debug, Clone)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    /// The bundled list for a language setting.
    pub fn for_language(language: Language) -> Self {
        let raw = match language {
            Language::English => EN_STOPWORDS,
            Language::Chinese => ZH_STOPWORDS,
        };
        Self::from_lines(raw.lines())
    }

    /// Loads a custom one-word-per-line list, overriding the bundled one.
    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut words = HashSet::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line?;
            let w = line.trim();
            if !w.is_empty() && !w.starts_with('#') {
                words.insert(w.to_lowercase());
            }
        }
        Ok(Self { words })
    }

    pub fn empty() -> Self {
        Self {
            words: HashSet::new(),
        }
    }

    fn from_lines<'a>(lines: impl Iterator<Item = &'a str>) -> Self {
        let words = lines
            .map(str::trim)
            .filter(|w| !w.is_empty() && !w.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Tokenizes `text` and drops stopword tokens.
    pub fn content_tokens(&self, text: &str) -> Vec<String> {
        tokenize(text)
            .into_iter()
            .filter(|t| !self.contains(t))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_lowercases_english() {
        assert_eq!(
            tokenize("Bollywood growth, 2024!"),
            vec!["bollywood", "growth", "2024"]
        );
    }

    #[test]
    fn cjk_runs_become_bigrams() {
        assert_eq!(tokenize("明天天气"), vec!["明天", "天天", "天气"]);
        assert_eq!(tokenize("天"), vec!["天"]);
    }

    #[test]
    fn mixed_script_keeps_boundaries() {
        assert_eq!(
            tokenize("rust编程入门"),
            vec!["rust", "编程", "程入", "入门"]
        );
        assert_eq!(tokenize("3个apples"), vec!["3", "个", "apples"]);
    }

    #[test]
    fn empty_and_punctuation_only_yield_nothing() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("!!! --- ???").is_empty());
    }

    #[test]
    fn bundled_lists_have_expected_scale() {
        let en = StopwordList::for_language(Language::English);
        let zh = StopwordList::for_language(Language::Chinese);
        assert!(en.len() >= 150, "en list has {} words", en.len());
        assert!(zh.len() >= 100, "zh list has {} words", zh.len());
        assert!(en.contains("of"));
        assert!(zh.contains("的"));
    }

    #[test]
    fn content_tokens_filter_stopwords() {
        let en = StopwordList::for_language(Language::English);
        assert_eq!(
            en.content_tokens("growth of bollywood"),
            vec!["growth", "bollywood"]
        );
    }
}
