//! BM25 lexical scoring, shared by the ranker and the corpus-backed mock
//! search client.
//!
//! IDF uses the +1 variant, `ln((N - df + 0.5) / (df + 0.5) + 1)`, which is
//! non-negative for any document frequency.

use super::text::tokenize;
use std::collections::HashMap;

/// Free parameters of the BM25 formula.
#[derive(Debug, Clone, Copy)]
pub struct Bm25Params {
    /// Term-frequency saturation.
    pub k1: f64,
    /// Length normalization.
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// A tokenized document collection with the statistics BM25 needs:
/// per-document term frequencies, document frequencies, and average length.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    doc_terms: Vec<HashMap<String, usize>>,
    doc_lens: Vec<usize>,
    doc_freq: HashMap<String, usize>,
    avg_doc_len: f64,
}

impl Bm25Index {
    /// Builds the index from raw document texts.
    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Self {
        let tokenized: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t.as_ref())).collect();
        Self::from_tokens(tokenized)
    }

    pub fn from_tokens(docs: Vec<Vec<String>>) -> Self {
        let mut doc_terms = Vec::with_capacity(docs.len());
        let mut doc_lens = Vec::with_capacity(docs.len());
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for tokens in docs {
            doc_lens.push(tokens.len());
            let mut counts: HashMap<String, usize> = HashMap::new();
            for t in tokens {
                *counts.entry(t).or_insert(0) += 1;
            }
            for term in counts.keys() {
                *doc_freq.entry(term.clone()).or_insert(0) += 1;
            }
            doc_terms.push(counts);
        }
        let total_len: usize = doc_lens.iter().sum();
        let avg_doc_len = if doc_lens.is_empty() {
            0.0
        } else {
            total_len as f64 / doc_lens.len() as f64
        };
        Bm25Index {
            doc_terms,
            doc_lens,
            doc_freq,
            avg_doc_len,
        }
    }

    pub fn len(&self) -> usize {
        self.doc_terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_terms.is_empty()
    }

    /// Scores every document against `query`. Returns one score per document,
    /// in document order. All-empty documents score zero everywhere.
    pub fn score(&self, query: &str, params: &Bm25Params) -> Vec<f64> {
        self.score_tokens(&tokenize(query), params)
    }

    pub fn score_tokens(&self, query_tokens: &[String], params: &Bm25Params) -> Vec<f64> {
        let n_docs = self.doc_terms.len();
        let mut scores = vec![0.0; n_docs];
        if n_docs == 0 || self.avg_doc_len == 0.0 {
            return scores;
        }

        // Distinct query terms in first-appearance order.
        let mut seen = std::collections::HashSet::new();
        let terms: Vec<&String> = query_tokens.iter().filter(|t| seen.insert(*t)).collect();

        for term in terms {
            let df = match self.doc_freq.get(term.as_str()) {
                Some(&df) => df as f64,
                None => continue,
            };
            let idf = ((n_docs as f64 - df + 0.5) / (df + 0.5) + 1.0).ln();
            for (i, counts) in self.doc_terms.iter().enumerate() {
                let tf = *counts.get(term.as_str()).unwrap_or(&0) as f64;
                if tf == 0.0 {
                    continue;
                }
                let norm = 1.0 - params.b + params.b * self.doc_lens[i] as f64 / self.avg_doc_len;
                scores[i] += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
            }
        }
        scores
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_three_document_example() {
        // Corpus: "cat hat", "dog", "cat cat dog"; query "cat"; k1=1.2, b=0.75.
        // Independent arithmetic: df(cat)=2, N=3, idf=ln((3-2+0.5)/(2+0.5)+1)=ln(1.6),
        // avgdl=2.
        let index = Bm25Index::from_texts(&["cat hat", "dog", "cat cat dog"]);
        let scores = index.score("cat", &Bm25Params::default());

        let idf = (1.6f64).ln();
        // doc0: tf=1, len=2: 1*2.2 / (1 + 1.2*(0.25 + 0.75*2/2)) = 2.2/2.2 = 1.0
        let expected0 = idf * 1.0;
        // doc1: tf=0
        let expected1 = 0.0;
        // doc2: tf=2, len=3: 2*2.2 / (2 + 1.2*(0.25 + 0.75*3/2)) = 4.4/3.65
        let expected2 = idf * (4.4 / 3.65);

        assert!(
            (scores[0] - expected0).abs() < 1e-9,
            "{} vs {expected0}",
            scores[0]
        );
        assert!((scores[1] - expected1).abs() < 1e-9);
        assert!(
            (scores[2] - expected2).abs() < 1e-9,
            "{} vs {expected2}",
            scores[2]
        );
    }

    #[test]
    fn no_term_overlap_scores_zero() {
        let index = Bm25Index::from_texts(&["alpha beta", "gamma delta"]);
        let scores = index.score("omega", &Bm25Params::default());
        assert_eq!(scores, vec![0.0, 0.0]);
    }

    #[test]
    fn single_matching_candidate_scores_positive() {
        let index = Bm25Index::from_texts(&["rust programming guide"]);
        let scores = index.score("rust", &Bm25Params::default());
        assert!(scores[0] > 0.0);
    }

    #[test]
    fn all_empty_documents_score_zero() {
        let index = Bm25Index::from_texts(&["", "", ""]);
        let scores = index.score("anything", &Bm25Params::default());
        assert_eq!(scores, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn repeated_query_terms_count_once() {
        let index = Bm25Index::from_texts(&["cat hat", "dog"]);
        let once = index.score("cat", &Bm25Params::default());
        let twice = index.score("cat cat", &Bm25Params::default());
        assert_eq!(once, twice);
    }
}
