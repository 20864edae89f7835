use std::collections::{BTreeMap, BTreeSet};

use super::{RetrievalError, Segment};

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "is", "it", "of", "on", "or", "that",
    "the", "this", "to", "was", "were", "with",
];

/// Lowercased alphanumeric tokens with stopwords removed. When every token
/// is a stopword the stopwords are kept, so short inputs still score.
pub fn tokenize(text: &str) -> Vec<String> {
    let all = raw_tokens(text);
    let kept: Vec<String> = all.iter().filter(|t| !is_stopword(t)).cloned().collect();
    if kept.is_empty() {
        all
    } else {
        kept
    }
}

fn raw_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn is_stopword(t: &str) -> bool {
    STOPWORDS.contains(&t)
}

fn term_counts(tokens: &[String]) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

pub trait RelevanceScorer {
    /// Relevance of `segment` to `query`, in [0, 1].
    fn score(&self, query: &str, segment: &str) -> Result<f64, RetrievalError>;
}

/// Fraction of the query's idf-weighted term mass that the segment covers:
/// Σ min(tf_q, tf_s)·idf / Σ tf_q·idf.
#[derive(Debug, Clone, Default)]
pub struct LexicalScorer {
    doc_freq: BTreeMap<String, usize>,
    n_docs: usize,
}

impl LexicalScorer {
    pub fn new() -> Self {
        LexicalScorer::default()
    }

    /// Weights terms by inverse document frequency over `corpus`. Query terms
    /// that never occur in the corpus carry no weight, unless none occur.
    pub fn with_corpus<'a, I: IntoIterator<Item = &'a str>>(corpus: I) -> Self {
        let mut doc_freq = BTreeMap::new();
        let mut n_docs = 0;
        for doc in corpus {
            n_docs += 1;
            let uniq: BTreeSet<String> = tokenize(doc).into_iter().collect();
            for t in uniq {
                *doc_freq.entry(t).or_insert(0) += 1;
            }
        }
        LexicalScorer { doc_freq, n_docs }
    }

    fn idf(&self, term: &str) -> f64 {
        if self.n_docs == 0 {
            return 1.0;
        }
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        ((self.n_docs as f64 + 1.0) / (df + 1.0)).ln() + 1.0
    }
}

impl RelevanceScorer for LexicalScorer {
    fn score(&self, query: &str, segment: &str) -> Result<f64, RetrievalError> {
        let q = tokenize(query);
        // a stopword-only query is matched against the segment's stopwords too
        let s = if q.iter().all(|t| is_stopword(t)) {
            raw_tokens(segment)
        } else {
            tokenize(segment)
        };
        if q.is_empty() || s.is_empty() {
            return Err(RetrievalError::EmptyInput);
        }
        let qc = term_counts(&q);
        let sc = term_counts(&s);
        let any_known = self.n_docs > 0 && qc.keys().any(|t| self.doc_freq.contains_key(*t));
        let mut num = 0.0;
        let mut den = 0.0;
        for (term, &tq) in &qc {
            if any_known && !self.doc_freq.contains_key(*term) {
                continue;
            }
            let w = self.idf(term);
            den += tq as f64 * w;
            num += tq.min(sc.get(term).copied().unwrap_or(0)) as f64 * w;
        }
        Ok(if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 0.0 })
    }
}

/// Splits a document into labelled sections at Markdown headings or numbered
/// section titles; falls back to blank-line paragraphs.
pub fn segment_document(text: &str) -> Vec<Segment> {
    let heading = regex::Regex::new(r"^(#{1,6}\s+\S.*|\d+(\.\d+)*\.?\s+[A-Z][^.]{0,80})$").expect("static regex");
    let mut out: Vec<Segment> = Vec::new();
    let mut label: Option<String> = None;
    let mut body = String::new();
    let mut saw_heading = false;
    let flush = |label: &Option<String>, body: &mut String, out: &mut Vec<Segment>| {
        let t = body.trim();
        if !t.is_empty() {
            let n = out.len() + 1;
            out.push(Segment {
                label: label.clone().unwrap_or_else(|| format!("section {n}")),
                text: t.to_string(),
            });
        }
        body.clear();
    };
    for line in text.lines() {
        let trimmed = line.trim();
        if heading.is_match(trimmed) {
            saw_heading = true;
            flush(&label, &mut body, &mut out);
            label = Some(trimmed.trim_start_matches('#').trim().to_string());
            continue;
        }
        body.push_str(line);
        body.push('\n');
    }
    flush(&label, &mut body, &mut out);
    if saw_heading {
        return out;
    }
    text.split("\n\n")
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .enumerate()
        .map(|(i, p)| Segment {
            label: format!("paragraph {}", i + 1),
            text: p.to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_disjoint() {
        let s = LexicalScorer::new();
        assert_eq!(s.score("spalart allmaras turbulence", "spalart allmaras turbulence").unwrap(), 1.0);
        assert_eq!(s.score("Spalart-Allmaras, turbulence!", "spalart allmaras turbulence").unwrap(), 1.0);
        assert_eq!(s.score("boundary conditions", "mesh generation tooling").unwrap(), 0.0);
    }

    #[test]
    fn empty_input() {
        let s = LexicalScorer::new();
        assert_eq!(s.score("", "x"), Err(RetrievalError::EmptyInput));
        assert_eq!(s.score("x", " ,.; "), Err(RetrievalError::EmptyInput));
    }

    #[test]
    fn stopword_only_query_still_scores() {
        assert_eq!(LexicalScorer::new().score("the", "the end").unwrap(), 1.0);
    }

    #[test]
    fn segmentation_by_heading() {
        let doc = "# Geometry\nA NACA0012 airfoil.\n\n# Solver\nsimpleFoam with SA.\n";
        let segs = segment_document(doc);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].label, "Geometry");
        assert_eq!(segs[1].text, "simpleFoam with SA.");
        let segs = segment_document("2.1 Numerical Setup\nfoo\n3 Results\nbar");
        assert_eq!(segs.iter().map(|s| s.label.as_str()).collect::<Vec<_>>(), ["2.1 Numerical Setup", "3 Results"]);
    }

    #[test]
    fn segmentation_by_paragraph() {
        let segs = segment_document("first para\nline two\n\nsecond para\n\n\n");
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].label, "paragraph 1");
    }
}
