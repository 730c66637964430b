//! Shallow n-gram features for a (query, filler) mention pair.
//!
//! The query mention is replaced by `ARG1`, the filler mention by `ARG2`.
//! Every emitted token carries a direction mark: `>` when the filler follows
//! the query, `<` when it precedes it. A feature is rendered as
//! `GROUP#tok#tok...`, e.g. `BETWEEN_NGRAM#ARG1>#,>`.
//!
//! * `BETWEEN_NGRAM`: 1- to 3-grams over `first-arg, between..., second-arg`.
//! * `SKIP_NGRAM`: 3- and 4-token windows over the same sequence with the
//!   interior tokens blanked, so `native and the first` renders as
//!   `native>###first>`.
//! * `OUTSIDE_NGRAM`: 1- to 3-grams over up to three tokens left of the
//!   leftmost argument plus its placeholder, and over the other placeholder
//!   plus up to three tokens to its right; each n-gram contains the
//!   placeholder.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::model::{Candidate, Sentence, TokenSpan};
use crate::scalar::Scalar;

const OUTSIDE_WINDOW: usize = 3;
const MAX_NGRAM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureGroup {
    Between,
    Outside,
    Skip,
}

impl FeatureGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Between => "BETWEEN_NGRAM",
            FeatureGroup::Outside => "OUTSIDE_NGRAM",
            FeatureGroup::Skip => "SKIP_NGRAM",
        }
    }
}

impl FromStr for FeatureGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "BETWEEN_NGRAM" => Ok(FeatureGroup::Between),
            "OUTSIDE_NGRAM" => Ok(FeatureGroup::Outside),
            "SKIP_NGRAM" => Ok(FeatureGroup::Skip),
            other => Err(format!("unknown feature group `{other}`")),
        }
    }
}

/// Structured form of a feature string. Blank tokens are skip-gram holes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Feature {
    pub group: FeatureGroup,
    pub tokens: Vec<String>,
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.group.as_str())?;
        for t in &self.tokens {
            write!(f, "#{t}")?;
        }
        Ok(())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('#');
        let group: FeatureGroup = parts.next().unwrap_or_default().parse()?;
        let tokens: Vec<String> = parts.map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(format!("feature `{s}` has no tokens"));
        }
        let marked = |t: &String| t.ends_with('>') || t.ends_with('<');
        let ok = match group {
            FeatureGroup::Skip => {
                tokens.len() >= 3
                    && marked(&tokens[0])
                    && marked(&tokens[tokens.len() - 1])
                    && tokens[1..tokens.len() - 1].iter().all(String::is_empty)
            }
            _ => tokens.iter().all(marked),
        };
        if ok {
            Ok(Feature { group, tokens })
        } else {
            Err(format!("feature `{s}` does not match the feature grammar"))
        }
    }
}

/// Raw per-sentence feature counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureCounts(pub BTreeMap<String, u32>);

impl FeatureCounts {
    pub fn add(&mut self, feature: String) {
        *self.0.entry(feature).or_insert(0) += 1;
    }

    pub fn get(&self, feature: &str) -> u32 {
        self.0.get(feature).copied().unwrap_or(0)
    }

    pub fn contains(&self, feature: &str) -> bool {
        self.0.contains_key(feature)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.values().map(|&c| c as u64).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Counts of one group, with multiplicity.
    pub fn group_total(&self, group: FeatureGroup) -> u64 {
        let prefix = format!("{}#", group.as_str());
        self.0
            .iter()
            .filter(|(k, _)| k.starts_with(&prefix))
            .map(|(_, &v)| v as u64)
            .sum()
    }
}

/// Sparse real-valued vector keyed by feature string.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector<T>(pub BTreeMap<String, T>);

impl<T> Default for SparseVector<T> {
    fn default() -> Self {
        SparseVector(BTreeMap::new())
    }
}

impl<T: Scalar> SparseVector<T> {
    /// Divides integer counts by their maximum so the largest weight is 1.
    pub fn max_normalized<'a>(counts: impl IntoIterator<Item = (&'a str, u64)>) -> Self {
        let counts: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        let Some(max) = counts.iter().map(|&(_, c)| c).max() else {
            return SparseVector::default();
        };
        let max = T::from_count(max);
        SparseVector(
            counts
                .into_iter()
                .map(|(k, c)| (k.to_string(), T::from_count(c) / max))
                .collect(),
        )
    }

    pub fn from_counts(counts: &FeatureCounts) -> Self {
        Self::max_normalized(counts.iter().map(|(k, c)| (k, c as u64)))
    }

    pub fn max_weight(&self) -> Option<T> {
        self.0.values().copied().reduce(T::max)
    }

    pub fn get(&self, feature: &str) -> T {
        self.0.get(feature).copied().unwrap_or_else(T::zero)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, T)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Query,
    Filler,
}

/// Features of a candidate mention pair.
pub fn extract_features(candidate: &Candidate<'_>) -> FeatureCounts {
    extract_span_features(candidate.sentence, candidate.query_span, candidate.filler_span)
}

/// Features for a query span and a filler span of one sentence.
pub fn extract_span_features(sentence: &Sentence, query_span: TokenSpan, filler_span: TokenSpan) -> FeatureCounts {
    debug_assert!(!query_span.overlaps(&filler_span));
    let mark = if filler_span.start > query_span.start { '>' } else { '<' };
    let (left, right, left_role, right_role) = if query_span.start < filler_span.start {
        (query_span, filler_span, Role::Query, Role::Filler)
    } else {
        (filler_span, query_span, Role::Filler, Role::Query)
    };
    let tok = |s: &str| format!("{s}{mark}");
    let placeholder = |r: Role| match r {
        Role::Query => tok("ARG1"),
        Role::Filler => tok("ARG2"),
    };
    let words = &sentence.tokens;

    let mut between = vec![placeholder(left_role)];
    between.extend(words[left.end..right.start].iter().map(|t| tok(&t.text)));
    between.push(placeholder(right_role));

    let mut counts = FeatureCounts::default();
    let emit = |counts: &mut FeatureCounts, group: FeatureGroup, toks: &[String]| {
        let mut s = String::from(group.as_str());
        for t in toks {
            s.push('#');
            s.push_str(t);
        }
        counts.add(s);
    };

    for n in 1..=MAX_NGRAM {
        for w in between.windows(n) {
            emit(&mut counts, FeatureGroup::Between, w);
        }
    }

    for n in [3, 4] {
        for w in between.windows(n) {
            let mut skip = vec![String::new(); n];
            skip[0] = w[0].clone();
            skip[n - 1] = w[n - 1].clone();
            emit(&mut counts, FeatureGroup::Skip, &skip);
        }
    }

    // left context ends at the leftmost placeholder
    let left_from = left.start.saturating_sub(OUTSIDE_WINDOW);
    let mut left_seq: Vec<String> = words[left_from..left.start].iter().map(|t| tok(&t.text)).collect();
    left_seq.push(placeholder(left_role));
    for n in 1..=MAX_NGRAM.min(left_seq.len()) {
        emit(&mut counts, FeatureGroup::Outside, &left_seq[left_seq.len() - n..]);
    }

    // right context starts at the rightmost placeholder
    let right_to = (right.end + OUTSIDE_WINDOW).min(words.len());
    let mut right_seq = vec![placeholder(right_role)];
    right_seq.extend(words[right.end..right_to].iter().map(|t| tok(&t.text)));
    for n in 1..=MAX_NGRAM.min(right_seq.len()) {
        emit(&mut counts, FeatureGroup::Outside, &right_seq[..n]);
    }

    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Token;

    pub(crate) fn sentence(words: &str) -> Sentence {
        let mut pos = 0;
        let tokens = words
            .split(' ')
            .map(|w| {
                let t = Token {
                    text: w.into(),
                    begin: pos,
                    end: pos + w.len(),
                };
                pos += w.len() + 1;
                t
            })
            .collect();
        Sentence::new("D", tokens, vec![]).unwrap()
    }

    const GADAHN_SENTENCE: &str = "One Pakistani intelligence official said he is Adam Gadahn , a California native and the first U.S. citizen to be charged with treason in 52 years .";

    #[test]
    fn gadahn_sentence_features() {
        let s = sentence(GADAHN_SENTENCE);
        let f = extract_span_features(&s, TokenSpan::new(7, 9), TokenSpan::new(16, 17));
        assert!(f.contains("BETWEEN_NGRAM#ARG1>#,>"));
        assert!(f.contains("OUTSIDE_NGRAM#ARG2>#citizen>#to>"));
        assert!(f.contains("SKIP_NGRAM#native>###first>"));
        assert!(f.contains("SKIP_NGRAM#ARG1>##a>"));
        assert!(!f.contains("OUTSIDE_NGRAM#said>#he>#is>#ARG1>"));
        assert!(f.contains("OUTSIDE_NGRAM#he>#is>#ARG1>"));
        assert!(f.contains("OUTSIDE_NGRAM#ARG1>"));
    }

    #[test]
    fn adjacent_arguments() {
        let s = sentence("x ARGA ARGB y");
        let f = extract_span_features(&s, TokenSpan::new(1, 2), TokenSpan::new(2, 3));
        let between: Vec<&str> = f.iter().map(|(k, _)| k).filter(|k| k.starts_with("BETWEEN")).collect();
        assert_eq!(
            between,
            [
                "BETWEEN_NGRAM#ARG1>",
                "BETWEEN_NGRAM#ARG1>#ARG2>",
                "BETWEEN_NGRAM#ARG2>"
            ]
        );
        assert_eq!(f.group_total(FeatureGroup::Skip), 0);
    }

    #[test]
    fn filler_first_marks() {
        let s = sentence("Berlin is where Anna was born");
        let f = extract_span_features(&s, TokenSpan::new(3, 4), TokenSpan::new(0, 1));
        assert!(f.contains("BETWEEN_NGRAM#ARG2<#is<"));
        assert!(f.contains("OUTSIDE_NGRAM#ARG1<#was<#born<"));
        assert!(f.iter().all(|(k, _)| !k.contains('>')));
    }

    #[test]
    fn counts_accumulate() {
        let s = sentence("A and and B");
        let f = extract_span_features(&s, TokenSpan::new(0, 1), TokenSpan::new(3, 4));
        assert_eq!(f.get("BETWEEN_NGRAM#and>"), 2);
    }

    #[test]
    fn feature_grammar_roundtrip() {
        for s in [
            "BETWEEN_NGRAM#ARG1>#,>",
            "OUTSIDE_NGRAM#ARG2>#citizen>#to>",
            "SKIP_NGRAM#native>###first>",
        ] {
            let f: Feature = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!("BETWEEN_NGRAM#ARG1".parse::<Feature>().is_err());
        assert!("OTHER#a>".parse::<Feature>().is_err());
        assert!("SKIP_NGRAM#a>#b>#c>".parse::<Feature>().is_err());
    }

    #[test]
    fn max_normalization() {
        let v: SparseVector<f64> = SparseVector::max_normalized([("f1", 2), ("f2", 1)]);
        assert_eq!(v.get("f1"), 1.0);
        assert_eq!(v.get("f2"), 0.5);
        let v: SparseVector<f32> = SparseVector::max_normalized([("f1", 0u64)]);
        assert!(v.is_empty());
    }
}
