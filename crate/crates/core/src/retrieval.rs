//! Boolean phrase retrieval over an in-memory inverted index.

use std::collections::{BTreeMap, BTreeSet};

use crate::alias::{Expansion, ExpansionSet};
use crate::model::{Document, Query};
use crate::text::{contains_phrase, phrase_tokens, CaseMode};

pub const DEFAULT_RETRIEVAL_LIMIT: usize = 100;

/// Token -> sorted document indices (positions in the corpus slice the index
/// was built from).
#[derive(Debug, Clone, Default)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<usize>>,
    doc_count: usize,
    mode: CaseMode,
}

impl InvertedIndex {
    pub fn build(corpus: &[Document], mode: CaseMode) -> Self {
        let mut postings: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, doc) in corpus.iter().enumerate() {
            let tokens: BTreeSet<_> = doc
                .sentences
                .iter()
                .flat_map(|s| s.tokens.iter())
                .map(|t| mode.key(&t.text).into_owned())
                .collect();
            for t in tokens {
                postings.entry(t).or_default().push(i);
            }
        }
        InvertedIndex {
            postings,
            doc_count: corpus.len(),
            mode,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn mode(&self) -> CaseMode {
        self.mode
    }

    pub fn postings(&self, token: &str) -> &[usize] {
        self.postings
            .get(self.mode.key(token).as_ref())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn doc_freq(&self, token: &str) -> usize {
        self.postings(token).len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    /// Documents containing `phrase` as a contiguous token sequence within a
    /// sentence.
    pub fn phrase_docs<S: AsRef<str>>(&self, corpus: &[Document], phrase: &[S]) -> BTreeSet<usize> {
        let Some(first) = phrase.first() else {
            return BTreeSet::new();
        };
        let mut candidates: BTreeSet<usize> = self.postings(first.as_ref()).iter().copied().collect();
        for tok in &phrase[1..] {
            let docs = self.postings(tok.as_ref());
            candidates.retain(|d| docs.binary_search(d).is_ok());
            if candidates.is_empty() {
                break;
            }
        }
        if phrase.len() == 1 {
            return candidates;
        }
        candidates
            .into_iter()
            .filter(|&d| {
                corpus[d]
                    .sentences
                    .iter()
                    .any(|s| contains_phrase(&s.tokens, phrase, self.mode))
            })
            .collect()
    }

    pub fn phrase_doc_freq<S: AsRef<str>>(&self, corpus: &[Document], phrase: &[S]) -> usize {
        self.phrase_docs(corpus, phrase).len()
    }
}

/// Document-level pointwise mutual information, base 2.
pub fn pmi(doc_count: usize, df_query: usize, df_expansion: usize, df_both: usize) -> f64 {
    let num = doc_count as f64 * df_both as f64;
    let den = df_expansion as f64 * df_query as f64;
    (num / den).log2()
}

/// The retrieval-eligible expansion with the highest PMI with the query name.
/// Ties go to the lexicographically smallest text.
pub fn select_expansion_by_pmi<'e>(
    query: &Query,
    expansions: &'e ExpansionSet,
    index: &InvertedIndex,
    corpus: &[Document],
) -> Option<&'e Expansion> {
    let query_docs = index.phrase_docs(corpus, &phrase_tokens(&query.name));
    if query_docs.is_empty() {
        return None;
    }
    let mut best: Option<(f64, &Expansion)> = None;
    for exp in expansions.retrieval_eligible() {
        let exp_docs = index.phrase_docs(corpus, &phrase_tokens(&exp.text));
        let both = exp_docs.intersection(&query_docs).count();
        if exp_docs.is_empty() || both == 0 {
            continue;
        }
        let score = pmi(index.doc_count(), query_docs.len(), exp_docs.len(), both);
        let better = match best {
            None => true,
            Some((s, e)) => score > s || (score == s && exp.text < e.text),
        };
        if better {
            best = Some((score, exp));
        }
    }
    best.map(|(_, e)| e)
}

/// Documents matching the query name, then those matching only the selected
/// expansion; each group ordered by doc id; truncated to `limit`.
pub fn retrieve(
    query: &Query,
    selected: Option<&Expansion>,
    index: &InvertedIndex,
    corpus: &[Document],
    limit: usize,
) -> Vec<usize> {
    let by_id = |docs: BTreeSet<usize>| {
        let mut v: Vec<usize> = docs.into_iter().collect();
        v.sort_by(|&a, &b| corpus[a].doc_id.cmp(&corpus[b].doc_id));
        v
    };
    let name_docs = index.phrase_docs(corpus, &phrase_tokens(&query.name));
    let extra = match selected {
        Some(e) => index
            .phrase_docs(corpus, &phrase_tokens(&e.text))
            .difference(&name_docs)
            .copied()
            .collect(),
        None => BTreeSet::new(),
    };
    let mut out = by_id(name_docs);
    out.extend(by_id(extra));
    out.truncate(limit);
    out
}
