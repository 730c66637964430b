//! Sentence-level candidate generation: query mentions, typed filler
//! mentions, and their pairing.

use std::collections::{BTreeMap, BTreeSet};

use crate::alias::ExpansionSet;
use crate::error::{Error, Result};
use crate::model::{Candidate, Query, RelationSchema, Sentence, TokenSpan};
use crate::text::{find_phrase, phrase_tokens, CaseMode};

pub const DEFAULT_MAX_DISTANCE: usize = 40;

/// Named type lists for filler types that the NE tagger does not produce.
#[derive(Debug, Clone, Default)]
pub struct TypeLists {
    lists: BTreeMap<String, BTreeSet<Vec<String>>>,
}

impl TypeLists {
    pub fn from_pairs<I, T, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (T, S)>,
        T: Into<String>,
        S: AsRef<str>,
    {
        let mut lists: BTreeMap<String, BTreeSet<Vec<String>>> = BTreeMap::new();
        for (ty, surface) in pairs {
            let ty = ty.into();
            let tokens = phrase_tokens(surface.as_ref());
            if tokens.is_empty() {
                return Err(Error::Schema(format!("empty surface form in type list `{ty}`")));
            }
            lists.entry(ty).or_default().insert(tokens);
        }
        Ok(TypeLists { lists })
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        Self::from_pairs(crate::io::parse_pairs(text, source)?)
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.lists.keys().map(String::as_str)
    }

    pub fn contains(&self, ty: &str, surface: &str) -> bool {
        self.lists.get(ty).is_some_and(|l| l.contains(&phrase_tokens(surface)))
    }

    fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<Vec<String>>)> {
        self.lists.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// Leftmost-longest, non-overlapping selection from a set of matches.
fn leftmost_longest(mut matches: Vec<TokenSpan>) -> Vec<TokenSpan> {
    matches.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    let mut out: Vec<TokenSpan> = Vec::new();
    for m in matches {
        if out.last().is_none_or(|last| m.start >= last.end) {
            out.push(m);
        }
    }
    out
}

/// Every span where the query name or any expansion (last names included)
/// occurs, as a set of phrases.
pub fn all_query_matches(
    sentence: &Sentence,
    expansions: &ExpansionSet,
    query: &Query,
    mode: CaseMode,
) -> Vec<TokenSpan> {
    let phrases: BTreeSet<Vec<String>> = std::iter::once(query.name.as_str())
        .chain(expansions.iter().map(|e| e.text.as_str()))
        .map(phrase_tokens)
        .filter(|p| !p.is_empty())
        .collect();
    let mut matches: Vec<TokenSpan> = phrases
        .iter()
        .flat_map(|p| {
            find_phrase(&sentence.tokens, p, mode)
                .into_iter()
                .map(|i| TokenSpan::new(i, i + p.len()))
        })
        .collect();
    matches.sort();
    matches.dedup();
    matches
}

/// Query mentions in a sentence, overlaps resolved leftmost-longest.
pub fn match_query(sentence: &Sentence, expansions: &ExpansionSet, query: &Query, mode: CaseMode) -> Vec<TokenSpan> {
    leftmost_longest(all_query_matches(sentence, expansions, query, mode))
}

/// Typed filler mentions: NE spans of an admissible type plus type-list
/// matches. Mentions from the two sources may overlap.
pub fn match_fillers<'s>(
    sentence: &Sentence,
    schemas: impl IntoIterator<Item = &'s RelationSchema>,
    type_lists: &TypeLists,
    mode: CaseMode,
) -> Vec<(TokenSpan, String)> {
    let admissible: BTreeSet<&str> = schemas
        .into_iter()
        .flat_map(|s| s.filler_types.iter().map(String::as_str))
        .collect();
    let mut out: BTreeSet<(TokenSpan, String)> = sentence
        .entity_spans
        .iter()
        .filter(|e| admissible.contains(e.entity_type.as_str()))
        .map(|e| (e.span, e.entity_type.clone()))
        .collect();
    for (ty, forms) in type_lists.iter() {
        if !admissible.contains(ty) {
            continue;
        }
        for form in forms {
            for i in find_phrase(&sentence.tokens, form, mode) {
                out.insert((TokenSpan::new(i, i + form.len()), ty.to_string()));
            }
        }
    }
    out.into_iter().collect()
}

/// Cross product of query and filler mentions, dropping overlapping pairs
/// and pairs more than `max_distance` tokens apart.
pub fn generate_candidates<'a>(
    sentence: &'a Sentence,
    query_spans: &[TokenSpan],
    filler_spans: &[(TokenSpan, String)],
    query: &'a Query,
    max_distance: usize,
) -> Vec<Candidate<'a>> {
    let mut out = Vec::new();
    for &q in query_spans {
        for (f, ty) in filler_spans {
            if q.overlaps(f) || q.gap(f) > max_distance {
                continue;
            }
            out.push(Candidate {
                query,
                sentence,
                query_span: q,
                filler_span: *f,
                filler_type: ty.clone(),
            });
        }
    }
    out
}
