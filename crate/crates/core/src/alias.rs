//! Query expansion from anchor-text translations, and the alternate-names
//! answer component built on top of it.
//!
//! An anchor expansion of a query name is kept only when the page most often
//! linked by the expansion is the same page most often linked by the name
//! itself (the link-back requirement). Organisations additionally get
//! business-form suffix variants; persons get their last name, which is used
//! for sentence matching but never for retrieval.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{Answer, Document, EntityType, Provenance, Query, ResponseRecord};
use crate::text::{find_phrase, phrase_tokens, CaseMode};

/// Confidence attached to alternate-name answers.
pub const ALT_NAMES_CONFIDENCE: f64 = 0.9;

#[derive(Debug, Clone, Default)]
pub struct AnchorLexicon {
    entries: BTreeMap<String, Vec<(String, u64)>>,
    top: BTreeMap<String, String>,
    by_top_page: BTreeMap<String, BTreeSet<String>>,
}

impl AnchorLexicon {
    pub fn from_entries<I, A, P>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, P, u64)>,
        A: Into<String>,
        P: Into<String>,
    {
        let mut map: BTreeMap<String, Vec<(String, u64)>> = BTreeMap::new();
        for (anchor, page, count) in entries {
            let (anchor, page) = (anchor.into(), page.into());
            if count == 0 {
                return Err(Error::Schema(format!("anchor `{anchor}` -> `{page}` has count 0")));
            }
            let pages = map.entry(anchor.clone()).or_default();
            if pages.iter().any(|(p, _)| *p == page) {
                return Err(Error::Schema(format!("anchor `{anchor}` lists page `{page}` twice")));
            }
            pages.push((page, count));
        }

        let mut top = BTreeMap::new();
        let mut by_top_page: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (anchor, pages) in &map {
            // max count, ties to the lexicographically smallest title
            let best = pages
                .iter()
                .min_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)))
                .map(|(p, _)| p.clone())
                .expect("anchor has at least one page");
            by_top_page.entry(best.clone()).or_default().insert(anchor.clone());
            top.insert(anchor.clone(), best);
        }
        Ok(AnchorLexicon {
            entries: map,
            top,
            by_top_page,
        })
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        Self::from_entries(crate::io::parse_anchor_lexicon(text, source)?)
    }

    /// Most frequently linked page for an anchor text (exact, case-sensitive).
    pub fn top_page(&self, text: &str) -> Option<&str> {
        self.top.get(text).map(String::as_str)
    }

    pub fn pages(&self, anchor: &str) -> Option<&[(String, u64)]> {
        self.entries.get(anchor).map(Vec::as_slice)
    }

    /// Anchors whose top page is `page`, in lexicographic order.
    pub fn anchors_for_page(&self, page: &str) -> impl Iterator<Item = &str> {
        self.by_top_page
            .get(page)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExpansionKind {
    Anchor,
    OrgSuffix,
    LastName,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expansion {
    pub text: String,
    pub kind: ExpansionKind,
}

impl Expansion {
    /// Last-name expansions match sentences but are not used as search phrases.
    pub fn retrieval_eligible(&self) -> bool {
        self.kind != ExpansionKind::LastName
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionSet {
    pub query_name: String,
    pub expansions: Vec<Expansion>,
}

impl ExpansionSet {
    pub fn iter(&self) -> impl Iterator<Item = &Expansion> {
        self.expansions.iter()
    }

    pub fn of_kind(&self, kind: ExpansionKind) -> impl Iterator<Item = &Expansion> {
        self.expansions.iter().filter(move |e| e.kind == kind)
    }

    pub fn retrieval_eligible(&self) -> impl Iterator<Item = &Expansion> {
        self.expansions.iter().filter(|e| e.retrieval_eligible())
    }

    fn push(&mut self, text: String, kind: ExpansionKind) {
        if text != self.query_name && !self.expansions.iter().any(|e| e.text == text) {
            self.expansions.push(Expansion { text, kind });
        }
    }
}

pub fn expand_query(query: &Query, lexicon: &AnchorLexicon, org_suffixes: &[String]) -> ExpansionSet {
    let mut set = ExpansionSet {
        query_name: query.name.clone(),
        expansions: Vec::new(),
    };
    if let Some(page) = lexicon.top_page(&query.name) {
        for anchor in lexicon.anchors_for_page(page) {
            set.push(anchor.to_string(), ExpansionKind::Anchor);
        }
    }
    match query.entity_type {
        EntityType::Org => {
            for suffix in org_suffixes {
                let suffix = suffix.trim();
                if !suffix.is_empty() {
                    set.push(format!("{} {suffix}", query.name), ExpansionKind::OrgSuffix);
                }
            }
        }
        EntityType::Per => {
            let tokens = phrase_tokens(&query.name);
            if tokens.len() > 1 {
                set.push(tokens[tokens.len() - 1].clone(), ExpansionKind::LastName);
            }
        }
    }
    set
}

/// One `*:alternate_names` answer per anchor expansion that occurs in a
/// retrieved document. The first occurrence in retrieval order is reported.
pub fn alternate_name_answers(
    query: &Query,
    expansions: &ExpansionSet,
    retrieved: &[&Document],
    mode: CaseMode,
) -> Vec<ResponseRecord> {
    let relation = query.entity_type.alternate_names_relation();
    let query_lower = query.name.to_lowercase();
    let mut out = Vec::new();
    for exp in expansions.of_kind(ExpansionKind::Anchor) {
        if exp.text.to_lowercase() == query_lower {
            continue;
        }
        let phrase = phrase_tokens(&exp.text);
        let hit = retrieved.iter().find_map(|doc| {
            doc.sentences.iter().find_map(|s| {
                find_phrase(&s.tokens, &phrase, mode)
                    .first()
                    .map(|&start| (doc, s, start))
            })
        });
        if let Some((doc, sentence, start)) = hit {
            let end = start + phrase.len();
            out.push(ResponseRecord {
                query_id: query.id.clone(),
                relation: relation.to_string(),
                run_id: String::new(),
                answer: Some(Answer {
                    doc_id: doc.doc_id.clone(),
                    filler: exp.text.clone(),
                    filler_offsets: (sentence.tokens[start].begin, sentence.tokens[end - 1].end),
                    justification: sentence.offsets().expect("matched sentence is non-empty"),
                    confidence: ALT_NAMES_CONFIDENCE,
                    provenance: Some(Provenance::AltNames),
                }),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Sentence, Token};

    fn sample_lexicon() -> AnchorLexicon {
        AnchorLexicon::from_entries([
            ("Adam Gadahn", "Adam_Gadahn", 20),
            ("Azzam the American", "Adam_Gadahn", 9),
            ("Adam Yahiyeh Gadahn", "Adam_Gadahn", 4),
            ("Gadahn", "Adam_Gadahn", 3),
            ("Gadahn", "Gadahn_family", 3),
            ("DCNS", "DCNS_(company)", 11),
            ("DCN", "DCNS_(company)", 5),
            ("DCN", "DCN_(disambiguation)", 2),
            ("Direction des Constructions Navales", "DCNS_(company)", 7),
            ("Paris Hilton", "Paris_Hilton", 30),
            ("Paris", "Paris", 500),
            ("Paris", "Paris_Hilton", 12),
        ])
        .unwrap()
    }

    fn doc(id: &str, words: &str) -> Document {
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
        Document {
            doc_id: id.into(),
            sentences: vec![Sentence::new(id, tokens, vec![]).unwrap()],
        }
    }

    #[test]
    fn top_page_lookup() {
        let lex = sample_lexicon();
        assert_eq!(lex.top_page("Azzam the American"), Some("Adam_Gadahn"));
        assert_eq!(lex.top_page("unknown"), None);
        // tie on 3/3 -> lexicographically smallest title
        assert_eq!(lex.top_page("Gadahn"), Some("Adam_Gadahn"));
        assert_eq!(lex.top_page("azzam the american"), None);
    }

    #[test]
    fn rejects_zero_counts_and_duplicate_pages() {
        assert!(AnchorLexicon::from_entries([("a", "P", 0)]).is_err());
        assert!(AnchorLexicon::from_entries([("a", "P", 1), ("a", "P", 2)]).is_err());
    }

    #[test]
    fn person_expansion() {
        let q = Query::new("SF1", "Adam Gadahn", EntityType::Per).unwrap();
        let set = expand_query(&q, &sample_lexicon(), &[]);
        let anchors: Vec<&str> = set.of_kind(ExpansionKind::Anchor).map(|e| e.text.as_str()).collect();
        assert!(anchors.contains(&"Azzam the American"));
        assert!(anchors.contains(&"Adam Yahiyeh Gadahn"));
        assert!(!anchors.contains(&"Adam Gadahn"));
        // "Gadahn" is both an anchor (link-back holds) and the last name;
        // the anchor form wins the dedup.
        assert!(set.iter().any(|e| e.text == "Gadahn"));
    }

    #[test]
    fn last_name_not_retrieval_eligible() {
        let lex = AnchorLexicon::default();
        let q = Query::new("SF1", "Adam Gadahn", EntityType::Per).unwrap();
        let set = expand_query(&q, &lex, &[]);
        let last: Vec<&Expansion> = set.of_kind(ExpansionKind::LastName).collect();
        assert_eq!(last.len(), 1);
        assert_eq!(last[0].text, "Gadahn");
        assert!(!last[0].retrieval_eligible());
        assert_eq!(set.retrieval_eligible().count(), 0);

        let single = Query::new("SF2", "Madonna", EntityType::Per).unwrap();
        assert!(expand_query(&single, &lex, &[]).expansions.is_empty());
    }

    #[test]
    fn org_suffixes() {
        let q = Query::new("SF3", "DCNS", EntityType::Org).unwrap();
        let set = expand_query(&q, &sample_lexicon(), &["Ltd".into(), "Corp".into()]);
        let texts: Vec<&str> = set.iter().map(|e| e.text.as_str()).collect();
        assert!(texts.contains(&"DCNS Ltd"));
        assert!(texts.contains(&"DCNS Corp"));
        assert!(texts.contains(&"Direction des Constructions Navales"));
        assert!(texts.contains(&"DCN"));
    }

    #[test]
    fn link_back_rejects_other_entity() {
        let q = Query::new("SF4", "Paris Hilton", EntityType::Per).unwrap();
        let set = expand_query(&q, &sample_lexicon(), &[]);
        assert!(set.of_kind(ExpansionKind::Anchor).all(|e| e.text != "Paris"));
    }

    #[test]
    fn unknown_name_gets_no_anchor_expansions() {
        let q = Query::new("SF5", "Acme Widgets", EntityType::Org).unwrap();
        let set = expand_query(&q, &sample_lexicon(), &["Inc".into()]);
        assert_eq!(set.of_kind(ExpansionKind::Anchor).count(), 0);
        assert_eq!(set.expansions.len(), 1);
    }

    #[test]
    fn alternate_names_from_retrieved_docs() {
        let q = Query::new("SF1", "Adam Gadahn", EntityType::Per).unwrap();
        let set = expand_query(&q, &sample_lexicon(), &[]);
        let d6 = doc("D6", "nothing here");
        let d7 = doc("D7", "he is known as Azzam the American today");
        let recs = alternate_name_answers(&q, &set, &[&d6, &d7], CaseMode::Sensitive);
        assert_eq!(recs.len(), 1);
        let a = recs[0].answer.as_ref().unwrap();
        assert_eq!(recs[0].relation, "per:alternate_names");
        assert_eq!(a.filler, "Azzam the American");
        assert_eq!(a.doc_id, "D7");
        assert_eq!(a.filler_offsets, (15, 33));
        assert_eq!(a.justification, (0, 39));

        assert!(alternate_name_answers(&q, &set, &[&d6], CaseMode::Sensitive).is_empty());
    }

    #[test]
    fn last_name_is_never_an_alternate_name() {
        let q = Query::new("SF1", "Adam Gadahn", EntityType::Per).unwrap();
        let set = expand_query(&q, &AnchorLexicon::default(), &[]);
        let d = doc("D1", "Gadahn spoke");
        assert!(alternate_name_answers(&q, &set, &[&d], CaseMode::Sensitive).is_empty());
    }
}
