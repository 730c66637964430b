//! Distant-supervision training data: KB argument pairs mapped to schema
//! relations, matched against corpus sentences, grouped per pair.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::candidates::{match_fillers, TypeLists};
use crate::classifier::{aggregate_examples, AggregatedExample, Label, PairGroup};
use crate::features::extract_span_features;
use crate::model::{Document, EntityType, KbTriple, SchemaSet, Sentence, TokenSpan};
use crate::patterns::SurfacePattern;
use crate::retrieval::InvertedIndex;
use crate::scalar::Scalar;
use crate::text::{phrase_spans, phrase_tokens, CaseMode};

pub const MAX_PAIRS_PER_RELATION: usize = 10_000;
pub const MAX_SENTENCES_PER_PAIR: usize = 500;

type Pair = (String, String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SeedSource {
    KbMapping,
    SeedPatterns,
}

/// How an over-capacity list is cut down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    #[default]
    First,
    /// Seeded uniform sample; kept items stay in input order.
    Sample { seed: u64 },
}

impl Truncation {
    fn apply<T>(self, items: Vec<T>, cap: usize) -> Vec<T> {
        if items.len() <= cap {
            return items;
        }
        match self {
            Truncation::First => items.into_iter().take(cap).collect(),
            Truncation::Sample { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut keep: Vec<usize> = sample(&mut rng, items.len(), cap).into_vec();
                keep.sort_unstable();
                let keep: BTreeSet<usize> = keep.into_iter().collect();
                items
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| keep.contains(i))
                    .map(|(_, x)| x)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    pub relation: String,
    pub pairs: Vec<(String, String)>,
    pub source: SeedSource,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairSetReport {
    pub sets: Vec<PairSet>,
    /// KB lines skipped because their relation has no mapping (or maps to an
    /// unknown schema relation).
    pub unmapped: usize,
}

/// Groups triples into per-relation pair sets: deduplicated, then capped.
pub fn build_pair_sets(
    kb: &[KbTriple],
    mapping: &BTreeMap<String, String>,
    schemas: &SchemaSet,
    source: SeedSource,
    cap: usize,
    truncation: Truncation,
) -> PairSetReport {
    let mut by_relation: BTreeMap<&str, Vec<Pair>> = BTreeMap::new();
    let mut seen: HashSet<(&str, &str, &str)> = HashSet::new();
    let mut unmapped = 0;
    for t in kb {
        let Some(rel) = mapping.get(&t.relation).filter(|r| schemas.get(r).is_some()) else {
            unmapped += 1;
            continue;
        };
        if seen.insert((rel.as_str(), t.subject.as_str(), t.object.as_str())) {
            by_relation
                .entry(rel.as_str())
                .or_default()
                .push((t.subject.clone(), t.object.clone()));
        }
    }
    if unmapped > 0 {
        log::warn!("{unmapped} KB lines have no relation mapping and were skipped");
    }
    let sets = by_relation
        .into_iter()
        .map(|(rel, pairs)| PairSet {
            relation: rel.to_string(),
            pairs: truncation.apply(pairs, cap),
            source,
        })
        .collect();
    PairSetReport { sets, unmapped }
}

/// A sentence containing both arguments of a seed pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingMatch<'c> {
    pub relation: String,
    pub source: SeedSource,
    pub subject: String,
    pub object: String,
    pub sentence: &'c Sentence,
    pub subject_span: TokenSpan,
    pub object_span: TokenSpan,
}

/// First non-overlapping (subject, object) mention pair in a sentence.
fn first_mention_pair(
    sentence: &Sentence,
    subject: &[String],
    object: &[String],
    mode: CaseMode,
) -> Option<(TokenSpan, TokenSpan)> {
    let subjects = phrase_spans(&sentence.tokens, subject, mode);
    if subjects.is_empty() {
        return None;
    }
    let objects = phrase_spans(&sentence.tokens, object, mode);
    subjects
        .iter()
        .flat_map(|s| objects.iter().map(move |o| (*s, *o)))
        .find(|(s, o)| !s.overlaps(o))
}

/// Sentences (in corpus order) containing both arguments of each pair, at
/// most `cap` per pair. Output follows pair-set order, then pair order.
pub fn match_pairs<'c>(
    pair_sets: &[PairSet],
    corpus: &'c [Document],
    index: &InvertedIndex,
    cap: usize,
) -> Vec<TrainingMatch<'c>> {
    let mode = index.mode();
    let jobs: Vec<(&PairSet, &(String, String))> = pair_sets
        .iter()
        .flat_map(|set| set.pairs.iter().map(move |p| (set, p)))
        .collect();
    jobs.par_iter()
        .map(|(set, (subj, obj))| {
            let subj_tokens = phrase_tokens(subj);
            let obj_tokens = phrase_tokens(obj);
            let subj_docs = index.phrase_docs(corpus, &subj_tokens);
            let obj_docs = index.phrase_docs(corpus, &obj_tokens);
            let mut out = Vec::new();
            'docs: for d in subj_docs.intersection(&obj_docs) {
                for sentence in &corpus[*d].sentences {
                    if let Some((s, o)) = first_mention_pair(sentence, &subj_tokens, &obj_tokens, mode) {
                        out.push(TrainingMatch {
                            relation: set.relation.clone(),
                            source: set.source,
                            subject: subj.clone(),
                            object: obj.clone(),
                            sentence,
                            subject_span: s,
                            object_span: o,
                        });
                        if out.len() >= cap {
                            break 'docs;
                        }
                    }
                }
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Argument pairs found by matching hand-written surface patterns over typed
/// mentions of the corpus, one pair set per relation.
pub fn collect_seed_pattern_pairs(
    corpus: &[Document],
    schemas: &SchemaSet,
    type_lists: &TypeLists,
    patterns: &[SurfacePattern],
    mode: CaseMode,
    cap: usize,
) -> Vec<PairSet> {
    let mut found: BTreeMap<&str, (Vec<Pair>, HashSet<Pair>)> = BTreeMap::new();
    for doc in corpus {
        for sentence in &doc.sentences {
            let fillers = match_fillers(sentence, schemas.iter(), type_lists, mode);
            for p in patterns {
                let Some(schema) = schemas.get(&p.relation) else {
                    continue;
                };
                let subjects = sentence
                    .entity_spans
                    .iter()
                    .filter(|e| e.entity_type == schema.query_type.as_str());
                for subj in subjects {
                    for (f, ty) in &fillers {
                        if !schema.accepts_filler(ty) || subj.span.overlaps(f) {
                            continue;
                        }
                        if p.matches_spans(sentence, subj.span, *f, mode) {
                            let pair = (sentence.span_text(subj.span), sentence.span_text(*f));
                            let (list, seen) = found.entry(schema.name.as_str()).or_default();
                            if seen.insert(pair.clone()) {
                                list.push(pair);
                            }
                        }
                    }
                }
            }
        }
    }
    found
        .into_iter()
        .map(|(rel, (pairs, _))| PairSet {
            relation: rel.to_string(),
            pairs: pairs.into_iter().take(cap).collect(),
            source: SeedSource::SeedPatterns,
        })
        .collect()
}

/// Positive and negative aggregated examples for one relation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    pub relation: String,
    pub positives: Vec<AggregatedExample<T>>,
    pub negatives: Vec<AggregatedExample<T>>,
    /// Negatives removed because an identical vector is labeled positive.
    pub removed_negatives: usize,
}

/// Which other relations supply negative data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeScope {
    /// Only relations sharing the subject entity type.
    #[default]
    SameType,
    AllRelations,
}

fn relation_type(relation: &str) -> Option<EntityType> {
    if relation.starts_with("per:") {
        Some(EntityType::Per)
    } else if relation.starts_with("org:") {
        Some(EntityType::Org)
    } else {
        None
    }
}

fn vector_key<T: Scalar>(e: &AggregatedExample<T>) -> Vec<(String, u64)> {
    e.features
        .iter()
        .map(|(f, v)| (f.to_string(), v.to_f64().unwrap_or(f64::NAN).to_bits()))
        .collect()
}

/// Per pair and relation, the feature counts of every matched sentence.
pub fn group_matches(matches: &[TrainingMatch<'_>]) -> BTreeMap<String, Vec<PairGroup>> {
    let mut grouped: BTreeMap<(&str, &str, &str), Vec<_>> = BTreeMap::new();
    for m in matches {
        grouped
            .entry((m.relation.as_str(), m.subject.as_str(), m.object.as_str()))
            .or_default()
            .push(extract_span_features(m.sentence, m.subject_span, m.object_span));
    }
    let mut out: BTreeMap<String, Vec<PairGroup>> = BTreeMap::new();
    for ((rel, s, o), sentences) in grouped {
        out.entry(rel.to_string()).or_default().push(PairGroup {
            subject: s.to_string(),
            object: o.to_string(),
            sentences,
        });
    }
    out
}

/// Aggregated one-vs-rest training sets. A negative whose vector equals a
/// positive vector of the same relation is removed.
pub fn build_training_sets<T: Scalar>(matches: &[TrainingMatch<'_>], scope: NegativeScope) -> Vec<TrainingSet<T>> {
    let grouped = group_matches(matches);
    let aggregated: BTreeMap<&str, Vec<AggregatedExample<T>>> = grouped
        .iter()
        .map(|(rel, groups)| (rel.as_str(), aggregate_examples(groups, Label::Positive).0))
        .collect();

    let mut out = Vec::new();
    for (rel, positives) in &aggregated {
        if positives.is_empty() {
            log::warn!("{rel}: no positive examples; excluded from training");
            continue;
        }
        let keys: HashSet<Vec<(String, u64)>> = positives.iter().map(vector_key).collect();
        let mut negatives = Vec::new();
        let mut removed = 0;
        for (other, examples) in &aggregated {
            if other == rel {
                continue;
            }
            if scope == NegativeScope::SameType && relation_type(other) != relation_type(rel) {
                continue;
            }
            for e in examples {
                if keys.contains(&vector_key(e)) {
                    removed += 1;
                    continue;
                }
                let mut neg = e.clone();
                neg.label = Label::Negative;
                negatives.push(neg);
            }
        }
        if negatives.is_empty() {
            log::warn!("{rel}: no negative examples");
        }
        out.push(TrainingSet {
            relation: rel.to_string(),
            positives: positives.clone(),
            negatives,
            removed_negatives: removed,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arity, RelationSchema, Token};

    fn schemas() -> SchemaSet {
        SchemaSet::new(vec![
            RelationSchema::new("per:city_of_birth", EntityType::Per, ["GPE"], Arity::Single).unwrap(),
            RelationSchema::new("per:employee_of", EntityType::Per, ["ORG"], Arity::List).unwrap(),
            RelationSchema::new("org:city_of_headquarters", EntityType::Org, ["GPE"], Arity::Single).unwrap(),
        ])
        .unwrap()
    }

    fn mapping() -> BTreeMap<String, String> {
        [
            ("/people/person/place_of_birth", "per:city_of_birth"),
            ("/business/employment/employer", "per:employee_of"),
            ("/organization/headquarters", "org:city_of_headquarters"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect()
    }

    fn triple(rel: &str, s: &str, o: &str) -> KbTriple {
        KbTriple {
            relation: rel.into(),
            subject: s.into(),
            object: o.into(),
        }
    }

    fn doc(id: &str, sentences: &[&str]) -> Document {
        Document {
            doc_id: id.into(),
            sentences: sentences
                .iter()
                .map(|s| {
                    let mut pos = 0;
                    let tokens = s
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
                    Sentence::new(id, tokens, vec![]).unwrap()
                })
                .collect(),
        }
    }

    #[test]
    fn pair_cap_and_dedup() {
        let mut kb: Vec<KbTriple> = (0..12_000)
            .map(|i| triple("/people/person/place_of_birth", &format!("P{i}"), "Berlin"))
            .collect();
        kb.insert(1, triple("/people/person/place_of_birth", "P0", "Berlin"));
        let report = build_pair_sets(
            &kb,
            &mapping(),
            &schemas(),
            SeedSource::KbMapping,
            MAX_PAIRS_PER_RELATION,
            Truncation::First,
        );
        assert_eq!(report.sets.len(), 1);
        let pairs = &report.sets[0].pairs;
        assert_eq!(pairs.len(), 10_000);
        assert_eq!(pairs[1].0, "P1");
        assert_eq!(pairs[9_999].0, "P9999");
    }

    #[test]
    fn unmapped_relations_skipped() {
        let kb = vec![
            triple("/unknown/rel", "a", "b"),
            triple("/people/person/place_of_birth", "a", "b"),
        ];
        let report = build_pair_sets(
            &kb,
            &mapping(),
            &schemas(),
            SeedSource::KbMapping,
            10,
            Truncation::First,
        );
        assert_eq!(report.unmapped, 1);
        assert_eq!(report.sets.len(), 1);
    }

    #[test]
    fn sampled_truncation_is_seeded() {
        let items: Vec<usize> = (0..100).collect();
        let a = Truncation::Sample { seed: 7 }.apply(items.clone(), 10);
        let b = Truncation::Sample { seed: 7 }.apply(items.clone(), 10);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sentence_cap_per_pair() {
        let sentences: Vec<String> = (0..600).map(|i| format!("Anna Meyer visited Berlin {i}")).collect();
        let refs: Vec<&str> = sentences.iter().map(String::as_str).collect();
        let corpus = vec![doc("D1", &refs[..300]), doc("D2", &refs[300..])];
        let index = InvertedIndex::build(&corpus, CaseMode::Sensitive);
        let sets = vec![PairSet {
            relation: "per:city_of_birth".into(),
            pairs: vec![("Anna Meyer".into(), "Berlin".into())],
            source: SeedSource::KbMapping,
        }];
        let m = match_pairs(&sets, &corpus, &index, MAX_SENTENCES_PER_PAIR);
        assert_eq!(m.len(), 500);
        assert_eq!(m[0].sentence.tokens[4].text, "0");
        assert_eq!(m[499].sentence.tokens[4].text, "499");
    }

    #[test]
    fn arguments_must_share_a_sentence() {
        let corpus = vec![doc("D1", &["Anna Meyer spoke", "Berlin is cold"])];
        let index = InvertedIndex::build(&corpus, CaseMode::Sensitive);
        let sets = vec![PairSet {
            relation: "per:city_of_birth".into(),
            pairs: vec![("Anna Meyer".into(), "Berlin".into())],
            source: SeedSource::KbMapping,
        }];
        assert!(match_pairs(&sets, &corpus, &index, 500).is_empty());
    }

    #[test]
    fn self_pair_needs_two_mentions() {
        let corpus = vec![doc("D1", &["IBM is big"]), doc("D2", &["IBM bought IBM"])];
        let index = InvertedIndex::build(&corpus, CaseMode::Sensitive);
        let sets = vec![PairSet {
            relation: "per:employee_of".into(),
            pairs: vec![("IBM".into(), "IBM".into())],
            source: SeedSource::KbMapping,
        }];
        let m = match_pairs(&sets, &corpus, &index, 500);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].sentence.doc_id, "D2");
    }

    fn training_match<'c>(rel: &str, s: &'c Sentence, subj: (usize, usize), obj: (usize, usize)) -> TrainingMatch<'c> {
        TrainingMatch {
            relation: rel.into(),
            source: SeedSource::KbMapping,
            subject: s.span_text(TokenSpan::new(subj.0, subj.1)),
            object: s.span_text(TokenSpan::new(obj.0, obj.1)),
            sentence: s,
            subject_span: TokenSpan::new(subj.0, subj.1),
            object_span: TokenSpan::new(obj.0, obj.1),
        }
    }

    #[test]
    fn conflicting_vectors_lose_negative_copy() {
        let d = doc("D", &["Anna was born in Berlin", "Bob works for IBM"]);
        let born = &d.sentences[0];
        let works = &d.sentences[1];
        let matches = vec![
            training_match("per:city_of_birth", born, (0, 1), (4, 5)),
            training_match("per:employee_of", born, (0, 1), (4, 5)),
            training_match("per:employee_of", works, (0, 1), (3, 4)),
        ];
        let sets = build_training_sets::<f64>(&matches, NegativeScope::SameType);
        let birth = sets.iter().find(|s| s.relation == "per:city_of_birth").unwrap();
        assert_eq!(birth.positives.len(), 1);
        assert_eq!(birth.negatives.len(), 1);
        assert_eq!(birth.removed_negatives, 1);
        for s in &sets {
            let pos: Vec<_> = s.positives.iter().map(|e| &e.features).collect();
            assert!(s.negatives.iter().all(|n| !pos.contains(&&n.features)));
        }
    }

    #[test]
    fn disjoint_relations_mirror_each_other() {
        let d = doc("D", &["Anna was born in Berlin", "Bob works for IBM"]);
        let matches = vec![
            training_match("per:city_of_birth", &d.sentences[0], (0, 1), (4, 5)),
            training_match("per:employee_of", &d.sentences[1], (0, 1), (3, 4)),
        ];
        let sets = build_training_sets::<f64>(&matches, NegativeScope::SameType);
        assert_eq!(sets.len(), 2);
        let as_features = |v: &[AggregatedExample<f64>]| v.iter().map(|e| e.features.clone()).collect::<Vec<_>>();
        assert_eq!(as_features(&sets[0].negatives), as_features(&sets[1].positives));
        assert_eq!(as_features(&sets[1].negatives), as_features(&sets[0].positives));
    }

    #[test]
    fn single_relation_has_no_negatives() {
        let d = doc("D", &["Anna was born in Berlin"]);
        let matches = vec![training_match("per:city_of_birth", &d.sentences[0], (0, 1), (4, 5))];
        let sets = build_training_sets::<f64>(&matches, NegativeScope::AllRelations);
        assert_eq!(sets.len(), 1);
        assert!(sets[0].negatives.is_empty());
    }

    #[test]
    fn negative_scope_by_type() {
        let d = doc("D", &["Anna was born in Berlin", "IBM is based in Armonk"]);
        let matches = vec![
            training_match("per:city_of_birth", &d.sentences[0], (0, 1), (4, 5)),
            training_match("org:city_of_headquarters", &d.sentences[1], (0, 1), (4, 5)),
        ];
        let same = build_training_sets::<f64>(&matches, NegativeScope::SameType);
        assert!(same.iter().all(|s| s.negatives.is_empty()));
        let all = build_training_sets::<f64>(&matches, NegativeScope::AllRelations);
        assert!(all.iter().all(|s| s.negatives.len() == 1));
    }
}
