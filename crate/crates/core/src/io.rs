//! Parsers and serializers for the plain-text file formats.
//!
//! Every parser is a pure function of the file content; `source` names the
//! input in error messages. Line numbers in errors are 1-based.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    Answer, Arity, Document, EntitySpan, EntityType, GoldEntry, KbTriple, Query, RelationSchema, ResponseRecord,
    SchemaSet, Sentence, Token, TokenSpan,
};

pub const NIL: &str = "NIL";

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Non-empty lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn check_field(source: &str, line: usize, value: &str, what: &str) -> Result<()> {
    if value.contains('\t') || value.contains('\n') {
        return Err(Error::parse(source, line, format!("{what} contains a tab or newline")));
    }
    Ok(())
}

// ---------------------------------------------------------------- schemas

/// `<relation>\t<PER|ORG>\t<comma-separated filler types>\t<single|list>`.
/// Whitespace-separated lines are accepted as well.
pub fn parse_schemas(text: &str, source: &str) -> Result<SchemaSet> {
    let mut schemas = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in content_lines(text) {
        let f = fields(line);
        if f.len() != 4 {
            return Err(Error::parse(source, n, format!("expected 4 fields, found {}", f.len())));
        }
        let query_type: EntityType = f[1].parse().map_err(|e: String| Error::parse(source, n, e))?;
        let arity: Arity = f[3].parse().map_err(|e: String| Error::parse(source, n, e))?;
        let filler_types: Vec<&str> = f[2].split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let schema = RelationSchema::new(f[0], query_type, filler_types, arity)
            .map_err(|e| Error::parse(source, n, e.to_string()))?;
        if !seen.insert(schema.name.clone()) {
            return Err(Error::Schema(format!(
                "{source}:{n}: duplicate relation `{}`",
                schema.name
            )));
        }
        schemas.push(schema);
    }
    SchemaSet::new(schemas)
}

pub fn write_schemas(schemas: &SchemaSet) -> String {
    let mut out = String::new();
    for s in schemas.iter() {
        let types: Vec<&str> = s.filler_types.iter().map(String::as_str).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            s.name,
            s.query_type,
            types.join(","),
            s.arity.as_str()
        );
    }
    out
}

// ----------------------------------------------------------------- corpus

#[derive(Debug, Clone, PartialEq, Eq)]
enum Bio {
    Outside,
    Begin(String),
    Inside(String),
}

fn parse_bio(tag: &str) -> Option<Bio> {
    if tag == "O" {
        Some(Bio::Outside)
    } else if let Some(t) = tag.strip_prefix("B-") {
        (!t.is_empty()).then(|| Bio::Begin(t.to_string()))
    } else if let Some(t) = tag.strip_prefix("I-") {
        (!t.is_empty()).then(|| Bio::Inside(t.to_string()))
    } else {
        None
    }
}

struct SentenceBuilder {
    tokens: Vec<Token>,
    spans: Vec<EntitySpan>,
    open: Option<(String, usize)>,
}

impl SentenceBuilder {
    fn new() -> Self {
        SentenceBuilder {
            tokens: Vec::new(),
            spans: Vec::new(),
            open: None,
        }
    }

    fn close_span(&mut self) {
        if let Some((ty, start)) = self.open.take() {
            self.spans.push(EntitySpan {
                entity_type: ty,
                span: TokenSpan::new(start, self.tokens.len()),
            });
        }
    }

    fn finish(mut self, doc_id: &str) -> Result<Option<Sentence>> {
        self.close_span();
        if self.tokens.is_empty() {
            return Ok(None);
        }
        Sentence::new(doc_id, self.tokens, self.spans).map(Some)
    }
}

/// Reads the column corpus format: `#doc <id>` headers, one
/// `<surface>\t<begin>\t<end>\t<BIO tag>` token per line, blank line between
/// sentences.
pub fn parse_corpus(text: &str, source: &str) -> Result<Vec<Document>> {
    let mut docs: Vec<Document> = Vec::new();
    let mut current = SentenceBuilder::new();
    let mut last_end: Option<usize> = None;

    let flush = |docs: &mut Vec<Document>, builder: SentenceBuilder, line: usize| -> Result<()> {
        if let Some(doc) = docs.last_mut() {
            if let Some(s) = builder
                .finish(&doc.doc_id)
                .map_err(|e| Error::parse(source, line, e.to_string()))?
            {
                doc.sentences.push(s);
            }
        }
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim_end_matches('\r');
        if let Some(id) = line.strip_prefix("#doc ") {
            flush(&mut docs, std::mem::replace(&mut current, SentenceBuilder::new()), n)?;
            let id = id.trim();
            if id.is_empty() {
                return Err(Error::parse(source, n, "empty document id"));
            }
            docs.push(Document {
                doc_id: id.to_string(),
                sentences: Vec::new(),
            });
            last_end = None;
            continue;
        }
        if line.is_empty() {
            flush(&mut docs, std::mem::replace(&mut current, SentenceBuilder::new()), n)?;
            continue;
        }
        if docs.is_empty() {
            return Err(Error::parse(source, n, "token line before any `#doc` header"));
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::parse(
                source,
                n,
                format!("expected 4 tab-separated fields, found {}", f.len()),
            ));
        }
        let begin: usize = f[1]
            .parse()
            .map_err(|_| Error::parse(source, n, format!("bad begin offset `{}`", f[1])))?;
        let end: usize = f[2]
            .parse()
            .map_err(|_| Error::parse(source, n, format!("bad end offset `{}`", f[2])))?;
        if end < begin {
            return Err(Error::parse(source, n, "token end offset before begin offset"));
        }
        if let Some(prev) = last_end {
            if begin < prev {
                return Err(Error::parse(
                    source,
                    n,
                    format!("decreasing offset {begin} after {prev}"),
                ));
            }
        }
        last_end = Some(end);
        let tag = parse_bio(f[3]).ok_or_else(|| Error::parse(source, n, format!("bad NE tag `{}`", f[3])))?;
        match tag {
            Bio::Outside => current.close_span(),
            Bio::Begin(ty) => {
                current.close_span();
                current.open = Some((ty, current.tokens.len()));
            }
            Bio::Inside(ty) => match &current.open {
                Some((open, _)) if *open == ty => {}
                _ => return Err(Error::parse(source, n, format!("I-{ty} without a preceding B-{ty}"))),
            },
        }
        current.tokens.push(Token {
            text: f[0].to_string(),
            begin,
            end,
        });
    }
    flush(&mut docs, current, text.lines().count())?;
    Ok(docs)
}

/// Inverse of [`parse_corpus`] for canonical files (every sentence followed by
/// one blank line).
pub fn write_corpus(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        let _ = writeln!(out, "#doc {}", doc.doc_id);
        for s in &doc.sentences {
            let mut tags: Vec<String> = vec!["O".to_string(); s.tokens.len()];
            for e in &s.entity_spans {
                for (i, tag) in tags.iter_mut().enumerate().take(e.span.end).skip(e.span.start) {
                    if tag == "O" {
                        let prefix = if i == e.span.start { "B" } else { "I" };
                        *tag = format!("{prefix}-{}", e.entity_type);
                    }
                }
            }
            for (t, tag) in s.tokens.iter().zip(&tags) {
                let _ = writeln!(out, "{}\t{}\t{}\t{}", t.text, t.begin, t.end, tag);
            }
            out.push('\n');
        }
    }
    out
}

// ---------------------------------------------------------------- queries

/// `<id>\t<name>\t<PER|ORG>`; whitespace-separated lines take the last field
/// as the type and everything between as the name.
pub fn parse_queries(text: &str, source: &str) -> Result<Vec<Query>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let (id, name, ty) = if line.contains('\t') {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(source, n, format!("expected 3 fields, found {}", f.len())));
            }
            (f[0], f[1].to_string(), f[2])
        } else {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 3 {
                return Err(Error::parse(source, n, "expected `<id> <name> <type>`"));
            }
            (f[0], f[1..f.len() - 1].join(" "), f[f.len() - 1])
        };
        let ty: EntityType = ty.parse().map_err(|e: String| Error::parse(source, n, e))?;
        out.push(Query::new(id, name, ty).map_err(|e| Error::parse(source, n, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_queries(queries: &[Query]) -> String {
    let mut out = String::new();
    for q in queries {
        let _ = writeln!(out, "{}\t{}\t{}", q.id, q.name, q.entity_type);
    }
    out
}

// -------------------------------------------------------------- responses

pub fn write_responses(records: &[ResponseRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        for (v, what) in [
            (&r.query_id, "query id"),
            (&r.relation, "relation"),
            (&r.run_id, "run id"),
        ] {
            check_field("responses", 0, v, what).map_err(|_| Error::Emit(format!("{what} `{v}` contains a tab")))?;
        }
        match &r.answer {
            None => {
                let _ = writeln!(out, "{}\t{}\t{}\t{NIL}", r.query_id, r.relation, r.run_id);
            }
            Some(a) => {
                if a.filler.contains('\t') || a.filler.contains('\n') || a.doc_id.contains('\t') {
                    return Err(Error::Emit(format!("filler `{}` contains a tab or newline", a.filler)));
                }
                if !(0.0..=1.0).contains(&a.confidence) {
                    return Err(Error::Emit(format!("confidence {} outside [0,1]", a.confidence)));
                }
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.query_id,
                    r.relation,
                    r.run_id,
                    a.doc_id,
                    a.filler,
                    a.filler_offsets.0,
                    a.filler_offsets.1,
                    a.justification.0,
                    a.justification.1,
                    a.confidence
                );
            }
        }
    }
    Ok(out)
}

pub fn parse_responses(text: &str, source: &str) -> Result<Vec<ResponseRecord>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 4 {
            return Err(Error::parse(
                source,
                n,
                format!("expected at least 4 fields, found {}", f.len()),
            ));
        }
        if f[3] == NIL {
            if f.len() != 4 {
                return Err(Error::parse(source, n, "NIL row must end after the NIL column"));
            }
            out.push(ResponseRecord::nil(f[0], f[1], f[2]));
            continue;
        }
        if f.len() != 10 {
            return Err(Error::parse(
                source,
                n,
                format!("expected 10 fields, found {}", f.len()),
            ));
        }
        let num = |i: usize| -> Result<usize> {
            f[i].parse()
                .map_err(|_| Error::parse(source, n, format!("bad offset `{}`", f[i])))
        };
        let confidence: f64 = f[9]
            .parse()
            .map_err(|_| Error::parse(source, n, format!("bad confidence `{}`", f[9])))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::parse(
                source,
                n,
                format!("confidence {confidence} outside [0,1]"),
            ));
        }
        out.push(ResponseRecord {
            query_id: f[0].to_string(),
            relation: f[1].to_string(),
            run_id: f[2].to_string(),
            answer: Some(Answer {
                doc_id: f[3].to_string(),
                filler: f[4].to_string(),
                filler_offsets: (num(5)?, num(6)?),
                justification: (num(7)?, num(8)?),
                confidence,
                provenance: None,
            }),
        });
    }
    Ok(out)
}

// ------------------------------------------------------------------- gold

/// `<query_id>\t<relation>\t<class_id>\t<normalized filler>\t<doc_id|*>`.
/// The document column may list several ids separated by commas.
pub fn parse_gold(text: &str, source: &str) -> Result<Vec<GoldEntry>> {
    let mut out: Vec<GoldEntry> = Vec::new();
    for (n, line) in content_lines(text) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::parse(source, n, format!("expected 5 fields, found {}", f.len())));
        }
        let docs = if f[4] == "*" {
            None
        } else {
            Some(
                f[4].split(',')
                    .map(|d| d.trim().to_string())
                    .filter(|d| !d.is_empty())
                    .collect(),
            )
        };
        if let Some(prev) = out.iter().find(|g| g.class_id == f[2]) {
            if prev.query_id != f[0] || prev.relation != f[1] {
                return Err(Error::parse(
                    source,
                    n,
                    format!("class `{}` reused across query/relation", f[2]),
                ));
            }
        }
        out.push(GoldEntry {
            query_id: f[0].to_string(),
            relation: f[1].to_string(),
            class_id: f[2].to_string(),
            filler: f[3].to_string(),
            docs,
        });
    }
    Ok(out)
}

pub fn write_gold(entries: &[GoldEntry]) -> String {
    let mut out = String::new();
    for g in entries {
        let docs = match &g.docs {
            None => "*".to_string(),
            Some(d) => d.iter().cloned().collect::<Vec<_>>().join(","),
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            g.query_id, g.relation, g.class_id, g.filler, docs
        );
    }
    out
}

// --------------------------------------------------------- simple tables

/// `<relation>\t<subject>\t<object>`.
pub fn parse_kb(text: &str, source: &str) -> Result<Vec<KbTriple>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 || f.iter().any(|x| x.trim().is_empty()) {
            return Err(Error::parse(source, n, "expected `<relation>\\t<subject>\\t<object>`"));
        }
        out.push(KbTriple {
            relation: f[0].to_string(),
            subject: f[1].to_string(),
            object: f[2].to_string(),
        });
    }
    Ok(out)
}

pub fn write_kb(triples: &[KbTriple]) -> String {
    let mut out = String::new();
    for t in triples {
        let _ = writeln!(out, "{}\t{}\t{}", t.relation, t.subject, t.object);
    }
    out
}

/// Two-column file as ordered pairs (KB relation mapping, type lists).
pub fn parse_pairs(text: &str, source: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 2 || f.iter().any(|x| x.trim().is_empty()) {
            return Err(Error::parse(source, n, "expected two tab-separated fields"));
        }
        out.push((f[0].to_string(), f[1].to_string()));
    }
    Ok(out)
}

/// `<kb relation>\t<schema relation>`.
pub fn parse_mapping(text: &str, source: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, (kb, rel)) in parse_pairs(text, source)?.into_iter().enumerate() {
        if out.insert(kb.clone(), rel).is_some() {
            return Err(Error::parse(source, i + 1, format!("KB relation `{kb}` mapped twice")));
        }
    }
    Ok(out)
}

/// `<anchor text>\t<page title>\t<count>`.
pub fn parse_anchor_lexicon(text: &str, source: &str) -> Result<Vec<(String, String, u64)>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::parse(source, n, "expected `<anchor>\\t<page>\\t<count>`"));
        }
        let count: u64 = f[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(source, n, format!("bad count `{}`", f[2])))?;
        out.push((f[0].to_string(), f[1].to_string(), count));
    }
    Ok(out)
}

/// One item per non-empty line, trimmed.
pub fn parse_list(text: &str) -> Vec<String> {
    content_lines(text).map(|(_, l)| l.trim().to_string()).collect()
}

/// `<relation>\t<value>` parameter files written by the tuner.
pub fn parse_params(text: &str, source: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (n, (rel, v)) in parse_pairs(text, source)?.into_iter().enumerate() {
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::parse(source, n + 1, format!("bad value `{v}`")))?;
        out.insert(rel, v);
    }
    Ok(out)
}

pub fn write_params(params: &BTreeMap<String, f64>) -> String {
    let mut out = String::new();
    for (rel, v) in params {
        let _ = writeln!(out, "{rel}\t{v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_line_fields() {
        let s = parse_schemas("per:city_of_birth PER GPE single\n", "s").unwrap();
        let r = s.get("per:city_of_birth").unwrap();
        assert_eq!(r.arity, Arity::Single);
        assert_eq!(r.query_type, EntityType::Per);
        assert!(r.accepts_filler("GPE"));

        let s = parse_schemas("org:alternate_names ORG ORG list\n", "s").unwrap();
        let r = s.get("org:alternate_names").unwrap();
        assert_eq!(r.arity, Arity::List);
        assert_eq!(r.query_type, EntityType::Org);

        let s = parse_schemas("per:origin\tPER\tGPE,NATIONALITY\tsingle\n", "s").unwrap();
        assert_eq!(s.get("per:origin").unwrap().filler_types.len(), 2);
    }

    #[test]
    fn schema_duplicates_and_malformed() {
        let err = parse_schemas("per:title PER TITLE list\nper:title PER TITLE list\n", "s").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        let err = parse_schemas("per:title PER TITLE list\nper:spouse PER\n", "s").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn corpus_bio_decoding() {
        let text = "#doc D1\nAnna\t0\t4\tB-PER\nMeyer\t5\t10\tI-PER\nwas\t11\t14\tO\nborn\t15\t19\tO\n\n";
        let docs = parse_corpus(text, "c").unwrap();
        assert_eq!(docs.len(), 1);
        let s = &docs[0].sentences[0];
        assert_eq!(s.entity_spans.len(), 1);
        assert_eq!(s.entity_spans[0].entity_type, "PER");
        assert_eq!(s.entity_spans[0].span, TokenSpan::new(0, 2));
        assert_eq!(s.span_text(s.entity_spans[0].span), "Anna Meyer");
        assert_eq!(write_corpus(&docs), text);
    }

    #[test]
    fn corpus_edge_cases() {
        assert!(parse_corpus("", "c").unwrap().is_empty());
        let docs = parse_corpus("#doc A\nx\t0\t1\tO\n\n#doc B\ny\t0\t1\tO\n\n", "c").unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].doc_id, "B");

        let err = parse_corpus("#doc A\nx\t5\t6\tO\ny\t0\t1\tO\n", "c").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_corpus("#doc A\nx\t0\t1\tO\ny\t2\t3\tI-PER\n", "c").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_corpus("#doc A\nx\t0\t1\tB-ORG\ny\t2\t3\tI-PER\n", "c").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn adjacent_b_tags_make_two_spans() {
        let text = "#doc D\nA\t0\t1\tB-PER\nB\t2\t3\tB-PER\n\n";
        let docs = parse_corpus(text, "c").unwrap();
        assert_eq!(docs[0].sentences[0].entity_spans.len(), 2);
        assert_eq!(write_corpus(&docs), text);
    }

    #[test]
    fn query_lines() {
        let q = parse_queries("SF001 Adam Gadahn PER\n", "q").unwrap();
        assert_eq!(q[0], Query::new("SF001", "Adam Gadahn", EntityType::Per).unwrap());
        let q = parse_queries("SF002\tDCNS\tORG\n", "q").unwrap();
        assert_eq!(q[0].entity_type, EntityType::Org);
        assert!(parse_queries("SF003\tX\tLOC\n", "q").is_err());
        assert_eq!(write_queries(&q), "SF002\tDCNS\tORG\n");
    }

    #[test]
    fn nil_response_row() {
        let r = ResponseRecord::nil("SF001", "per:spouse", "run1");
        assert_eq!(
            write_responses(std::slice::from_ref(&r)).unwrap(),
            "SF001\tper:spouse\trun1\tNIL\n"
        );
        assert_eq!(parse_responses("SF001\tper:spouse\trun1\tNIL\n", "r").unwrap(), vec![r]);
    }

    #[test]
    fn ten_record_response_roundtrip() {
        let mut recs = Vec::new();
        for i in 0..10 {
            if i % 4 == 3 {
                recs.push(ResponseRecord::nil(format!("SF{i:03}"), "per:spouse", "run1"));
                continue;
            }
            recs.push(ResponseRecord {
                query_id: format!("SF{i:03}"),
                relation: "per:city_of_birth".into(),
                run_id: "run1".into(),
                answer: Some(Answer {
                    doc_id: format!("D{i}"),
                    filler: format!("City {i}"),
                    filler_offsets: (i * 3, i * 3 + 6),
                    justification: (0, 40 + i),
                    confidence: 1.0 / (i as f64 + 1.5),
                    provenance: None,
                }),
            });
        }
        let text = write_responses(&recs).unwrap();
        assert_eq!(parse_responses(&text, "r").unwrap(), recs);
    }

    #[test]
    fn response_rejects_bad_confidence() {
        assert!(parse_responses("Q\tr\trun\tD\tx\t0\t1\t0\t1\t1.5\n", "r").is_err());
        assert!(parse_responses("Q\tr\trun\tD\tx\t0\t1\n", "r").is_err());
    }

    #[test]
    fn gold_docs_column() {
        let text = "SF1\tper:title\tc1\tengineer\t*\nSF1\tper:title\tc2\tdirector\tD1,D2\n";
        let gold = parse_gold(text, "g").unwrap();
        assert_eq!(gold[0].docs, None);
        assert_eq!(gold[1].docs.as_ref().unwrap().len(), 2);
        assert_eq!(write_gold(&gold), text);
        assert!(parse_gold("SF1\tper:title\tc1\tx\t*\nSF2\tper:title\tc1\ty\t*\n", "g").is_err());
    }

    #[test]
    fn params_roundtrip() {
        let mut p = BTreeMap::new();
        p.insert("per:title".to_string(), 0.1);
        p.insert("org:parents".to_string(), 10.0);
        assert_eq!(parse_params(&write_params(&p), "p").unwrap(), p);
    }
}
