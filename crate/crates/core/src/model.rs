//! Domain types shared by every stage of the pipeline.
//!
//! Token ranges are half-open (`start..end`) token indices into a
//! [`Sentence`]. Character offsets are 0-based and end-exclusive, relative to
//! the original document text.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Entity type of a query (and of the subject of every relation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityType {
    Per,
    Org,
}

impl EntityType {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Per => "PER",
            EntityType::Org => "ORG",
        }
    }

    /// Relation-name prefix for relations whose subject has this type.
    pub fn relation_prefix(self) -> &'static str {
        match self {
            EntityType::Per => "per:",
            EntityType::Org => "org:",
        }
    }

    pub fn alternate_names_relation(self) -> &'static str {
        match self {
            EntityType::Per => "per:alternate_names",
            EntityType::Org => "org:alternate_names",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PER" => Ok(EntityType::Per),
            "ORG" => Ok(EntityType::Org),
            other => Err(format!("unknown entity type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arity {
    Single,
    List,
}

impl Arity {
    pub fn as_str(self) -> &'static str {
        match self {
            Arity::Single => "single",
            Arity::List => "list",
        }
    }
}

impl FromStr for Arity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Arity::Single),
            "list" => Ok(Arity::List),
            other => Err(format!("unknown arity `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSchema {
    pub name: String,
    pub query_type: EntityType,
    /// NE tags or type-list names admissible as fillers.
    pub filler_types: BTreeSet<String>,
    pub arity: Arity,
}

impl RelationSchema {
    pub fn new(
        name: impl Into<String>,
        query_type: EntityType,
        filler_types: impl IntoIterator<Item = impl Into<String>>,
        arity: Arity,
    ) -> Result<Self> {
        let schema = RelationSchema {
            name: name.into(),
            query_type,
            filler_types: filler_types.into_iter().map(Into::into).collect(),
            arity,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.filler_types.is_empty() {
            return Err(Error::Schema(format!("{}: no filler types", self.name)));
        }
        if !self.name.starts_with(self.query_type.relation_prefix()) {
            return Err(Error::Schema(format!(
                "{}: query type {} does not match relation prefix",
                self.name, self.query_type
            )));
        }
        Ok(())
    }

    pub fn accepts_filler(&self, filler_type: &str) -> bool {
        self.filler_types.contains(filler_type)
    }
}

/// A validated, name-unique set of relation schemas, ordered by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaSet {
    schemas: Vec<RelationSchema>,
}

impl SchemaSet {
    pub fn new(mut schemas: Vec<RelationSchema>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &schemas {
            s.validate()?;
            if !seen.insert(s.name.clone()) {
                return Err(Error::Schema(format!("duplicate relation `{}`", s.name)));
            }
        }
        schemas.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(SchemaSet { schemas })
    }

    pub fn iter(&self) -> impl Iterator<Item = &RelationSchema> {
        self.schemas.iter()
    }

    pub fn get(&self, name: &str) -> Option<&RelationSchema> {
        self.schemas
            .binary_search_by(|s| s.name.as_str().cmp(name))
            .ok()
            .map(|i| &self.schemas[i])
    }

    /// Schemas whose subject type is `ty`, in name order.
    pub fn for_type(&self, ty: EntityType) -> impl Iterator<Item = &RelationSchema> {
        self.schemas.iter().filter(move |s| s.query_type == ty)
    }

    pub fn names(&self) -> BTreeSet<String> {
        self.schemas.iter().map(|s| s.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }
}

/// Half-open token range within a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end, "empty token span {start}..{end}");
        TokenSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn overlaps(&self, other: &TokenSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &TokenSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Number of tokens strictly between two non-overlapping spans.
    pub fn gap(&self, other: &TokenSpan) -> usize {
        if self.end <= other.start {
            other.start - self.end
        } else {
            self.start.saturating_sub(other.end)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub begin: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub entity_type: String,
    pub span: TokenSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub doc_id: String,
    pub tokens: Vec<Token>,
    pub entity_spans: Vec<EntitySpan>,
}

impl Sentence {
    pub fn new(doc_id: impl Into<String>, tokens: Vec<Token>, entity_spans: Vec<EntitySpan>) -> Result<Self> {
        let s = Sentence {
            doc_id: doc_id.into(),
            tokens,
            entity_spans,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Error::Schema(format!("sentence in {}: {msg}", self.doc_id));
        for pair in self.tokens.windows(2) {
            if pair[1].begin < pair[0].end {
                return Err(bad(format!(
                    "token offsets not increasing at `{}` ({}) after `{}` ({})",
                    pair[1].text, pair[1].begin, pair[0].text, pair[0].end
                )));
            }
        }
        for t in &self.tokens {
            if t.end < t.begin {
                return Err(bad(format!("token `{}` ends before it begins", t.text)));
            }
        }
        for (i, e) in self.entity_spans.iter().enumerate() {
            if e.span.is_empty() || e.span.end > self.tokens.len() {
                return Err(bad(format!("entity span {:?} outside token range", e.span)));
            }
            for other in &self.entity_spans[i + 1..] {
                if other.entity_type == e.entity_type && other.span.overlaps(&e.span) {
                    return Err(bad(format!("overlapping {} spans", e.entity_type)));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Surface text of a span: token surfaces joined by single spaces.
    pub fn span_text(&self, span: TokenSpan) -> String {
        self.tokens[span.start..span.end]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Character offsets covered by a span.
    pub fn span_offsets(&self, span: TokenSpan) -> (usize, usize) {
        (self.tokens[span.start].begin, self.tokens[span.end - 1].end)
    }

    /// Character offsets of the whole sentence.
    pub fn offsets(&self) -> Option<(usize, usize)> {
        Some((self.tokens.first()?.begin, self.tokens.last()?.end))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub id: String,
    pub name: String,
    pub entity_type: EntityType,
}

impl Query {
    pub fn new(id: impl Into<String>, name: impl Into<String>, entity_type: EntityType) -> Result<Self> {
        let q = Query {
            id: id.into(),
            name: name.into(),
            entity_type,
        };
        if q.name.trim().is_empty() {
            return Err(Error::Schema(format!("query {} has an empty name", q.id)));
        }
        Ok(q)
    }
}

/// A (query mention, filler mention) pair inside one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate<'a> {
    pub query: &'a Query,
    pub sentence: &'a Sentence,
    pub query_span: TokenSpan,
    pub filler_span: TokenSpan,
    pub filler_type: String,
}

impl Candidate<'_> {
    pub fn filler_text(&self) -> String {
        self.sentence.span_text(self.filler_span)
    }
}

/// Module that produced a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Classifier,
    DsPatterns,
    ManualPatterns,
    AltNames,
}

impl Provenance {
    pub const ALL: [Provenance; 4] = [
        Provenance::Classifier,
        Provenance::DsPatterns,
        Provenance::ManualPatterns,
        Provenance::AltNames,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Classifier => "classifier",
            Provenance::DsPatterns => "ds_patterns",
            Provenance::ManualPatterns => "manual_patterns",
            Provenance::AltNames => "alt_names",
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Provenance::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown module `{s}`"))
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Filled slot of a response row.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub doc_id: String,
    pub filler: String,
    pub filler_offsets: (usize, usize),
    pub justification: (usize, usize),
    pub confidence: f64,
    /// Not serialized; `None` for records read back from a file.
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseRecord {
    pub query_id: String,
    pub relation: String,
    pub run_id: String,
    /// `None` is a NIL row.
    pub answer: Option<Answer>,
}

impl ResponseRecord {
    pub fn nil(query_id: impl Into<String>, relation: impl Into<String>, run_id: impl Into<String>) -> Self {
        ResponseRecord {
            query_id: query_id.into(),
            relation: relation.into(),
            run_id: run_id.into(),
            answer: None,
        }
    }

    pub fn is_nil(&self) -> bool {
        self.answer.is_none()
    }

    pub fn confidence(&self) -> Option<f64> {
        self.answer.as_ref().map(|a| a.confidence)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldEntry {
    pub query_id: String,
    pub relation: String,
    pub class_id: String,
    pub filler: String,
    /// `None` accepts any document.
    pub docs: Option<BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbTriple {
    pub relation: String,
    pub subject: String,
    pub object: String,
}
