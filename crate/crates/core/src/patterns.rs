//! Pattern validators.
//!
//! Distant-supervision patterns are the token sequences strictly between the
//! two arguments. Each (pattern, relation) gets the score
//!
//! ```text
//! 0.5 * n(pat, topic(r)) / n(pat)
//!   + 0.5 * n(pat, r) * P(r|s) / (n(pat) * (P(r|s) + P(NIL|s)))
//! ```
//!
//! where `P(.|s)` comes from an averaged multiclass perceptron over the
//! pattern tokens. `n(pat, topic(r))` is counted as the number of occurrences
//! labeled `r`, kept as its own field so a topic model can replace it.
//!
//! Hand-written surface patterns are token sequences over `ARG1`, `ARG2`,
//! literal tokens and `*`, a gap of one to four tokens.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Candidate, Sentence, TokenSpan};
use crate::scalar::Scalar;
use crate::text::CaseMode;

/// Threshold levels tried for every relation.
pub const THRESHOLD_GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

pub const NIL_CLASS: &str = "NIL";

pub const MANUAL_PATTERN_CONFIDENCE: f64 = 0.95;

pub const WILDCARD_MIN: usize = 1;
pub const WILDCARD_MAX: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArgOrder {
    QueryFirst,
    FillerFirst,
}

impl ArgOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            ArgOrder::QueryFirst => "query_first",
            ArgOrder::FillerFirst => "filler_first",
        }
    }
}

impl FromStr for ArgOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "query_first" => Ok(ArgOrder::QueryFirst),
            "filler_first" => Ok(ArgOrder::FillerFirst),
            other => Err(format!("unknown argument order `{other}`")),
        }
    }
}

/// Intertext pattern. Identity includes the argument order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    pub tokens: Vec<String>,
    pub order: ArgOrder,
}

impl Pattern {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.order {
            ArgOrder::QueryFirst => write!(f, "ARG1 {} ARG2", self.text()),
            ArgOrder::FillerFirst => write!(f, "ARG2 {} ARG1", self.text()),
        }
    }
}

pub fn extract_intertext_pattern(sentence: &Sentence, query_span: TokenSpan, filler_span: TokenSpan) -> Pattern {
    let (order, left, right) = if query_span.start < filler_span.start {
        (ArgOrder::QueryFirst, query_span, filler_span)
    } else {
        (ArgOrder::FillerFirst, filler_span, query_span)
    };
    let tokens = sentence.tokens[left.end.min(right.start)..right.start]
        .iter()
        .map(|t| t.text.clone())
        .collect();
    Pattern { tokens, order }
}

/// A pattern occurrence labeled with its relation, or `None` for NIL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPattern {
    pub pattern: Pattern,
    pub relation: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternCounts {
    /// All occurrences, NIL included.
    pub total: u64,
    pub by_relation: BTreeMap<String, u64>,
    pub by_topic: BTreeMap<String, u64>,
}

impl PatternCounts {
    pub fn relation(&self, r: &str) -> u64 {
        self.by_relation.get(r).copied().unwrap_or(0)
    }

    pub fn topic(&self, r: &str) -> u64 {
        self.by_topic.get(r).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternStats {
    pub table: BTreeMap<Pattern, PatternCounts>,
}

impl PatternStats {
    pub fn count(labeled: &[LabeledPattern]) -> Self {
        let mut table: BTreeMap<Pattern, PatternCounts> = BTreeMap::new();
        for lp in labeled {
            let c = table.entry(lp.pattern.clone()).or_default();
            c.total += 1;
            if let Some(r) = &lp.relation {
                *c.by_relation.entry(r.clone()).or_insert(0) += 1;
                *c.by_topic.entry(r.clone()).or_insert(0) += 1;
            }
        }
        PatternStats { table }
    }

    pub fn get(&self, p: &Pattern) -> Option<&PatternCounts> {
        self.table.get(p)
    }

    /// Rows `<arg_order>\t<tokens>\t<relation|*>\t<count>\t<topic count>`;
    /// the `*` row carries n(pat).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, c) in &self.table {
            let _ = writeln!(out, "{}\t{}\t*\t{}\t{}", p.order.as_str(), p.text(), c.total, c.total);
            for (r, n) in &c.by_relation {
                let _ = writeln!(out, "{}\t{}\t{r}\t{n}\t{}", p.order.as_str(), p.text(), c.topic(r));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptronConfig {
    pub epochs: usize,
    pub seed: u64,
    pub temperature: f64,
}

impl Default for PerceptronConfig {
    fn default() -> Self {
        PerceptronConfig {
            epochs: 10,
            seed: 42,
            temperature: 1.0,
        }
    }
}

/// Averaged multiclass perceptron over pattern features, with softmax
/// probabilities. The last class is always NIL.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternRelationModel<T> {
    pub classes: Vec<String>,
    pub weights: BTreeMap<String, Vec<T>>,
    pub temperature: T,
    pub config: PerceptronConfig,
}

fn pattern_features(p: &Pattern) -> Vec<String> {
    let mut f: Vec<String> = p.tokens.iter().map(|t| format!("tok={t}")).collect();
    f.push(format!("pat={}", p.text()));
    f.push(format!("order={}", p.order.as_str()));
    f
}

impl<T: Scalar> PatternRelationModel<T> {
    pub fn train(labeled: &[LabeledPattern], config: &PerceptronConfig) -> Result<Self> {
        if !labeled.iter().any(|lp| lp.relation.is_none()) {
            return Err(Error::Training("pattern model needs NIL examples".into()));
        }
        let mut classes: Vec<String> = labeled.iter().filter_map(|lp| lp.relation.clone()).collect();
        classes.sort();
        classes.dedup();
        let nil = classes.len();
        classes.push(NIL_CLASS.to_string());

        let mut vocab: BTreeMap<String, usize> = BTreeMap::new();
        let rows: Vec<(Vec<usize>, usize)> = labeled
            .iter()
            .map(|lp| {
                let feats = pattern_features(&lp.pattern)
                    .into_iter()
                    .map(|f| {
                        let next = vocab.len();
                        *vocab.entry(f).or_insert(next)
                    })
                    .collect();
                let class = match &lp.relation {
                    Some(r) => classes[..nil].binary_search(r).expect("relation is a class"),
                    None => nil,
                };
                (feats, class)
            })
            .collect();

        let k = classes.len();
        let mut w = vec![vec![T::zero(); k]; vocab.len()];
        // running sum of (step * update) for the averaging trick
        let mut u = vec![vec![T::zero(); k]; vocab.len()];
        let mut step = T::one();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let (feats, gold) = &rows[i];
                let predicted = argmax(&scores(&w, feats, k));
                if predicted != *gold {
                    for &f in feats {
                        w[f][*gold] = w[f][*gold] + T::one();
                        w[f][predicted] = w[f][predicted] - T::one();
                        u[f][*gold] = u[f][*gold] + step;
                        u[f][predicted] = u[f][predicted] - step;
                    }
                }
                step = step + T::one();
            }
        }
        let weights = vocab
            .into_iter()
            .map(|(f, i)| {
                let avg: Vec<T> = (0..k).map(|c| w[i][c] - u[i][c] / step).collect();
                (f, avg)
            })
            .collect();
        Ok(PatternRelationModel {
            classes,
            weights,
            temperature: T::lit(config.temperature),
            config: *config,
        })
    }

    pub fn class_scores(&self, p: &Pattern) -> Vec<T> {
        let mut s = vec![T::zero(); self.classes.len()];
        for f in pattern_features(p) {
            if let Some(w) = self.weights.get(&f) {
                for (acc, &x) in s.iter_mut().zip(w) {
                    *acc = *acc + x;
                }
            }
        }
        s
    }

    pub fn predict_class(&self, p: &Pattern) -> &str {
        &self.classes[argmax(&self.class_scores(p))]
    }

    /// Softmax over averaged class scores.
    pub fn probabilities(&self, p: &Pattern) -> Vec<T> {
        let s = self.class_scores(p);
        let max = s.iter().copied().fold(T::neg_infinity(), T::max);
        let e: Vec<T> = s.iter().map(|&x| ((x - max) / self.temperature).exp()).collect();
        let z: T = e.iter().copied().sum();
        e.into_iter().map(|x| x / z).collect()
    }

    /// (P(r|s), P(NIL|s)); P(r|s) is 0 for a relation never seen in training.
    pub fn relation_and_nil(&self, p: &Pattern, relation: &str) -> (T, T) {
        let probs = self.probabilities(p);
        let nil = probs[probs.len() - 1];
        let r = self.classes[..self.classes.len() - 1]
            .binary_search_by(|c| c.as_str().cmp(relation))
            .map(|i| probs[i])
            .unwrap_or_else(|_| T::zero());
        (r, nil)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "#perceptron\tclasses={}\ttemperature={}\tepochs={}\tseed={}",
            self.classes.join(","),
            self.temperature,
            self.config.epochs,
            self.config.seed
        );
        for (f, w) in &self.weights {
            let ws: Vec<String> = w.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "{f}\t{}", ws.join(" "));
        }
        out
    }
}

fn scores<T: Scalar>(w: &[Vec<T>], feats: &[usize], k: usize) -> Vec<T> {
    let mut s = vec![T::zero(); k];
    for &f in feats {
        for (acc, &x) in s.iter_mut().zip(&w[f]) {
            *acc = *acc + x;
        }
    }
    s
}

/// Index of the largest score; ties go to the lowest index.
fn argmax<T: Scalar>(s: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in s.iter().enumerate().skip(1) {
        if x > s[best] {
            best = i;
        }
    }
    best
}

/// Counts the stats table and trains the relation model.
pub fn fit_pattern_model<T: Scalar>(
    labeled: &[LabeledPattern],
    config: &PerceptronConfig,
) -> Result<(PatternStats, PatternRelationModel<T>)> {
    let model = PatternRelationModel::train(labeled, config)?;
    Ok((PatternStats::count(labeled), model))
}

/// Pattern score from raw counts and perceptron probabilities.
pub fn score_pattern<T: Scalar>(n_pat: u64, n_pat_r: u64, n_topic: u64, p_r: T, p_nil: T) -> Result<T> {
    if n_pat == 0 {
        return Err(Error::UndefinedPattern("n(pat) = 0".into()));
    }
    let half = T::lit(0.5);
    let n = T::from_count(n_pat);
    let first = half * T::from_count(n_topic) / n;
    let denom = p_r + p_nil;
    let second = if denom > T::zero() {
        half * T::from_count(n_pat_r) * p_r / (n * denom)
    } else {
        T::zero()
    };
    Ok(first + second)
}

/// Score of `pattern` for `relation` from a fitted stats table and model.
pub fn score_with<T: Scalar>(
    pattern: &Pattern,
    relation: &str,
    stats: &PatternStats,
    model: &PatternRelationModel<T>,
) -> Result<T> {
    let c = stats
        .get(pattern)
        .ok_or_else(|| Error::UndefinedPattern(pattern.to_string()))?;
    let (p_r, p_nil) = model.relation_and_nil(pattern, relation);
    score_pattern(c.total, c.relation(relation), c.topic(relation), p_r, p_nil)
}

/// Scores of every (relation, pattern) with at least one labeled occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPatternTable<T> {
    by_pattern: BTreeMap<Pattern, BTreeMap<String, T>>,
}

impl<T> Default for ScoredPatternTable<T> {
    fn default() -> Self {
        ScoredPatternTable {
            by_pattern: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> ScoredPatternTable<T> {
    pub fn build(stats: &PatternStats, model: &PatternRelationModel<T>) -> Result<Self> {
        let mut by_pattern = BTreeMap::new();
        for (p, c) in &stats.table {
            let mut scores = BTreeMap::new();
            for r in c.by_relation.keys() {
                scores.insert(r.clone(), score_with(p, r, stats, model)?);
            }
            if !scores.is_empty() {
                by_pattern.insert(p.clone(), scores);
            }
        }
        Ok(ScoredPatternTable { by_pattern })
    }

    pub fn insert(&mut self, relation: &str, pattern: Pattern, score: T) {
        self.by_pattern
            .entry(pattern)
            .or_default()
            .insert(relation.to_string(), score);
    }

    pub fn scores(&self, p: &Pattern) -> Option<&BTreeMap<String, T>> {
        self.by_pattern.get(p)
    }

    pub fn relations(&self) -> std::collections::BTreeSet<&str> {
        self.by_pattern
            .values()
            .flat_map(|m| m.keys().map(String::as_str))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.by_pattern.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_pattern.is_empty()
    }

    /// `<relation>\t<arg_order>\t<pattern tokens>\t<score>`, sorted by
    /// relation then pattern.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<(&str, &Pattern, T)> = self
            .by_pattern
            .iter()
            .flat_map(|(p, m)| m.iter().map(move |(r, &s)| (r.as_str(), p, s)))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(b.0).then_with(|| a.1.cmp(b.1)));
        let mut out = String::new();
        for (r, p, s) in rows {
            let _ = writeln!(out, "{r}\t{}\t{}\t{s}", p.order.as_str(), p.text());
        }
        out
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut table = ScoredPatternTable::default();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(Error::parse(
                    source,
                    i + 1,
                    format!("expected 4 fields, found {}", f.len()),
                ));
            }
            let order: ArgOrder = f[1].parse().map_err(|e: String| Error::parse(source, i + 1, e))?;
            let score: T = f[3]
                .parse()
                .map_err(|_| Error::parse(source, i + 1, format!("bad score `{}`", f[3])))?;
            let pattern = Pattern {
                tokens: f[2].split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect(),
                order,
            };
            table.insert(f[0], pattern, score);
        }
        Ok(table)
    }
}

/// Relations whose score for the candidate's intertext pattern reaches the
/// relation's threshold. Relations without a threshold use `default_threshold`.
pub fn apply_ds_patterns<T: Scalar>(
    pattern: &Pattern,
    table: &ScoredPatternTable<T>,
    thresholds: &BTreeMap<String, T>,
    default_threshold: T,
) -> Vec<(String, T)> {
    let Some(scores) = table.scores(pattern) else {
        return Vec::new();
    };
    scores
        .iter()
        .filter(|(r, &s)| s >= thresholds.get(*r).copied().unwrap_or(default_threshold))
        .map(|(r, &s)| (r.clone(), s))
        .collect()
}

// ------------------------------------------------------- surface patterns

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    Literal(String),
    Arg1,
    Arg2,
    Wildcard { min: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfacePattern {
    pub relation: String,
    pub elements: Vec<Element>,
}

pub fn parse_surface_pattern(relation: &str, text: &str) -> Result<SurfacePattern, String> {
    let mut elements = Vec::new();
    for tok in text.split_whitespace() {
        let e = match tok {
            "ARG1" => Element::Arg1,
            "ARG2" => Element::Arg2,
            "*" => Element::Wildcard {
                min: WILDCARD_MIN,
                max: WILDCARD_MAX,
            },
            lit => Element::Literal(lit.to_string()),
        };
        if matches!(e, Element::Wildcard { .. }) && matches!(elements.last(), Some(Element::Wildcard { .. })) {
            return Err(format!("adjacent wildcards in `{text}`"));
        }
        elements.push(e);
    }
    for (arg, name) in [(Element::Arg1, "ARG1"), (Element::Arg2, "ARG2")] {
        let n = elements.iter().filter(|e| **e == arg).count();
        if n != 1 {
            return Err(format!("`{text}` must contain {name} exactly once, found {n}"));
        }
    }
    Ok(SurfacePattern {
        relation: relation.to_string(),
        elements,
    })
}

/// `<relation>\t<pattern text>` per line.
pub fn parse_surface_patterns(text: &str, source: &str) -> Result<Vec<SurfacePattern>> {
    crate::io::parse_pairs(text, source)?
        .into_iter()
        .enumerate()
        .map(|(i, (rel, pat))| parse_surface_pattern(&rel, &pat).map_err(|e| Error::parse(source, i + 1, e)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum View<'a> {
    Arg1,
    Arg2,
    Word(&'a str),
}

/// The sentence with each argument span collapsed to one placeholder.
fn argument_view(sentence: &Sentence, arg1: TokenSpan, arg2: TokenSpan) -> Vec<View<'_>> {
    let mut out = Vec::with_capacity(sentence.len());
    let mut i = 0;
    while i < sentence.len() {
        if i == arg1.start {
            out.push(View::Arg1);
            i = arg1.end;
        } else if i == arg2.start {
            out.push(View::Arg2);
            i = arg2.end;
        } else {
            out.push(View::Word(&sentence.tokens[i].text));
            i += 1;
        }
    }
    out
}

fn match_at(elements: &[Element], view: &[View<'_>], pos: usize, mode: CaseMode, relaxed: bool) -> bool {
    let Some((first, rest)) = elements.split_first() else {
        return true;
    };
    match first {
        Element::Wildcard { min, max } => {
            let max = if relaxed { usize::MAX } else { *max };
            let mut len = *min;
            while len <= max && pos + len <= view.len() {
                // a gap never swallows an argument
                if !matches!(view[pos + len - 1], View::Word(_)) {
                    return false;
                }
                if match_at(rest, view, pos + len, mode, relaxed) {
                    return true;
                }
                len += 1;
            }
            false
        }
        e => {
            let ok = match (e, view.get(pos)) {
                (Element::Arg1, Some(View::Arg1)) | (Element::Arg2, Some(View::Arg2)) => true,
                (Element::Literal(l), Some(View::Word(w))) => mode.eq(l, w),
                _ => false,
            };
            ok && match_at(rest, view, pos + 1, mode, relaxed)
        }
    }
}

impl SurfacePattern {
    /// Whether the pattern occurs contiguously with ARG1 on `arg1` and ARG2
    /// on `arg2`.
    pub fn matches_spans(&self, sentence: &Sentence, arg1: TokenSpan, arg2: TokenSpan, mode: CaseMode) -> bool {
        self.matches_impl(sentence, arg1, arg2, mode, false)
    }

    fn matches_impl(
        &self,
        sentence: &Sentence,
        arg1: TokenSpan,
        arg2: TokenSpan,
        mode: CaseMode,
        relaxed: bool,
    ) -> bool {
        if arg1.overlaps(&arg2) {
            return false;
        }
        let view = argument_view(sentence, arg1, arg2);
        (0..view.len()).any(|start| match_at(&self.elements, &view, start, mode, relaxed))
    }
}

pub fn match_surface_pattern(pattern: &SurfacePattern, candidate: &Candidate<'_>, mode: CaseMode) -> bool {
    pattern.matches_spans(candidate.sentence, candidate.query_span, candidate.filler_span, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Token;
    use proptest::prelude::*;

    fn sentence(words: &str) -> Sentence {
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

    fn pat(tokens: &str, order: ArgOrder) -> Pattern {
        Pattern {
            tokens: tokens.split_whitespace().map(str::to_string).collect(),
            order,
        }
    }

    fn labeled(tokens: &str, rel: Option<&str>) -> LabeledPattern {
        LabeledPattern {
            pattern: pat(tokens, ArgOrder::QueryFirst),
            relation: rel.map(str::to_string),
        }
    }

    #[test]
    fn gadahn_sentence_intertext() {
        let s = sentence("One Pakistani intelligence official said he is Adam Gadahn , a California native and the first U.S. citizen to be charged");
        let p = extract_intertext_pattern(&s, TokenSpan::new(7, 9), TokenSpan::new(16, 17));
        assert_eq!(p.text(), ", a California native and the first");
        assert_eq!(p.order, ArgOrder::QueryFirst);

        let adj = extract_intertext_pattern(&s, TokenSpan::new(7, 9), TokenSpan::new(9, 10));
        assert!(adj.tokens.is_empty());
        let rev = extract_intertext_pattern(&s, TokenSpan::new(7, 9), TokenSpan::new(0, 1));
        assert_eq!(rev.order, ArgOrder::FillerFirst);
    }

    #[test]
    fn stats_counting() {
        let mut data: Vec<LabeledPattern> = (0..6).map(|_| labeled("was born in", Some("r"))).collect();
        data.extend((0..4).map(|_| labeled("was born in", None)));
        data.push(labeled("visited", None));
        let stats = PatternStats::count(&data);
        let c = stats.get(&pat("was born in", ArgOrder::QueryFirst)).unwrap();
        assert_eq!((c.total, c.relation("r")), (10, 6));
        let v = stats.get(&pat("visited", ArgOrder::QueryFirst)).unwrap();
        assert_eq!(v.relation("r"), 0);
        assert!(v.by_relation.is_empty());
    }

    #[test]
    fn perceptron_requires_nil() {
        let data = vec![labeled("was born in", Some("r"))];
        assert!(fit_pattern_model::<f64>(&data, &PerceptronConfig::default()).is_err());
    }

    #[test]
    fn perceptron_separable_accuracy() {
        let mut data = Vec::new();
        for t in ["was born in", "born in", "a native of"] {
            data.push(labeled(t, Some("per:city_of_birth")));
        }
        for t in ["works for", "is employed by", "an employee of"] {
            data.push(labeled(t, Some("per:employee_of")));
        }
        for t in ["met", "visited", "talked to"] {
            data.push(labeled(t, None));
        }
        let (_, m) = fit_pattern_model::<f64>(&data, &PerceptronConfig::default()).unwrap();
        let correct = data
            .iter()
            .filter(|lp| m.predict_class(&lp.pattern) == lp.relation.as_deref().unwrap_or(NIL_CLASS))
            .count();
        assert_eq!(correct, data.len());
        for lp in &data {
            let p = m.probabilities(&lp.pattern);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn score_formula_cases() {
        let s: f64 = score_pattern(10, 6, 6, 0.8, 0.2).unwrap();
        assert!((s - 0.54).abs() < 1e-12);
        assert_eq!(score_pattern(10, 0, 0, 0.8f64, 0.2).unwrap(), 0.0);
        assert_eq!(score_pattern(7, 7, 7, 0.6f64, 0.0).unwrap(), 1.0);
        assert!(matches!(
            score_pattern(0, 0, 0, 0.5f64, 0.5),
            Err(Error::UndefinedPattern(_))
        ));
        assert_eq!(score_pattern(4, 2, 2, 0.0f64, 0.0).unwrap(), 0.25);
    }

    #[test]
    fn threshold_application() {
        let p = pat("was born in", ArgOrder::QueryFirst);
        let mut table = ScoredPatternTable::<f64>::default();
        table.insert("r", p.clone(), 0.54);
        let mut th = BTreeMap::new();
        th.insert("r".to_string(), 0.5);
        assert_eq!(apply_ds_patterns(&p, &table, &th, 0.1), vec![("r".to_string(), 0.54)]);
        th.insert("r".to_string(), 0.7);
        assert!(apply_ds_patterns(&p, &table, &th, 0.1).is_empty());
        assert!(apply_ds_patterns(&pat("met", ArgOrder::QueryFirst), &table, &th, 0.1).is_empty());
        // order is part of the identity
        assert!(apply_ds_patterns(&pat("was born in", ArgOrder::FillerFirst), &table, &th, 0.1).is_empty());
    }

    #[test]
    fn scored_table_roundtrip() {
        let mut table = ScoredPatternTable::<f64>::default();
        table.insert("r", pat("was born in", ArgOrder::QueryFirst), 0.54);
        table.insert("r", pat("", ArgOrder::FillerFirst), 0.125);
        table.insert("q", pat(", a", ArgOrder::QueryFirst), 1.0);
        let text = table.to_text();
        assert_eq!(ScoredPatternTable::<f64>::parse(&text, "t").unwrap(), table);
    }

    #[test]
    fn surface_pattern_parsing() {
        let p = parse_surface_pattern("r", "ARG1 was born in ARG2").unwrap();
        assert_eq!(
            p.elements,
            vec![
                Element::Arg1,
                Element::Literal("was".into()),
                Element::Literal("born".into()),
                Element::Literal("in".into()),
                Element::Arg2
            ]
        );
        let p = parse_surface_pattern("r", "ARG1 , * of ARG2").unwrap();
        assert_eq!(p.elements[2], Element::Wildcard { min: 1, max: 4 });
        assert!(parse_surface_pattern("r", "ARG1 knows him").is_err());
        assert!(parse_surface_pattern("r", "ARG1 and ARG1 ARG2").is_err());
        assert!(parse_surface_pattern("r", "ARG1 * * ARG2").is_err());
    }

    #[test]
    fn wildcard_matching() {
        let p = parse_surface_pattern("r", "ARG1 , * of ARG2").unwrap();
        let s = sentence("IBM , a maker of computers");
        assert!(p.matches_spans(&s, TokenSpan::new(0, 1), TokenSpan::new(5, 6), CaseMode::Sensitive));
        let s = sentence("IBM , of computers");
        assert!(!p.matches_spans(&s, TokenSpan::new(0, 1), TokenSpan::new(3, 4), CaseMode::Sensitive));
        let s = sentence("IBM , a b c d e of computers");
        assert!(!p.matches_spans(&s, TokenSpan::new(0, 1), TokenSpan::new(8, 9), CaseMode::Sensitive));
        assert!(p.matches_impl(
            &s,
            TokenSpan::new(0, 1),
            TokenSpan::new(8, 9),
            CaseMode::Sensitive,
            true
        ));
        let s = sentence("IBM , a b c d of computers");
        assert!(p.matches_spans(&s, TokenSpan::new(0, 1), TokenSpan::new(7, 8), CaseMode::Sensitive));
    }

    #[test]
    fn multi_token_arguments_and_case() {
        let p = parse_surface_pattern("r", "ARG1 was born in ARG2").unwrap();
        let s = sentence("Yesterday Anna Meyer was born in New York City");
        assert!(p.matches_spans(&s, TokenSpan::new(1, 3), TokenSpan::new(6, 9), CaseMode::Sensitive));
        assert!(!p.matches_spans(&s, TokenSpan::new(6, 9), TokenSpan::new(1, 3), CaseMode::Sensitive));
        let s = sentence("Anna WAS BORN IN Paris");
        assert!(!p.matches_spans(&s, TokenSpan::new(0, 1), TokenSpan::new(4, 5), CaseMode::Sensitive));
        assert!(p.matches_spans(&s, TokenSpan::new(0, 1), TokenSpan::new(4, 5), CaseMode::Fold));
    }

    proptest! {
        #[test]
        fn score_in_unit_interval(
            n in 1u64..1000,
            a in 0.0f64..=1.0, b in 0.0f64..=1.0,
            pr in 0.0f64..=1.0, pn in 0.0f64..=1.0,
        ) {
            let n_r = (a * n as f64).floor() as u64;
            let n_t = (b * n as f64).floor() as u64;
            let (pr, pn) = if pr + pn > 1.0 { (pr / (pr + pn), pn / (pr + pn)) } else { (pr, pn) };
            let s = score_pattern(n, n_r, n_t, pr, pn).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn score_monotone_in_probability(
            n in 1u64..200, r in 0u64..200, t in 0u64..200,
            p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, pn in 0.0f64..=1.0,
        ) {
            let (r, t) = (r.min(n), t.min(n));
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let a = score_pattern(n, r, t, lo, pn).unwrap();
            let b = score_pattern(n, r, t, hi, pn).unwrap();
            prop_assert!(b >= a - 1e-15);
        }

        #[test]
        fn relaxed_wildcards_subsume_bounded(
            words in proptest::collection::vec(prop_oneof![Just("a"), Just("b"), Just(","), Just("of")], 2..12),
            gap_lits in proptest::collection::vec(prop_oneof![Just("a"), Just("of"), Just("*")], 0..4),
        ) {
            let text = words.join(" ");
            let s = sentence(&text);
            let mut pat_text = vec!["ARG1"];
            let mut last_star = false;
            for g in &gap_lits {
                if *g == "*" && last_star { continue; }
                last_star = *g == "*";
                pat_text.push(g);
            }
            pat_text.push("ARG2");
            let p = parse_surface_pattern("r", &pat_text.join(" ")).unwrap();
            let n = s.len();
            for i in 0..n {
                for j in 0..n {
                    if i == j { continue; }
                    let (a1, a2) = (TokenSpan::new(i, i + 1), TokenSpan::new(j, j + 1));
                    if p.matches_spans(&s, a1, a2, CaseMode::Sensitive) {
                        prop_assert!(p.matches_impl(&s, a1, a2, CaseMode::Sensitive, true));
                    }
                }
            }
        }
    }
}
