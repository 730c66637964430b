//! Token-sequence matching shared by retrieval, query matching and the
//! alternate-names component.

use std::borrow::Cow;

use crate::model::{Token, TokenSpan};

/// Whether token comparison folds case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CaseMode {
    #[default]
    Sensitive,
    Fold,
}

impl CaseMode {
    pub fn from_fold(fold: bool) -> Self {
        if fold {
            CaseMode::Fold
        } else {
            CaseMode::Sensitive
        }
    }

    pub fn key<'a>(self, s: &'a str) -> Cow<'a, str> {
        match self {
            CaseMode::Sensitive => Cow::Borrowed(s),
            CaseMode::Fold => Cow::Owned(s.to_lowercase()),
        }
    }

    pub fn eq(self, a: &str, b: &str) -> bool {
        match self {
            CaseMode::Sensitive => a == b,
            CaseMode::Fold => a == b || a.to_lowercase() == b.to_lowercase(),
        }
    }
}

/// Splits a name or phrase into whitespace-separated tokens.
pub fn phrase_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Start indices of every occurrence of `phrase` in `tokens`.
pub fn find_phrase<S: AsRef<str>>(tokens: &[Token], phrase: &[S], mode: CaseMode) -> Vec<usize> {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return Vec::new();
    }
    (0..=tokens.len() - phrase.len())
        .filter(|&i| {
            phrase
                .iter()
                .zip(&tokens[i..])
                .all(|(p, t)| mode.eq(p.as_ref(), &t.text))
        })
        .collect()
}

/// Spans of every occurrence of `phrase` in `tokens`.
pub fn phrase_spans<S: AsRef<str>>(tokens: &[Token], phrase: &[S], mode: CaseMode) -> Vec<TokenSpan> {
    find_phrase(tokens, phrase, mode)
        .into_iter()
        .map(|i| TokenSpan::new(i, i + phrase.len()))
        .collect()
}

pub fn contains_phrase<S: AsRef<str>>(tokens: &[Token], phrase: &[S], mode: CaseMode) -> bool {
    !find_phrase(tokens, phrase, mode).is_empty()
}
