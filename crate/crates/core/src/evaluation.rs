//! Micro-averaged scorer and the greedy per-relation parameter tuner.

use std::collections::{BTreeMap, BTreeSet};

use crate::alias::AnchorLexicon;
use crate::error::{Error, Result};
use crate::model::{GoldEntry, ResponseRecord};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScoreFlags {
    pub anydoc: bool,
    pub lowercase: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub returned: u64,
    pub correct: u64,
    pub gold_classes: u64,
}

impl<T: Scalar> ScoreReport<T> {
    pub fn from_counts(returned: u64, correct: u64, gold_classes: u64) -> Self {
        let ratio = |a: u64, b: u64| {
            if b == 0 {
                T::zero()
            } else {
                T::from_count(a) / T::from_count(b)
            }
        };
        let precision = ratio(correct, returned);
        let recall = ratio(correct, gold_classes);
        let sum = precision + recall;
        let f1 = if sum > T::zero() {
            T::lit(2.0) * precision * recall / sum
        } else {
            T::zero()
        };
        ScoreReport {
            precision,
            recall,
            f1,
            returned,
            correct,
            gold_classes,
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "P={:.4} R={:.4} F1={:.4} returned={} correct={} gold={}",
            self.precision, self.recall, self.f1, self.returned, self.correct, self.gold_classes
        )
    }
}

/// Filler comparison key: link translation through the lexicon when one is
/// given, lowercased only under the lowercase flag.
fn scoring_key(filler: &str, lexicon: Option<&AnchorLexicon>, lowercase: bool) -> String {
    let s = lexicon.and_then(|l| l.top_page(filler)).unwrap_or(filler);
    if lowercase {
        s.to_lowercase()
    } else {
        s.to_string()
    }
}

/// Scores a run against gold. `known_relations`, when given, flags responses
/// for relations outside it: they still count as returned and incorrect.
pub fn score_run<T: Scalar>(
    responses: &[ResponseRecord],
    gold: &[GoldEntry],
    flags: ScoreFlags,
    lexicon: Option<&AnchorLexicon>,
    known_relations: Option<&BTreeSet<String>>,
) -> ScoreReport<T> {
    // (query, relation) -> entries
    let mut by_slot: BTreeMap<(&str, &str), Vec<(&GoldEntry, String)>> = BTreeMap::new();
    let mut classes: BTreeSet<(&str, &str, &str)> = BTreeSet::new();
    for g in gold {
        classes.insert((&g.query_id, &g.relation, &g.class_id));
        by_slot
            .entry((&g.query_id, &g.relation))
            .or_default()
            .push((g, scoring_key(&g.filler, lexicon, flags.lowercase)));
    }

    let mut credited: BTreeSet<(&str, &str, &str)> = BTreeSet::new();
    let mut returned = 0u64;
    let mut correct = 0u64;
    for r in responses {
        let Some(answer) = &r.answer else { continue };
        returned += 1;
        if known_relations.is_some_and(|k| !k.contains(&r.relation)) {
            log::warn!("response for unknown relation `{}` (query {})", r.relation, r.query_id);
            continue;
        }
        let Some(entries) = by_slot.get(&(r.query_id.as_str(), r.relation.as_str())) else {
            continue;
        };
        let key = scoring_key(&answer.filler, lexicon, flags.lowercase);
        let hit = entries.iter().find(|(g, gk)| {
            *gk == key
                && (flags.anydoc || g.docs.as_ref().is_none_or(|d| d.contains(&answer.doc_id)))
                && !credited.contains(&(g.query_id.as_str(), g.relation.as_str(), g.class_id.as_str()))
        });
        if let Some((g, _)) = hit {
            credited.insert((&g.query_id, &g.relation, &g.class_id));
            correct += 1;
        }
    }
    ScoreReport::from_counts(returned, correct, classes.len() as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunerState<V, T> {
    pub params: BTreeMap<String, V>,
    pub f1: T,
    pub grid: Vec<V>,
    pub iterations: usize,
}

pub const DEFAULT_TUNE_ITERATIONS: usize = 2;

fn checked<T: Scalar>(f1: T) -> Result<T> {
    if f1.is_nan() || f1 < T::zero() || f1 > T::one() {
        return Err(Error::Contract(format!("evaluate returned {f1}, outside [0, 1]")));
    }
    Ok(f1)
}

/// Coordinate-wise greedy search. Every relation starts at the first grid
/// value; each (relation, value) substitution is kept as soon as it strictly
/// improves the score. Relations are visited in lexicographic order.
pub fn greedy_tune<V, T, F>(
    relations: &[String],
    grid: &[V],
    mut evaluate: F,
    iterations: usize,
) -> Result<TunerState<V, T>>
where
    V: Clone,
    T: Scalar,
    F: FnMut(&BTreeMap<String, V>) -> T,
{
    let Some(first) = grid.first() else {
        return Err(Error::Contract("empty tuning grid".into()));
    };
    let order: BTreeSet<&String> = relations.iter().collect();
    let mut params: BTreeMap<String, V> = order.iter().map(|r| ((*r).clone(), first.clone())).collect();
    let mut f1 = checked(evaluate(&params))?;
    for _ in 0..iterations {
        for r in &order {
            for v in grid {
                let mut trial = params.clone();
                trial.insert((*r).clone(), v.clone());
                let f = checked(evaluate(&trial))?;
                if f > f1 {
                    f1 = f;
                    params = trial;
                }
            }
        }
    }
    Ok(TunerState {
        params,
        f1,
        grid: grid.to_vec(),
        iterations,
    })
}
