//! Post-processing: merge validator outputs, collapse equivalent fillers,
//! enforce single-slot arity and emit the final rows.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::alias::AnchorLexicon;
use crate::error::{Error, Result};
use crate::model::{Arity, Provenance, Query, ResponseRecord, SchemaSet};

/// Link translation when the lexicon knows the surface form, else lowercase.
pub fn normalize_filler(filler: &str, lexicon: Option<&AnchorLexicon>) -> String {
    match lexicon.and_then(|l| l.top_page(filler)) {
        Some(page) => page.to_string(),
        None => filler.to_lowercase(),
    }
}

/// Surface form to normal form, filled lazily.
#[derive(Debug, Default)]
pub struct NormalFormTable<'l> {
    lexicon: Option<&'l AnchorLexicon>,
    cache: BTreeMap<String, String>,
}

impl<'l> NormalFormTable<'l> {
    pub fn new(lexicon: Option<&'l AnchorLexicon>) -> Self {
        NormalFormTable {
            lexicon,
            cache: BTreeMap::new(),
        }
    }

    pub fn get(&mut self, filler: &str) -> &str {
        if !self.cache.contains_key(filler) {
            let n = normalize_filler(filler, self.lexicon);
            self.cache.insert(filler.to_string(), n);
        }
        &self.cache[filler]
    }
}

fn module_rank(p: Option<Provenance>, order: &[Provenance]) -> usize {
    p.and_then(|p| order.iter().position(|&o| o == p))
        .unwrap_or(order.len())
}

/// Ordering where the preferred record comes first: higher confidence, then
/// earlier module in `order`, then smaller doc id.
fn preference(a: &ResponseRecord, b: &ResponseRecord, order: &[Provenance]) -> Ordering {
    let (x, y) = (a.answer.as_ref().unwrap(), b.answer.as_ref().unwrap());
    y.confidence
        .total_cmp(&x.confidence)
        .then_with(|| module_rank(x.provenance, order).cmp(&module_rank(y.provenance, order)))
        .then_with(|| x.doc_id.cmp(&y.doc_id))
}

/// Union of all module outputs with one record per
/// (query, relation, normalized filler). NIL rows are dropped; `emit` adds
/// them back. Output is sorted by that key.
pub fn merge_and_dedup(
    lists: &[Vec<ResponseRecord>],
    lexicon: Option<&AnchorLexicon>,
    module_order: &[Provenance],
) -> Vec<ResponseRecord> {
    let mut table = NormalFormTable::new(lexicon);
    let mut best: BTreeMap<(String, String, String), ResponseRecord> = BTreeMap::new();
    for r in lists.iter().flatten() {
        let Some(a) = &r.answer else { continue };
        let key = (r.query_id.clone(), r.relation.clone(), table.get(&a.filler).to_string());
        match best.get_mut(&key) {
            Some(cur) => {
                if preference(r, cur, module_order) == Ordering::Less {
                    *cur = r.clone();
                }
            }
            None => {
                best.insert(key, r.clone());
            }
        }
    }
    best.into_values().collect()
}

/// Keeps only the most confident record per (query, single-arity relation).
/// List relations and relations outside the schema set pass through.
pub fn enforce_arity(
    records: Vec<ResponseRecord>,
    schemas: &SchemaSet,
    module_order: &[Provenance],
) -> Vec<ResponseRecord> {
    let mut single: BTreeMap<(String, String), ResponseRecord> = BTreeMap::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let is_single = schemas.get(&r.relation).is_some_and(|s| s.arity == Arity::Single);
        if !is_single || r.is_nil() {
            out.push(r);
            continue;
        }
        let key = (r.query_id.clone(), r.relation.clone());
        match single.get_mut(&key) {
            Some(cur) => {
                if preference(&r, cur, module_order) == Ordering::Less {
                    *cur = r;
                }
            }
            None => {
                single.insert(key, r);
            }
        }
    }
    out.extend(single.into_values());
    out
}

/// Final rows: answers stamped with `run_id`, plus a NIL row for every
/// applicable relation of every query that has no answer. Sorted by
/// (query id, relation); answers within a slot keep their relative order.
pub fn emit(
    records: Vec<ResponseRecord>,
    queries: &[Query],
    schemas: &SchemaSet,
    run_id: &str,
) -> Result<Vec<ResponseRecord>> {
    let known: BTreeSet<&str> = queries.iter().map(|q| q.id.as_str()).collect();
    let mut answered: BTreeSet<(String, String)> = BTreeSet::new();
    let mut rows = Vec::with_capacity(records.len());
    for mut r in records {
        if !known.contains(r.query_id.as_str()) {
            return Err(Error::Emit(format!("record references unknown query `{}`", r.query_id)));
        }
        if r.is_nil() {
            continue;
        }
        r.run_id = run_id.to_string();
        answered.insert((r.query_id.clone(), r.relation.clone()));
        rows.push(r);
    }
    for q in queries {
        for s in schemas.for_type(q.entity_type) {
            if !answered.contains(&(q.id.clone(), s.name.clone())) {
                rows.push(ResponseRecord::nil(q.id.clone(), s.name.clone(), run_id));
            }
        }
    }
    rows.sort_by(|a, b| a.query_id.cmp(&b.query_id).then_with(|| a.relation.cmp(&b.relation)));
    Ok(rows)
}
