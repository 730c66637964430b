//! Per-relation binary linear classifiers trained on aggregated
//! distant-supervision examples.
//!
//! All sentences of one entity pair are summed into a single example and
//! max-normalized. Training minimizes
//!
//! ```text
//! lambda/2 * |w|^2 + 1/n * sum_i c_i * max(0, 1 - y_i * (w.x_i + b))
//! ```
//!
//! with `c_i = j` for positives and `1` for negatives, by seeded stochastic
//! subgradient descent. The loss is a mean over examples, so duplicating
//! every example leaves the objective unchanged.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureCounts, SparseVector};
use crate::scalar::Scalar;

/// Cost factors tried for every relation.
pub const J_GRID: [f64; 3] = [0.1, 1.0, 10.0];

const INITIAL_LEARNING_RATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedExample<T> {
    pub subject: String,
    pub object: String,
    pub features: SparseVector<T>,
    pub label: Label,
}

/// Sentences matched for one entity pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairGroup {
    pub subject: String,
    pub object: String,
    pub sentences: Vec<FeatureCounts>,
}

/// Sums each group's per-sentence counts and max-normalizes the sum.
/// Groups without any feature are dropped; the number dropped is returned.
pub fn aggregate_examples<T: Scalar>(groups: &[PairGroup], label: Label) -> (Vec<AggregatedExample<T>>, usize) {
    let mut out = Vec::with_capacity(groups.len());
    let mut dropped = 0;
    for g in groups {
        let mut sum: BTreeMap<&str, u64> = BTreeMap::new();
        for s in &g.sentences {
            for (f, c) in s.iter() {
                *sum.entry(f).or_insert(0) += c as u64;
            }
        }
        let features = SparseVector::max_normalized(sum);
        if features.is_empty() {
            log::warn!("pair ({}, {}) produced no features; dropped", g.subject, g.object);
            dropped += 1;
            continue;
        }
        out.push(AggregatedExample {
            subject: g.subject.clone(),
            object: g.object.clone(),
            features,
            label,
        });
    }
    (out, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub regularization: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            regularization: 1e-4,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    pub relation: String,
    pub weights: BTreeMap<String, T>,
    pub bias: T,
    pub j: T,
    pub config: TrainConfig,
}

struct Row<T> {
    features: Vec<(usize, T)>,
    y: T,
    cost: T,
}

pub fn train<T: Scalar>(
    relation: &str,
    positives: &[AggregatedExample<T>],
    negatives: &[AggregatedExample<T>],
    j: T,
    config: &TrainConfig,
) -> Result<LinearModel<T>> {
    if positives.is_empty() {
        return Err(Error::Training(format!("{relation}: no positive examples")));
    }
    if j.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Training(format!("{relation}: cost factor must be positive")));
    }

    let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
    for ex in positives.iter().chain(negatives) {
        for (f, _) in ex.features.iter() {
            let next = vocab.len();
            vocab.entry(f).or_insert(next);
        }
    }
    let rows: Vec<Row<T>> = positives
        .iter()
        .map(|e| (e, T::one(), j))
        .chain(negatives.iter().map(|e| (e, -T::one(), T::one())))
        .map(|(e, y, cost)| Row {
            features: e.features.iter().map(|(f, v)| (vocab[f], v)).collect(),
            y,
            cost,
        })
        .collect();

    let lambda = T::lit(config.regularization);
    let eta0 = T::lit(INITIAL_LEARNING_RATE);
    let mut v = vec![T::zero(); vocab.len()];
    let mut scale = T::one();
    let mut bias = T::zero();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut t = 0u64;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let row = &rows[i];
            let eta = eta0 / (T::one() + eta0 * lambda * T::from_count(t));
            t += 1;
            let dot: T = row.features.iter().map(|&(k, x)| v[k] * x).sum::<T>() * scale;
            let margin = row.y * (dot + bias);
            scale = scale * (T::one() - eta * lambda);
            if margin < T::one() {
                let step = eta * row.cost * row.y;
                for &(k, x) in &row.features {
                    v[k] = v[k] + step * x / scale;
                }
                bias = bias + step;
            }
            if scale < T::lit(1e-6) {
                for w in &mut v {
                    *w = *w * scale;
                }
                scale = T::one();
            }
        }
    }

    let weights = vocab
        .into_iter()
        .map(|(f, k)| (f.to_string(), v[k] * scale))
        .filter(|(_, w)| *w != T::zero())
        .collect();
    Ok(LinearModel {
        relation: relation.to_string(),
        weights,
        bias,
        j,
        config: *config,
    })
}

/// Regularized training objective of `model` on a data set.
pub fn objective<T: Scalar>(
    model: &LinearModel<T>,
    positives: &[AggregatedExample<T>],
    negatives: &[AggregatedExample<T>],
) -> T {
    let n = positives.len() + negatives.len();
    let reg = T::lit(model.config.regularization) / T::lit(2.0) * model.weights.values().map(|&w| w * w).sum::<T>();
    if n == 0 {
        return reg;
    }
    let hinge =
        |e: &AggregatedExample<T>, y: T, c: T| c * (T::one() - y * model.score_vector(&e.features)).max(T::zero());
    let loss: T = positives
        .iter()
        .map(|e| hinge(e, T::one(), model.j))
        .chain(negatives.iter().map(|e| hinge(e, -T::one(), T::one())))
        .sum();
    reg + loss / T::from_count(n as u64)
}

impl<T: Scalar> LinearModel<T> {
    pub fn score_vector(&self, x: &SparseVector<T>) -> T {
        x.iter()
            .filter_map(|(f, v)| self.weights.get(f).map(|&w| w * v))
            .sum::<T>()
            + self.bias
    }

    /// Per-sentence decision on raw counts (max-normalized first).
    pub fn predict(&self, counts: &FeatureCounts) -> (bool, T) {
        let score = self.score_vector(&SparseVector::from_counts(counts));
        (score >= T::zero(), score)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "#model\trelation={}\tj={}\tepochs={}\tregularization={}\tseed={}\tbias={}\tloss=mean",
            self.relation, self.j, self.config.epochs, self.config.regularization, self.config.seed, self.bias
        );
        for (f, w) in &self.weights {
            let _ = writeln!(out, "{f}\t{w}");
        }
        out
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source, 1, "empty model file"))?;
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        let mut parts = header.split('\t');
        if parts.next() != Some("#model") {
            return Err(Error::parse(source, 1, "missing `#model` header"));
        }
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::parse(source, 1, format!("bad header field `{p}`")))?;
            fields.insert(k, v);
        }
        fn get<V: std::str::FromStr>(fields: &BTreeMap<&str, &str>, key: &str, source: &str) -> Result<V> {
            fields
                .get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(source, 1, format!("missing or bad header field `{key}`")))
        }
        let relation: String = get(&fields, "relation", source)?;
        let config = TrainConfig {
            epochs: get(&fields, "epochs", source)?,
            regularization: get(&fields, "regularization", source)?,
            seed: get(&fields, "seed", source)?,
        };
        let j: T = get(&fields, "j", source)?;
        let bias: T = get(&fields, "bias", source)?;
        let mut weights = BTreeMap::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (f, w) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(source, i + 1, "expected `<feature>\\t<weight>`"))?;
            let w: T = w
                .parse()
                .map_err(|_| Error::parse(source, i + 1, format!("bad weight `{w}`")))?;
            if !w.is_finite() {
                return Err(Error::parse(source, i + 1, "non-finite weight"));
            }
            weights.insert(f.to_string(), w);
        }
        Ok(LinearModel {
            relation,
            weights,
            bias,
            j,
            config,
        })
    }
}

/// Logistic squashing of a decision score into a confidence.
pub fn logistic(score: f64) -> f64 {
    1.0 / (1.0 + (-score).exp())
}
