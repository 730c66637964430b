//! Pipeline configuration: `key = value` lines, `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::candidates::DEFAULT_MAX_DISTANCE;
use crate::distsup::{NegativeScope, Truncation, MAX_PAIRS_PER_RELATION, MAX_SENTENCES_PER_PAIR};
use crate::error::{Error, Result};
use crate::model::Provenance;
use crate::retrieval::DEFAULT_RETRIEVAL_LIMIT;

const PATH_KEYS: [&str; 14] = [
    "corpus",
    "queries",
    "schemas",
    "kb",
    "mapping",
    "anchors",
    "suffixes",
    "type_lists",
    "surface_patterns",
    "seed_patterns",
    "model_dir",
    "dev_queries",
    "dev_gold",
    "output",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    paths: BTreeMap<&'static str, PathBuf>,
    /// Enabled validators in pipeline order; earlier modules win merge ties.
    pub validators: Vec<Provenance>,
    pub limit: usize,
    pub case_fold: bool,
    pub run_id: String,
    pub seed: u64,
    pub max_distance: usize,
    pub epochs: usize,
    pub regularization: f64,
    pub negatives: NegativeScope,
    pub iterations: usize,
    pub max_pairs: usize,
    pub max_sentences: usize,
    pub sample_truncation: bool,
    pub default_j: f64,
    pub default_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: BTreeMap::new(),
            validators: Provenance::ALL.to_vec(),
            limit: DEFAULT_RETRIEVAL_LIMIT,
            case_fold: false,
            run_id: "relfactory".into(),
            seed: 42,
            max_distance: DEFAULT_MAX_DISTANCE,
            epochs: 20,
            regularization: 1e-4,
            negatives: NegativeScope::SameType,
            iterations: 2,
            max_pairs: MAX_PAIRS_PER_RELATION,
            max_sentences: MAX_SENTENCES_PER_PAIR,
            sample_truncation: false,
            default_j: 1.0,
            default_threshold: 0.5,
        }
    }
}

fn parse_value<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{value}` for `{key}`"))),
    }
}

fn parse_modules(key: &str, value: &str) -> Result<Vec<Provenance>> {
    let mut out = Vec::new();
    for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let p: Provenance = name
            .parse()
            .map_err(|_| Error::Config(format!("unknown validator `{name}` in `{key}`")))?;
        if !out.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_text(&text, base)
    }

    /// Relative paths resolve against `base`.
    pub fn from_text(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(k.trim(), v.trim(), base)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        if let Some(k) = PATH_KEYS.iter().find(|k| **k == key) {
            self.paths.insert(k, base.join(value));
            return Ok(());
        }
        match key {
            "validators" => self.validators = parse_modules(key, value)?,
            "disable" => {
                let off = parse_modules(key, value)?;
                self.validators.retain(|p| !off.contains(p));
            }
            "limit" => self.limit = parse_value(key, value)?,
            "case_fold" => self.case_fold = parse_bool(key, value)?,
            "run_id" => {
                if value.is_empty() || value.contains(char::is_whitespace) {
                    return Err(Error::Config(format!("bad run id `{value}`")));
                }
                self.run_id = value.to_string();
            }
            "seed" => self.seed = parse_value(key, value)?,
            "max_distance" => self.max_distance = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "regularization" => self.regularization = parse_value(key, value)?,
            "negatives" => {
                self.negatives = match value {
                    "same_type" => NegativeScope::SameType,
                    "all" => NegativeScope::AllRelations,
                    _ => return Err(Error::Config(format!("bad value `{value}` for `negatives`"))),
                }
            }
            "iterations" => self.iterations = parse_value(key, value)?,
            "max_pairs" => self.max_pairs = parse_value(key, value)?,
            "max_sentences" => self.max_sentences = parse_value(key, value)?,
            "truncation" => {
                self.sample_truncation = match value {
                    "first" => false,
                    "sample" => true,
                    _ => return Err(Error::Config(format!("bad value `{value}` for `truncation`"))),
                }
            }
            "default_j" => self.default_j = parse_value(key, value)?,
            "default_threshold" => self.default_threshold = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str, base: &Path) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not `key=value`")))?;
        self.set(k.trim(), v.trim(), base)
    }

    pub fn path(&self, key: &str) -> Option<&Path> {
        self.paths.get(key).map(PathBuf::as_path)
    }

    /// A configured path that must exist.
    pub fn require(&self, key: &str) -> Result<&Path> {
        let p = self
            .path(key)
            .ok_or_else(|| Error::Config(format!("`{key}` is not configured")))?;
        if !p.exists() {
            return Err(Error::Config(format!("`{key}` path {} does not exist", p.display())));
        }
        Ok(p)
    }

    /// A configured path that must exist if set.
    pub fn optional(&self, key: &str) -> Result<Option<&Path>> {
        match self.path(key) {
            None => Ok(None),
            Some(_) => self.require(key).map(Some),
        }
    }

    pub fn model_dir(&self) -> PathBuf {
        self.path("model_dir")
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("models"))
    }

    pub fn truncation(&self) -> Truncation {
        if self.sample_truncation {
            Truncation::Sample { seed: self.seed }
        } else {
            Truncation::First
        }
    }

    pub fn enabled(&self, p: Provenance) -> bool {
        self.validators.contains(&p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.validators.is_empty() {
            return Err(Error::Config("no validator enabled".into()));
        }
        if self.limit == 0 {
            return Err(Error::Config("`limit` must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let text = "# comment\ncorpus = data/corpus.txt\nlimit = 50\ndisable = alt_names\ncase_fold = yes\n";
        let mut cfg = PipelineConfig::from_text(text, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.path("corpus"), Some(Path::new("/cfg/data/corpus.txt")));
        assert_eq!(cfg.limit, 50);
        assert!(cfg.case_fold);
        assert!(!cfg.enabled(Provenance::AltNames));
        assert_eq!(cfg.validators.len(), 3);

        cfg.apply_override("seed=7", Path::new("/")).unwrap();
        assert_eq!(cfg.seed, 7);
        cfg.apply_override("validators=manual_patterns", Path::new("/"))
            .unwrap();
        assert_eq!(cfg.validators, vec![Provenance::ManualPatterns]);
    }

    #[test]
    fn config_errors() {
        for bad in [
            "nokey",
            "colour = red",
            "limit = ten",
            "validators = magic",
            "negatives = some",
        ] {
            assert!(
                matches!(PipelineConfig::from_text(bad, Path::new("")), Err(Error::Config(_))),
                "{bad}"
            );
        }
        let cfg = PipelineConfig::from_text("validators =", Path::new("")).unwrap();
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig::from_text("corpus = /no/such/file", Path::new("")).unwrap();
        assert!(matches!(cfg.require("corpus"), Err(Error::Config(_))));
        assert!(matches!(cfg.require("kb"), Err(Error::Config(_))));
        assert_eq!(cfg.optional("kb").unwrap(), None);
    }
}
