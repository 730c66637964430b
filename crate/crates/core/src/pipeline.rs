//! End-to-end commands: train, tune, run, score.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alias::{alternate_name_answers, expand_query, AnchorLexicon};
use crate::candidates::{generate_candidates, match_fillers, match_query, TypeLists};
use crate::classifier::{logistic, train, LinearModel, TrainConfig, J_GRID};
use crate::config::PipelineConfig;
use crate::distsup::{
    build_pair_sets, build_training_sets, collect_seed_pattern_pairs, match_pairs, PairSet, SeedSource,
};
use crate::error::{Error, Result};
use crate::evaluation::{greedy_tune, score_run, ScoreFlags, ScoreReport, TunerState};
use crate::features::extract_features;
use crate::io;
use crate::model::{Answer, Candidate, Document, EntityType, GoldEntry, Provenance, Query, ResponseRecord, SchemaSet};
use crate::patterns::{
    apply_ds_patterns, extract_intertext_pattern, fit_pattern_model, match_surface_pattern, parse_surface_patterns,
    LabeledPattern, Pattern, PerceptronConfig, ScoredPatternTable, SurfacePattern, MANUAL_PATTERN_CONFIDENCE,
    THRESHOLD_GRID,
};
use crate::response::{emit, enforce_arity, merge_and_dedup};
use crate::retrieval::{retrieve, select_expansion_by_pmi, InvertedIndex};
use crate::text::CaseMode;

pub const CLASSIFIER_DIR: &str = "classifier";
pub const PATTERN_DIR: &str = "patterns";
pub const J_PARAMS_FILE: &str = "j_params.tsv";
pub const THRESHOLDS_FILE: &str = "thresholds.tsv";

fn read(path: &Path) -> Result<String> {
    io::read_to_string(path)
}

fn source(path: &Path) -> String {
    path.display().to_string()
}

/// Inputs shared by all commands.
pub struct Resources {
    pub corpus: Vec<Document>,
    pub schemas: SchemaSet,
    pub index: InvertedIndex,
    pub lexicon: AnchorLexicon,
    pub suffixes: Vec<String>,
    pub type_lists: TypeLists,
    pub surface_patterns: Vec<SurfacePattern>,
    pub mode: CaseMode,
}

impl Resources {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let corpus_path = cfg.require("corpus")?;
        let schemas_path = cfg.require("schemas")?;
        let anchors = cfg.optional("anchors")?;
        let suffixes = cfg.optional("suffixes")?;
        let type_lists = cfg.optional("type_lists")?;
        let surface = cfg.optional("surface_patterns")?;

        let corpus = io::parse_corpus(&read(corpus_path)?, &source(corpus_path))?;
        let schemas = io::parse_schemas(&read(schemas_path)?, &source(schemas_path))?;
        let lexicon = match anchors {
            Some(p) => AnchorLexicon::parse(&read(p)?, &source(p))?,
            None => AnchorLexicon::from_entries(Vec::<(String, String, u64)>::new())?,
        };
        let suffixes = match suffixes {
            Some(p) => io::parse_list(&read(p)?),
            None => Vec::new(),
        };
        let type_lists = match type_lists {
            Some(p) => TypeLists::parse(&read(p)?, &source(p))?,
            None => TypeLists::default(),
        };
        let surface_patterns = match surface {
            Some(p) => parse_surface_patterns(&read(p)?, &source(p))?,
            None => Vec::new(),
        };
        let mode = CaseMode::from_fold(cfg.case_fold);
        let index = InvertedIndex::build(&corpus, mode);
        Ok(Resources {
            corpus,
            schemas,
            index,
            lexicon,
            suffixes,
            type_lists,
            surface_patterns,
            mode,
        })
    }
}

fn model_file_name(relation: &str, j: f64) -> String {
    format!("{}.j{j}.model", relation.replace([':', '/'], "_"))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Relation -> (positive, negative) aggregated examples.
    pub trained: BTreeMap<String, (usize, usize)>,
    /// Schema relations without any positive pair.
    pub skipped: Vec<String>,
    pub pattern_rows: usize,
    pub files: Vec<PathBuf>,
}

/// Typed pairs co-occurring in a sentence whose surface texts are not a
/// known pair: the NIL examples of the pattern model.
fn nil_patterns(res: &Resources, known: &HashSet<(String, String)>, max_distance: usize) -> Vec<Pattern> {
    let mut out = Vec::new();
    for ty in [EntityType::Per, EntityType::Org] {
        let schemas: Vec<_> = res.schemas.for_type(ty).collect();
        if schemas.is_empty() {
            continue;
        }
        for doc in &res.corpus {
            for sentence in &doc.sentences {
                let fillers = match_fillers(sentence, schemas.iter().copied(), &res.type_lists, res.mode);
                for subj in sentence.entity_spans.iter().filter(|e| e.entity_type == ty.as_str()) {
                    for (f, _) in &fillers {
                        if subj.span.overlaps(f) || subj.span.gap(f) > max_distance {
                            continue;
                        }
                        let pair = (sentence.span_text(subj.span), sentence.span_text(*f));
                        if !known.contains(&pair) {
                            out.push(extract_intertext_pattern(sentence, subj.span, *f));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Trains classifier models for every cost factor plus the pattern tables,
/// all written under the model directory.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let kb_path = cfg.require("kb")?;
    let mapping_path = cfg.optional("mapping")?;
    let seed_path = cfg.optional("seed_patterns")?;
    let res = Resources::load(cfg)?;

    let kb = io::parse_kb(&read(kb_path)?, &source(kb_path))?;
    let mapping = match mapping_path {
        Some(p) => io::parse_mapping(&read(p)?, &source(p))?,
        // identity over schema names
        None => res.schemas.names().into_iter().map(|n| (n.clone(), n)).collect(),
    };
    let mut pair_sets: Vec<PairSet> = build_pair_sets(
        &kb,
        &mapping,
        &res.schemas,
        SeedSource::KbMapping,
        cfg.max_pairs,
        cfg.truncation(),
    )
    .sets;
    if let Some(p) = seed_path {
        let seeds = parse_surface_patterns(&read(p)?, &source(p))?;
        pair_sets.extend(collect_seed_pattern_pairs(
            &res.corpus,
            &res.schemas,
            &res.type_lists,
            &seeds,
            res.mode,
            cfg.max_pairs,
        ));
    }
    let matches = match_pairs(&pair_sets, &res.corpus, &res.index, cfg.max_sentences);
    log::info!("{} training sentences for {} pair sets", matches.len(), pair_sets.len());

    let model_dir = cfg.model_dir();
    let class_dir = model_dir.join(CLASSIFIER_DIR);
    if class_dir.exists() {
        std::fs::remove_dir_all(&class_dir).map_err(|e| Error::io(&class_dir, e))?;
    }
    let mut report = TrainReport::default();

    let sets = build_training_sets::<f64>(&matches, cfg.negatives);
    let config = TrainConfig {
        epochs: cfg.epochs,
        regularization: cfg.regularization,
        seed: cfg.seed,
    };
    for set in &sets {
        for j in J_GRID {
            let model = train(&set.relation, &set.positives, &set.negatives, j, &config)?;
            let path = class_dir.join(model_file_name(&set.relation, j));
            io::write_string(&path, &model.to_text())?;
            report.files.push(path);
        }
        report
            .trained
            .insert(set.relation.clone(), (set.positives.len(), set.negatives.len()));
    }
    for name in res.schemas.names() {
        if !report.trained.contains_key(&name) {
            log::warn!("{name}: no positive training pairs; no model written");
            report.skipped.push(name);
        }
    }

    // pattern statistics
    let mut labeled: Vec<LabeledPattern> = matches
        .iter()
        .map(|m| LabeledPattern {
            pattern: extract_intertext_pattern(m.sentence, m.subject_span, m.object_span),
            relation: Some(m.relation.clone()),
        })
        .collect();
    let known: HashSet<(String, String)> = pair_sets.iter().flat_map(|s| s.pairs.iter().cloned()).collect();
    let mut nil = nil_patterns(&res, &known, cfg.max_distance);
    if nil.len() > labeled.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut keep = sample(&mut rng, nil.len(), labeled.len()).into_vec();
        keep.sort_unstable();
        nil = keep.into_iter().map(|i| nil[i].clone()).collect();
    }
    labeled.extend(nil.into_iter().map(|pattern| LabeledPattern {
        pattern,
        relation: None,
    }));

    let pattern_dir = model_dir.join(PATTERN_DIR);
    if labeled.iter().any(|l| l.relation.is_none()) && labeled.iter().any(|l| l.relation.is_some()) {
        let pconfig = PerceptronConfig {
            seed: cfg.seed,
            ..PerceptronConfig::default()
        };
        let (stats, model) = fit_pattern_model::<f64>(&labeled, &pconfig)?;
        let table = ScoredPatternTable::build(&stats, &model)?;
        report.pattern_rows = table.len();
        for (name, text) in [
            ("stats.tsv", stats.to_text()),
            ("perceptron.txt", model.to_text()),
            ("scored.tsv", table.to_text()),
        ] {
            let path = pattern_dir.join(name);
            io::write_string(&path, &text)?;
            report.files.push(path);
        }
    } else {
        log::warn!("not enough labeled pattern occurrences; no pattern tables written");
    }
    Ok(report)
}

/// Trained artifacts needed at run time.
#[derive(Debug, Clone, Default)]
pub struct Models {
    /// Relation -> models, one per cost factor.
    pub classifiers: BTreeMap<String, Vec<LinearModel<f64>>>,
    pub patterns: ScoredPatternTable<f64>,
}

impl Models {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let dir = cfg.model_dir();
        let mut models = Models::default();
        if cfg.enabled(Provenance::Classifier) {
            let class_dir = dir.join(CLASSIFIER_DIR);
            let entries = std::fs::read_dir(&class_dir)
                .map_err(|e| Error::Config(format!("classifier models missing at {}: {e}", class_dir.display())))?;
            let mut paths: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "model"))
                .collect();
            paths.sort();
            for p in paths {
                let m = LinearModel::<f64>::parse(&read(&p)?, &source(&p))?;
                models.classifiers.entry(m.relation.clone()).or_default().push(m);
            }
        }
        if cfg.enabled(Provenance::DsPatterns) {
            let p = dir.join(PATTERN_DIR).join("scored.tsv");
            if !p.exists() {
                return Err(Error::Config(format!("pattern table missing at {}", p.display())));
            }
            models.patterns = ScoredPatternTable::parse(&read(&p)?, &source(&p))?;
        }
        Ok(models)
    }
}

/// Per-relation cost factors and pattern thresholds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    pub j: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    pub default_j: f64,
    pub default_threshold: f64,
}

impl Params {
    pub fn defaults(cfg: &PipelineConfig) -> Self {
        Params {
            default_j: cfg.default_j,
            default_threshold: cfg.default_threshold,
            ..Params::default()
        }
    }

    /// Tuned files from the model directory when present.
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let mut p = Params::defaults(cfg);
        let dir = cfg.model_dir();
        let jp = dir.join(J_PARAMS_FILE);
        if jp.exists() {
            p.j = io::parse_params(&read(&jp)?, &source(&jp))?;
        }
        let tp = dir.join(THRESHOLDS_FILE);
        if tp.exists() {
            p.thresholds = io::parse_params(&read(&tp)?, &source(&tp))?;
        }
        Ok(p)
    }

    fn j_for(&self, relation: &str) -> f64 {
        self.j.get(relation).copied().unwrap_or(self.default_j)
    }

    fn threshold_for(&self, relation: &str) -> f64 {
        self.thresholds.get(relation).copied().unwrap_or(self.default_threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Gate {
    Open,
    /// Fires only when the relation's cost factor equals this value.
    CostFactor(f64),
    /// Pattern score, compared against the relation's threshold.
    Score(f64),
}

/// A validator's answer together with the parameter it depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    record: ResponseRecord,
    gate: Gate,
}

impl Vote {
    fn passes(&self, params: &Params) -> bool {
        match self.gate {
            Gate::Open => true,
            Gate::CostFactor(j) => (j - params.j_for(&self.record.relation)).abs() < 1e-9,
            Gate::Score(s) => s >= params.threshold_for(&self.record.relation),
        }
    }
}

fn candidate_record(c: &Candidate<'_>, relation: &str, confidence: f64, module: Provenance) -> ResponseRecord {
    ResponseRecord {
        query_id: c.query.id.clone(),
        relation: relation.to_string(),
        run_id: String::new(),
        answer: Some(Answer {
            doc_id: c.sentence.doc_id.clone(),
            filler: c.filler_text(),
            filler_offsets: c.sentence.span_offsets(c.filler_span),
            justification: c.sentence.offsets().expect("candidate sentence is non-empty"),
            confidence: confidence.clamp(0.0, 1.0),
            provenance: Some(module),
        }),
    }
}

/// Every vote of every enabled validator for one query, over all cost
/// factors and without thresholds applied.
pub fn query_votes(query: &Query, res: &Resources, models: &Models, cfg: &PipelineConfig) -> Vec<Vote> {
    let expansions = expand_query(query, &res.lexicon, &res.suffixes);
    let selected = select_expansion_by_pmi(query, &expansions, &res.index, &res.corpus);
    let docs = retrieve(query, selected, &res.index, &res.corpus, cfg.limit);
    let schemas: Vec<_> = res.schemas.for_type(query.entity_type).collect();
    let mut votes = Vec::new();

    if cfg.enabled(Provenance::AltNames) {
        let retrieved: Vec<&Document> = docs.iter().map(|&d| &res.corpus[d]).collect();
        for record in alternate_name_answers(query, &expansions, &retrieved, res.mode) {
            votes.push(Vote {
                record,
                gate: Gate::Open,
            });
        }
    }
    if schemas.is_empty() {
        return votes;
    }

    for &d in &docs {
        for sentence in &res.corpus[d].sentences {
            let query_spans = match_query(sentence, &expansions, query, res.mode);
            if query_spans.is_empty() {
                continue;
            }
            // a filler mention that is itself a query mention is not a filler
            let fillers: Vec<_> = match_fillers(sentence, schemas.iter().copied(), &res.type_lists, res.mode)
                .into_iter()
                .filter(|(f, _)| !query_spans.iter().any(|q| q.overlaps(f)))
                .collect();
            for c in generate_candidates(sentence, &query_spans, &fillers, query, cfg.max_distance) {
                let applicable: Vec<&str> = schemas
                    .iter()
                    .filter(|s| s.accepts_filler(&c.filler_type))
                    .map(|s| s.name.as_str())
                    .collect();
                if applicable.is_empty() {
                    continue;
                }
                if cfg.enabled(Provenance::Classifier) {
                    let features = extract_features(&c);
                    for rel in &applicable {
                        for m in models.classifiers.get(*rel).into_iter().flatten() {
                            let (fires, score) = m.predict(&features);
                            if fires {
                                votes.push(Vote {
                                    record: candidate_record(&c, rel, logistic(score), Provenance::Classifier),
                                    gate: Gate::CostFactor(m.j),
                                });
                            }
                        }
                    }
                }
                if cfg.enabled(Provenance::DsPatterns) {
                    let pattern = extract_intertext_pattern(sentence, c.query_span, c.filler_span);
                    for (rel, score) in apply_ds_patterns(&pattern, &models.patterns, &BTreeMap::new(), 0.0) {
                        if applicable.contains(&rel.as_str()) {
                            votes.push(Vote {
                                record: candidate_record(&c, &rel, score, Provenance::DsPatterns),
                                gate: Gate::Score(score),
                            });
                        }
                    }
                }
                if cfg.enabled(Provenance::ManualPatterns) {
                    for p in &res.surface_patterns {
                        if applicable.contains(&p.relation.as_str()) && match_surface_pattern(p, &c, res.mode) {
                            votes.push(Vote {
                                record: candidate_record(
                                    &c,
                                    &p.relation,
                                    MANUAL_PATTERN_CONFIDENCE,
                                    Provenance::ManualPatterns,
                                ),
                                gate: Gate::Open,
                            });
                        }
                    }
                }
            }
        }
    }
    votes
}

/// Votes for every query, computed in parallel and kept in query order.
pub fn collect_votes(queries: &[Query], res: &Resources, models: &Models, cfg: &PipelineConfig) -> Vec<Vec<Vote>> {
    queries.par_iter().map(|q| query_votes(q, res, models, cfg)).collect()
}

/// Applies parameters to precomputed votes and post-processes the result
/// into final response rows.
pub fn assemble(
    queries: &[Query],
    votes: &[Vec<Vote>],
    params: &Params,
    res: &Resources,
    cfg: &PipelineConfig,
) -> Result<Vec<ResponseRecord>> {
    let mut all = Vec::new();
    for query_votes in votes {
        let lists: Vec<Vec<ResponseRecord>> = cfg
            .validators
            .iter()
            .map(|&module| {
                query_votes
                    .iter()
                    .filter(|v| v.record.answer.as_ref().and_then(|a| a.provenance) == Some(module) && v.passes(params))
                    .map(|v| v.record.clone())
                    .collect()
            })
            .collect();
        let merged = merge_and_dedup(&lists, Some(&res.lexicon), &cfg.validators);
        all.extend(enforce_arity(merged, &res.schemas, &cfg.validators));
    }
    emit(all, queries, &res.schemas, &cfg.run_id)
}

fn load_queries(path: &Path) -> Result<Vec<Query>> {
    io::parse_queries(&read(path)?, &source(path))
}

/// Answers the configured queries; writes the response file when an output
/// path is configured.
pub fn cmd_run(cfg: &PipelineConfig) -> Result<Vec<ResponseRecord>> {
    cfg.validate()?;
    let queries_path = cfg.require("queries")?;
    let res = Resources::load(cfg)?;
    let models = Models::load(cfg)?;
    let params = Params::load(cfg)?;
    let queries = load_queries(queries_path)?;
    let votes = collect_votes(&queries, &res, &models, cfg);
    let rows = assemble(&queries, &votes, &params, &res, cfg)?;
    if let Some(out) = cfg.path("output") {
        io::write_string(out, &io::write_responses(&rows)?)?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneReport {
    pub j: Option<TunerState<f64, f64>>,
    pub thresholds: Option<TunerState<f64, f64>>,
}

/// Tunes cost factors, then pattern thresholds, on the development queries
/// and writes both parameter files.
pub fn cmd_tune(cfg: &PipelineConfig) -> Result<TuneReport> {
    cfg.validate()?;
    let queries_path = cfg.require("dev_queries")?;
    let gold_path = cfg.require("dev_gold")?;
    let res = Resources::load(cfg)?;
    let models = Models::load(cfg)?;
    let queries = load_queries(queries_path)?;
    let gold: Vec<GoldEntry> = io::parse_gold(&read(gold_path)?, &source(gold_path))?;
    if gold.is_empty() {
        return Err(Error::Config("development gold is empty".into()));
    }
    let votes = collect_votes(&queries, &res, &models, cfg);
    let mut params = Params::defaults(cfg);
    let known = res.schemas.names();

    let mut failure = None;
    let mut evaluate = |p: &Params| -> f64 {
        match assemble(&queries, &votes, p, &res, cfg) {
            Ok(rows) => score_run::<f64>(&rows, &gold, ScoreFlags::default(), Some(&res.lexicon), Some(&known)).f1,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };

    let mut report = TuneReport {
        j: None,
        thresholds: None,
    };
    let dir = cfg.model_dir();
    if cfg.enabled(Provenance::Classifier) && !models.classifiers.is_empty() {
        let relations: Vec<String> = models.classifiers.keys().cloned().collect();
        let base = params.clone();
        let state = greedy_tune(
            &relations,
            &J_GRID,
            |j| {
                let mut p = base.clone();
                p.j = j.clone();
                evaluate(&p)
            },
            cfg.iterations,
        )?;
        params.j = state.params.clone();
        io::write_string(&dir.join(J_PARAMS_FILE), &io::write_params(&params.j))?;
        report.j = Some(state);
    }
    if cfg.enabled(Provenance::DsPatterns) && !models.patterns.is_empty() {
        let relations: Vec<String> = models.patterns.relations().into_iter().map(str::to_string).collect();
        let base = params.clone();
        let state = greedy_tune(
            &relations,
            &THRESHOLD_GRID,
            |t| {
                let mut p = base.clone();
                p.thresholds = t.clone();
                evaluate(&p)
            },
            cfg.iterations,
        )?;
        params.thresholds = state.params.clone();
        io::write_string(&dir.join(THRESHOLDS_FILE), &io::write_params(&params.thresholds))?;
        report.thresholds = Some(state);
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(report)
}

/// Scores a response file against a gold file.
pub fn cmd_score(
    responses: &Path,
    gold: &Path,
    flags: ScoreFlags,
    lexicon: Option<&AnchorLexicon>,
    known_relations: Option<&BTreeSet<String>>,
) -> Result<ScoreReport<f64>> {
    let rows = io::parse_responses(&read(responses)?, &source(responses))?;
    let gold = io::parse_gold(&read(gold)?, &source(gold))?;
    Ok(score_run(&rows, &gold, flags, lexicon, known_relations))
}
