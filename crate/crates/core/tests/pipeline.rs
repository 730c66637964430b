use std::collections::BTreeSet;

use relfactory::config::PipelineConfig;
use relfactory::model::{Provenance, ResponseRecord};
use relfactory::pipeline::{assemble, cmd_run, cmd_train, cmd_tune, collect_votes, Models, Params, Resources};
use relfactory::synth::{Fixture, SynthConfig};
use relfactory::Error;

fn answers(rows: &[ResponseRecord]) -> BTreeSet<(String, String, String)> {
    rows.iter()
        .filter_map(|r| {
            r.answer
                .as_ref()
                .map(|a| (r.query_id.clone(), r.relation.clone(), a.filler.clone()))
        })
        .collect()
}

fn trained() -> (tempfile::TempDir, Fixture, PipelineConfig) {
    let dir = tempfile::tempdir().unwrap();
    let fixture = Fixture::generate(&SynthConfig::default());
    let conf = fixture.write_to(dir.path()).unwrap();
    let cfg = PipelineConfig::load(&conf).unwrap();
    cmd_train(&cfg).unwrap();
    (dir, fixture, cfg)
}

#[test]
fn disabling_validators_never_adds_responses() {
    let (_dir, fixture, cfg) = trained();
    let res = Resources::load(&cfg).unwrap();
    let models = Models::load(&cfg).unwrap();
    let params = Params::defaults(&cfg);
    let votes = collect_votes(&fixture.queries, &res, &models, &cfg);
    let full = answers(&assemble(&fixture.queries, &votes, &params, &res, &cfg).unwrap());
    assert!(!full.is_empty());
    // every subset of the four validators
    for mask in 1u32..15 {
        let mut sub = cfg.clone();
        sub.validators = Provenance::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, p)| *p)
            .collect();
        let part = answers(&assemble(&fixture.queries, &votes, &params, &res, &sub).unwrap());
        assert!(part.is_subset(&full), "validators {:?} added responses", sub.validators);
    }
}

#[test]
fn every_query_relation_is_reported() {
    let (_dir, fixture, cfg) = trained();
    let rows = cmd_run(&cfg).unwrap();
    for q in &fixture.queries {
        for schema in fixture.schemas.for_type(q.entity_type) {
            assert!(
                rows.iter().any(|r| r.query_id == q.id && r.relation == schema.name),
                "{} {}",
                q.id,
                schema.name
            );
        }
    }
}

#[test]
fn tuning_writes_parameters_and_rejects_empty_gold() {
    let (dir, _fixture, mut cfg) = trained();
    let report = cmd_tune(&cfg).unwrap();
    let j = report.j.unwrap();
    assert!(j.params.values().all(|v| [0.1, 1.0, 10.0].contains(v)));
    let loaded = Params::load(&cfg).unwrap();
    assert_eq!(loaded.j, j.params);

    std::fs::write(dir.path().join("empty_gold.tsv"), "").unwrap();
    cfg.set("dev_gold", "empty_gold.tsv", dir.path()).unwrap();
    assert!(matches!(cmd_tune(&cfg), Err(Error::Config(_))));
}

#[test]
fn run_without_models_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = Fixture::generate(&SynthConfig::default());
    let conf = fixture.write_to(dir.path()).unwrap();
    let cfg = PipelineConfig::load(&conf).unwrap();
    assert!(matches!(cmd_run(&cfg), Err(Error::Config(_))));
}
