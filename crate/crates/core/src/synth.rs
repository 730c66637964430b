//! Synthetic planted corpus.
//!
//! Every relation instance is expressed through one of a few fixed templates,
//! so the exact answer set is known. Distractor sentences put query entities
//! next to typed fillers without expressing any relation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::io;
use crate::model::{
    Arity, Document, EntitySpan, EntityType, GoldEntry, KbTriple, Query, RelationSchema, SchemaSet, Sentence, Token,
    TokenSpan,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub persons: usize,
    pub orgs: usize,
    pub cities: usize,
    pub seed: u64,
    /// Share of documents stating a fact a second time.
    pub repeat_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            persons: 70,
            orgs: 30,
            cities: 20,
            seed: 7,
            repeat_rate: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Dev,
    Test,
}

struct RelationSpec {
    name: &'static str,
    kb_name: &'static str,
    query: EntityType,
    filler: &'static str,
    arity: Arity,
    /// `ARG1` is the query entity, `ARG2` the filler; `{title}` and `{year}`
    /// are filled per sentence.
    templates: &'static [&'static str],
    patterns: &'static [&'static str],
}

/// (placeholder, surface text, entity tag)
type Mention = (String, String, &'static str);

const RELATIONS: &[RelationSpec] = &[
    RelationSpec {
        name: "per:city_of_birth",
        kb_name: "/people/person/place_of_birth",
        query: EntityType::Per,
        filler: "GPE",
        arity: Arity::Single,
        templates: &["ARG1 was born in ARG2 .", "Born in ARG2 , ARG1 grew up on a farm ."],
        patterns: &["ARG1 was born in ARG2", "Born in ARG2 , ARG1"],
    },
    RelationSpec {
        name: "per:cities_of_residence",
        kb_name: "/people/person/places_lived",
        query: EntityType::Per,
        filler: "GPE",
        arity: Arity::List,
        templates: &["ARG1 lives in ARG2 .", "ARG1 moved to ARG2 last spring ."],
        patterns: &["ARG1 lives in ARG2", "ARG1 moved to ARG2"],
    },
    RelationSpec {
        name: "per:employee_of",
        kb_name: "/business/employment_tenure/person",
        query: EntityType::Per,
        filler: "ORG",
        arity: Arity::List,
        templates: &[
            "ARG1 works for ARG2 .",
            "ARG1 , {title} at ARG2 , declined to comment .",
        ],
        patterns: &["ARG1 works for ARG2", "ARG1 , * at ARG2"],
    },
    RelationSpec {
        name: "per:spouse",
        kb_name: "/people/marriage/spouse",
        query: EntityType::Per,
        filler: "PER",
        arity: Arity::List,
        templates: &["ARG1 is married to ARG2 .", "ARG1 and spouse ARG2 attended the gala ."],
        patterns: &[
            "ARG1 is married to ARG2",
            "ARG2 is married to ARG1",
            "ARG1 and spouse ARG2",
            "ARG2 and spouse ARG1",
        ],
    },
    RelationSpec {
        name: "org:city_of_headquarters",
        kb_name: "/organization/organization/headquarters",
        query: EntityType::Org,
        filler: "GPE",
        arity: Arity::Single,
        templates: &[
            "ARG1 is headquartered in ARG2 .",
            "ARG1 , based in ARG2 , reported earnings .",
        ],
        patterns: &["ARG1 is headquartered in ARG2", "ARG1 , based in ARG2"],
    },
    RelationSpec {
        name: "org:founded_by",
        kb_name: "/organization/organization/founders",
        query: EntityType::Org,
        filler: "PER",
        arity: Arity::List,
        templates: &["ARG2 founded ARG1 in {year} .", "ARG1 was founded by ARG2 ."],
        patterns: &["ARG2 founded ARG1", "ARG1 was founded by ARG2"],
    },
    RelationSpec {
        name: "org:parents",
        kb_name: "/organization/organization/parent",
        query: EntityType::Org,
        filler: "ORG",
        arity: Arity::List,
        templates: &["ARG1 is a subsidiary of ARG2 .", "ARG2 acquired ARG1 last year ."],
        patterns: &["ARG1 is a subsidiary of ARG2", "ARG2 acquired ARG1"],
    },
];

const DISTRACTORS: &[(&str, &str, &str)] = &[
    ("PER", "GPE", "ARG1 visited ARG2 on Tuesday ."),
    ("PER", "GPE", "ARG1 gave a speech near ARG2 ."),
    ("PER", "ORG", "ARG1 criticized ARG2 in an interview ."),
    ("PER", "PER", "ARG1 spoke with ARG2 by phone ."),
    ("ORG", "GPE", "ARG1 sponsored a festival near ARG2 ."),
    ("ORG", "ORG", "ARG1 competes with ARG2 ."),
    ("ORG", "PER", "ARG2 praised ARG1 ."),
];

const NEUTRAL: &[&str] = &[
    "The weather was mild that day .",
    "Officials declined to give details .",
    "Markets closed higher on Friday .",
    "The report was published in the evening edition .",
];

const TITLES: &[&str] = &[
    "an analyst",
    "a senior engineer",
    "the chief financial officer",
    "a consultant",
];

const FIRST: &[&str] = &[
    "Anna", "Bruno", "Clara", "Dmitri", "Elena", "Felix", "Greta", "Hugo", "Ines", "Jonas", "Karin", "Lukas", "Mira",
    "Nils", "Olga", "Pavel", "Rosa", "Stefan", "Tara", "Viktor",
];
const LAST_ON: &[&str] = &[
    "Bar", "Cal", "Dor", "Fen", "Gal", "Har", "Kel", "Lor", "Mar", "Nor", "Pel", "Ros", "Tal", "Vor", "Wen", "Yar",
];
const LAST_END: &[&str] = &["den", "ford", "ley", "mont", "rick", "ston", "wick", "by"];
const CITY_ON: &[&str] = &[
    "Ash", "Brim", "Cold", "Dun", "Elm", "Frost", "Glen", "High", "Iron", "Lake", "Mill", "North", "Oak", "Red",
    "Stone", "West",
];
const CITY_END: &[&str] = &["haven", "port", "field", "mouth", "vale"];
const ORG_WORD: &[&str] = &[
    "Acme", "Borel", "Cygnus", "Delta", "Ember", "Fulcrum", "Gantry", "Helix", "Ionic", "Juno", "Krypto", "Lumen",
    "Nimbus", "Orbit", "Pylon", "Quasar", "Radix", "Sigma", "Tundra", "Umbra", "Vertex", "Zenith", "Apex", "Nova",
    "Kestrel", "Falcon", "Osprey", "Heron", "Summit", "Beacon",
];
const ORG_KIND: &[&str] = &["Systems", "Group", "Holdings", "Labs", "Partners"];
const NICKNAMES: usize = 6;

#[derive(Debug, Clone)]
struct Entity {
    id: String,
    name: String,
    ty: EntityType,
    split: Split,
}

/// One directed relation instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Fact {
    relation: &'static str,
    subject: usize,
    object: String,
}

/// A planted sentence: template text plus the two argument strings.
struct Planted {
    template: String,
    arg1: (String, &'static str),
    arg2: (String, &'static str),
    /// Facts (relation index, subject entity, object) this sentence states.
    facts: Vec<Fact>,
}

/// Generated corpus with its gold standard and auxiliary files.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub corpus: Vec<Document>,
    pub schemas: SchemaSet,
    pub mapping: BTreeMap<String, String>,
    pub kb_train: Vec<KbTriple>,
    pub kb_heldout: Vec<KbTriple>,
    pub queries: Vec<Query>,
    pub splits: BTreeMap<String, Split>,
    pub gold: Vec<GoldEntry>,
    /// `(relation, pattern text)` pairs matching exactly the templates.
    pub surface_patterns: Vec<(String, String)>,
    pub anchors: Vec<(String, String, u64)>,
    pub suffixes: Vec<String>,
}

fn split_of(i: usize) -> Split {
    match i % 10 {
        0..=4 => Split::Train,
        5 | 6 => Split::Dev,
        _ => Split::Test,
    }
}

fn unique_names(rng: &mut ChaCha8Rng, n: usize, make: impl Fn(usize) -> String, space: usize) -> Vec<String> {
    let mut idx: Vec<usize> = (0..space).collect();
    idx.shuffle(rng);
    idx.into_iter().take(n).map(make).collect()
}

/// Builds a sentence from a template, tagging the argument slots.
fn realize(doc_id: &str, text: &str, args: &[(&str, &str, &str)], offset: &mut usize) -> Sentence {
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    let mut push = |w: &str, tokens: &mut Vec<Token>| {
        tokens.push(Token {
            text: w.to_string(),
            begin: *offset,
            end: *offset + w.len(),
        });
        *offset += w.len() + 1;
    };
    for w in text.split_whitespace() {
        if let Some((_, value, ty)) = args.iter().find(|(slot, _, _)| *slot == w) {
            let start = tokens.len();
            for part in value.split_whitespace() {
                push(part, &mut tokens);
            }
            spans.push(EntitySpan {
                entity_type: ty.to_string(),
                span: TokenSpan::new(start, tokens.len()),
            });
        } else {
            push(w, &mut tokens);
        }
    }
    Sentence::new(doc_id, tokens, spans).expect("generated sentence is well formed")
}

fn plant_fact(
    planted: &mut Vec<Planted>,
    entities: &[Entity],
    rng: &mut ChaCha8Rng,
    r: usize,
    subj: usize,
    obj: String,
    extra: Vec<Fact>,
) {
    let spec = &RELATIONS[r];
    let template = spec.templates[rng.gen_range(0..spec.templates.len())]
        .replace("{title}", TITLES[rng.gen_range(0..TITLES.len())])
        .replace("{year}", &rng.gen_range(1950..2010).to_string());
    let mut facts = vec![Fact {
        relation: spec.name,
        subject: subj,
        object: obj.clone(),
    }];
    facts.extend(extra);
    planted.push(Planted {
        template,
        arg1: (entities[subj].name.clone(), spec.query.as_str()),
        arg2: (obj, spec.filler),
        facts,
    });
}

impl Fixture {
    pub fn generate(cfg: &SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let persons = cfg.persons.min(LAST_ON.len() * LAST_END.len());
        let orgs = cfg.orgs.min(ORG_WORD.len());
        let cities = cfg.cities.min(CITY_ON.len() * CITY_END.len());

        let last = unique_names(
            &mut rng,
            persons,
            |i| format!("{}{}", LAST_ON[i / LAST_END.len()], LAST_END[i % LAST_END.len()]),
            LAST_ON.len() * LAST_END.len(),
        );
        let mut entities: Vec<Entity> = last
            .iter()
            .enumerate()
            .map(|(i, l)| Entity {
                id: format!("P{:03}", i + 1),
                name: format!("{} {l}", FIRST[rng.gen_range(0..FIRST.len())]),
                ty: EntityType::Per,
                split: split_of(i),
            })
            .collect();
        let org_names = unique_names(
            &mut rng,
            orgs,
            |i| format!("{} {}", ORG_WORD[i], ORG_KIND[i % ORG_KIND.len()]),
            ORG_WORD.len(),
        );
        entities.extend(org_names.into_iter().enumerate().map(|(i, name)| Entity {
            id: format!("O{:03}", i + 1),
            name,
            ty: EntityType::Org,
            split: split_of(i),
        }));
        let city_names = unique_names(
            &mut rng,
            cities,
            |i| format!("{}{}", CITY_ON[i / CITY_END.len()], CITY_END[i % CITY_END.len()]),
            CITY_ON.len() * CITY_END.len(),
        );
        let person_ids: Vec<usize> = (0..persons).collect();
        let org_ids: Vec<usize> = (persons..persons + orgs).collect();

        let rel = |name: &str| RELATIONS.iter().position(|r| r.name == name).unwrap();
        let mut planted: Vec<Planted> = Vec::new();
        let mut plant = |rng: &mut ChaCha8Rng, r: usize, subj: usize, obj: String, extra: Vec<Fact>| {
            plant_fact(&mut planted, &entities, rng, r, subj, obj, extra)
        };

        for &p in &person_ids {
            let birth = city_names[rng.gen_range(0..cities)].clone();
            plant(&mut rng, rel("per:city_of_birth"), p, birth.clone(), vec![]);
            let n_res = if rng.gen_bool(0.3) { 2 } else { 1 };
            let mut res_cities: Vec<String> = city_names.iter().filter(|c| **c != birth).cloned().collect();
            res_cities.shuffle(&mut rng);
            for c in res_cities.into_iter().take(n_res) {
                plant(&mut rng, rel("per:cities_of_residence"), p, c, vec![]);
            }
            let employer = org_ids[rng.gen_range(0..orgs)];
            plant(
                &mut rng,
                rel("per:employee_of"),
                p,
                entities[employer].name.clone(),
                vec![],
            );
        }
        let mut shuffled = person_ids.clone();
        shuffled.shuffle(&mut rng);
        for pair in shuffled.chunks(2).take(persons / 6) {
            if let [a, b] = *pair {
                let back = Fact {
                    relation: "per:spouse",
                    subject: b,
                    object: entities[a].name.clone(),
                };
                plant(&mut rng, rel("per:spouse"), a, entities[b].name.clone(), vec![back]);
            }
        }
        for (k, &o) in org_ids.iter().enumerate() {
            let hq = city_names[rng.gen_range(0..cities)].clone();
            plant(&mut rng, rel("org:city_of_headquarters"), o, hq, vec![]);
            let founder = person_ids[rng.gen_range(0..persons)];
            plant(
                &mut rng,
                rel("org:founded_by"),
                o,
                entities[founder].name.clone(),
                vec![],
            );
            if k % 3 == 0 {
                let parent = loop {
                    let c = org_ids[rng.gen_range(0..orgs)];
                    if c != o {
                        break c;
                    }
                };
                plant(&mut rng, rel("org:parents"), o, entities[parent].name.clone(), vec![]);
            }
        }

        // repeated statements, with a freshly drawn template
        let originals = planted.len();
        for i in 0..originals {
            if rng.gen_bool(cfg.repeat_rate) {
                let (subj, obj, extra, r) = {
                    let p = &planted[i];
                    (
                        p.facts[0].subject,
                        p.arg2.0.clone(),
                        p.facts[1..].to_vec(),
                        rel(p.facts[0].relation),
                    )
                };
                plant_fact(&mut planted, &entities, &mut rng, r, subj, obj, extra);
            }
        }
        planted.shuffle(&mut rng);

        // pairs that must not appear in distractors, either direction
        let fact_pairs: BTreeSet<(String, String)> = planted
            .iter()
            .flat_map(|p| {
                [
                    (p.arg1.0.clone(), p.arg2.0.clone()),
                    (p.arg2.0.clone(), p.arg1.0.clone()),
                ]
            })
            .collect();
        let nickname_of: BTreeMap<usize, String> = person_ids
            .iter()
            .take(NICKNAMES)
            .map(|&p| {
                let last = entities[p].name.split(' ').nth(1).unwrap().to_string();
                (p, format!("Little {last}"))
            })
            .collect();

        let mut corpus = Vec::new();
        let mut gold_docs: BTreeMap<Fact, BTreeSet<String>> = BTreeMap::new();
        let mut alt_docs: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for (d, chunk) in planted.chunks(2).enumerate() {
            let doc_id = format!("SYN{:04}", d + 1);
            let mut texts: Vec<(String, Vec<Mention>)> = Vec::new();
            for p in chunk {
                for f in &p.facts {
                    gold_docs.entry(f.clone()).or_default().insert(doc_id.clone());
                }
                texts.push((
                    p.template.clone(),
                    vec![
                        ("ARG1".into(), p.arg1.0.clone(), p.arg1.1),
                        ("ARG2".into(), p.arg2.0.clone(), p.arg2.1),
                    ],
                ));
                let subj = p.facts[0].subject;
                if let Some(nick) = nickname_of.get(&subj) {
                    texts.push((
                        "ARG1 , known as ARG2 , thanked the volunteers .".into(),
                        vec![
                            ("ARG1".into(), entities[subj].name.clone(), "PER"),
                            ("ARG2".into(), nick.clone(), "PER"),
                        ],
                    ));
                    alt_docs.entry(subj).or_default().insert(doc_id.clone());
                }
            }
            // a distractor around the first subject
            let subj = chunk[0].facts[0].subject;
            let ty = entities[subj].ty.as_str();
            let options: Vec<_> = DISTRACTORS.iter().filter(|(q, _, _)| *q == ty).collect();
            let &&(_, filler_ty, template) = options.choose(&mut rng).unwrap();
            for _ in 0..20 {
                let filler = match filler_ty {
                    "GPE" => city_names[rng.gen_range(0..cities)].clone(),
                    "ORG" => entities[org_ids[rng.gen_range(0..orgs)]].name.clone(),
                    _ => entities[person_ids[rng.gen_range(0..persons)]].name.clone(),
                };
                let subj_name = entities[subj].name.clone();
                if filler != subj_name && !fact_pairs.contains(&(subj_name.clone(), filler.clone())) {
                    texts.push((
                        template.to_string(),
                        vec![("ARG1".into(), subj_name, ty), ("ARG2".into(), filler, filler_ty)],
                    ));
                    break;
                }
            }
            texts.push((NEUTRAL.choose(&mut rng).unwrap().to_string(), vec![]));
            texts.shuffle(&mut rng);

            let mut offset = 0;
            let sentences = texts
                .iter()
                .map(|(t, args)| {
                    let args: Vec<(&str, &str, &str)> =
                        args.iter().map(|(s, v, ty)| (s.as_str(), v.as_str(), *ty)).collect();
                    realize(&doc_id, t, &args, &mut offset)
                })
                .collect();
            corpus.push(Document { doc_id, sentences });
        }

        let schemas = SchemaSet::new(
            RELATIONS
                .iter()
                .map(|r| RelationSchema::new(r.name, r.query, [r.filler], r.arity).unwrap())
                .chain([
                    RelationSchema::new("per:alternate_names", EntityType::Per, ["PER"], Arity::List).unwrap(),
                    RelationSchema::new("org:alternate_names", EntityType::Org, ["ORG"], Arity::List).unwrap(),
                ])
                .collect(),
        )
        .expect("fixture schemas are valid");
        let mapping = RELATIONS
            .iter()
            .map(|r| (r.kb_name.to_string(), r.name.to_string()))
            .collect();

        let mut kb_train = Vec::new();
        let mut kb_heldout = Vec::new();
        let mut gold = Vec::new();
        let mut class_counter: BTreeMap<(String, &str), usize> = BTreeMap::new();
        for (fact, docs) in &gold_docs {
            let e = &entities[fact.subject];
            let spec = &RELATIONS[rel(fact.relation)];
            let triple = KbTriple {
                relation: spec.kb_name.to_string(),
                subject: e.name.clone(),
                object: fact.object.clone(),
            };
            if e.split == Split::Train {
                kb_train.push(triple);
            } else {
                kb_heldout.push(triple);
            }
            let n = class_counter.entry((e.id.clone(), fact.relation)).or_insert(0);
            *n += 1;
            gold.push(GoldEntry {
                query_id: e.id.clone(),
                relation: fact.relation.to_string(),
                class_id: format!("{}:{}:{}", e.id, fact.relation, n),
                filler: fact.object.clone(),
                docs: Some(docs.clone()),
            });
        }
        let mut anchors = Vec::new();
        for (&p, nick) in &nickname_of {
            let e = &entities[p];
            let page = e.name.replace(' ', "_");
            anchors.push((e.name.clone(), page.clone(), 40));
            anchors.push((nick.clone(), page, 6));
            gold.push(GoldEntry {
                query_id: e.id.clone(),
                relation: "per:alternate_names".into(),
                class_id: format!("{}:per:alternate_names:1", e.id),
                filler: nick.clone(),
                docs: alt_docs.get(&p).cloned(),
            });
        }
        gold.sort_by(|a, b| (&a.query_id, &a.relation, &a.class_id).cmp(&(&b.query_id, &b.relation, &b.class_id)));

        let surface_patterns = RELATIONS
            .iter()
            .flat_map(|r| r.patterns.iter().map(move |p| (r.name.to_string(), p.to_string())))
            .collect();
        let queries = entities
            .iter()
            .map(|e| Query::new(e.id.clone(), e.name.clone(), e.ty).unwrap())
            .collect();
        let splits = entities.iter().map(|e| (e.id.clone(), e.split)).collect();

        Fixture {
            corpus,
            schemas,
            mapping,
            kb_train,
            kb_heldout,
            queries,
            splits,
            gold,
            surface_patterns,
            anchors,
            suffixes: vec!["Inc".into(), "Ltd".into()],
        }
    }

    pub fn queries_in(&self, split: Split) -> Vec<Query> {
        self.queries
            .iter()
            .filter(|q| self.splits.get(&q.id) == Some(&split))
            .cloned()
            .collect()
    }

    /// Gold entries of the given queries; alternate names only when asked.
    pub fn gold_for(&self, queries: &[Query], alternate_names: bool) -> Vec<GoldEntry> {
        let ids: BTreeSet<&str> = queries.iter().map(|q| q.id.as_str()).collect();
        self.gold
            .iter()
            .filter(|g| ids.contains(g.query_id.as_str()))
            .filter(|g| alternate_names || !g.relation.ends_with(":alternate_names"))
            .cloned()
            .collect()
    }

    /// Writes every input file plus `relfactory.conf`; returns the config
    /// path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        let pairs = |rows: &mut dyn Iterator<Item = (String, String)>| {
            let mut s = String::new();
            for (a, b) in rows {
                let _ = writeln!(s, "{a}\t{b}");
            }
            s
        };
        let mut anchors = String::new();
        for (a, p, c) in &self.anchors {
            let _ = writeln!(anchors, "{a}\t{p}\t{c}");
        }
        let dev = self.queries_in(Split::Dev);
        let test = self.queries_in(Split::Test);
        let files: Vec<(&str, String)> = vec![
            ("corpus.txt", io::write_corpus(&self.corpus)),
            ("schemas.tsv", io::write_schemas(&self.schemas)),
            ("kb.tsv", io::write_kb(&self.kb_train)),
            ("kb_heldout.tsv", io::write_kb(&self.kb_heldout)),
            ("mapping.tsv", pairs(&mut self.mapping.clone().into_iter())),
            ("queries.tsv", io::write_queries(&self.queries)),
            ("dev_queries.tsv", io::write_queries(&dev)),
            ("test_queries.tsv", io::write_queries(&test)),
            ("gold.tsv", io::write_gold(&self.gold)),
            ("dev_gold.tsv", io::write_gold(&self.gold_for(&dev, true))),
            ("test_gold.tsv", io::write_gold(&self.gold_for(&test, true))),
            (
                "surface_patterns.tsv",
                pairs(&mut self.surface_patterns.clone().into_iter()),
            ),
            ("anchors.tsv", anchors),
            ("suffixes.txt", self.suffixes.iter().map(|s| format!("{s}\n")).collect()),
            ("relfactory.conf", CONFIG.to_string()),
        ];
        for (name, text) in files {
            io::write_string(&dir.join(name), &text)?;
        }
        Ok(dir.join("relfactory.conf"))
    }
}

const CONFIG: &str = "\
corpus = corpus.txt
queries = queries.tsv
schemas = schemas.tsv
kb = kb.tsv
mapping = mapping.tsv
anchors = anchors.tsv
suffixes = suffixes.txt
surface_patterns = surface_patterns.tsv
model_dir = models
dev_queries = dev_queries.tsv
dev_gold = dev_gold.tsv
output = responses.tsv
seed = 42
";
