use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relfactory::alias::AnchorLexicon;
use relfactory::config::PipelineConfig;
use relfactory::evaluation::ScoreFlags;
use relfactory::synth::{Fixture, SynthConfig};
use relfactory::{io, pipeline, Error, Result};

#[derive(Parser)]
#[command(name = "relfactory", version, about = "Slot filling with distant supervision")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train classifiers and pattern tables from the KB and corpus.
    Train(Common),
    /// Tune cost factors and pattern thresholds on the development set.
    Tune(Common),
    /// Answer the configured queries and write a response file.
    Run {
        #[command(flatten)]
        common: Common,
        /// Response file; overrides `output` from the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a response file against gold annotations.
    Score {
        responses: PathBuf,
        gold: PathBuf,
        /// Accept a correct filler from any document.
        #[arg(long)]
        anydoc: bool,
        /// Compare fillers case-insensitively.
        #[arg(long)]
        lowercase: bool,
        /// Config supplying the anchor lexicon and schemas.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a synthetic fixture (corpus, KB, queries, gold, config).
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(short, long)]
    config: PathBuf,
    /// `key=value` override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Validator to switch off; repeatable.
    #[arg(long)]
    disable: Vec<String>,
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long)]
    limit: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        let cwd = Path::new("");
        for o in &self.overrides {
            cfg.apply_override(o, cwd)?;
        }
        for d in &self.disable {
            cfg.set("disable", d, cwd)?;
        }
        if let Some(id) = &self.run_id {
            cfg.set("run_id", id, cwd)?;
        }
        if let Some(limit) = self.limit {
            cfg.limit = limit;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let report = pipeline::cmd_train(&common.load()?)?;
            for (rel, (pos, neg)) in &report.trained {
                println!("trained {rel}: {pos} positive, {neg} negative");
            }
            for rel in &report.skipped {
                println!("skipped {rel}: no training pairs");
            }
            println!("{} scored pattern rows", report.pattern_rows);
        }
        Command::Tune(common) => {
            let report = pipeline::cmd_tune(&common.load()?)?;
            for (name, state) in [("j", &report.j), ("threshold", &report.thresholds)] {
                if let Some(s) = state {
                    for (rel, v) in &s.params {
                        println!("{name} {rel} = {v}");
                    }
                    println!("{name} dev F1 = {:.4}", s.f1);
                }
            }
        }
        Command::Run { common, output } => {
            let mut cfg = common.load()?;
            if let Some(out) = output {
                cfg.set("output", &out.to_string_lossy(), Path::new(""))?;
            }
            let rows = pipeline::cmd_run(&cfg)?;
            if cfg.path("output").is_none() {
                print!("{}", io::write_responses(&rows)?);
            }
        }
        Command::Score {
            responses,
            gold,
            anydoc,
            lowercase,
            config,
        } => {
            let (mut lexicon, mut known) = (None, None);
            if let Some(path) = config {
                let cfg = PipelineConfig::load(&path)?;
                if let Some(p) = cfg.optional("anchors")? {
                    lexicon = Some(AnchorLexicon::parse(&io::read_to_string(p)?, &p.display().to_string())?);
                }
                if let Some(p) = cfg.optional("schemas")? {
                    let schemas = io::parse_schemas(&io::read_to_string(p)?, &p.display().to_string())?;
                    known = Some(schemas.iter().map(|s| s.name.clone()).collect::<BTreeSet<_>>());
                }
            }
            let flags = ScoreFlags { anydoc, lowercase };
            let report = pipeline::cmd_score(&responses, &gold, flags, lexicon.as_ref(), known.as_ref())?;
            println!("{}", report.summary());
        }
        Command::Synth { dir, seed } => {
            std::fs::create_dir_all(&dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
            let fixture = Fixture::generate(&SynthConfig {
                seed,
                ..SynthConfig::default()
            });
            let conf = fixture.write_to(&dir)?;
            println!("{}", conf.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
