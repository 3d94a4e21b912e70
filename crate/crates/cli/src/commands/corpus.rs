//! `gen-corpus`, `synth` and `validate-archive`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use probelens::corpus::{generate_corpus, read_qa_pool, split_corpus, CorpusSource, Task};
use probelens::synth::{chance_archive, planted_archive, PlantSpec};
use probelens::tensor_store::{split_archive, validate_archive, write_archive};

use super::{parse_enum, set, set_opt, validated};
use crate::config::{require_file, RunConfig};
use crate::output::{CmdResult, ExitCode, EXIT_ARCHIVE, EXIT_CONFIG, EXIT_GENERATION};

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    /// kv or mdqa.
    #[arg(long, value_parser = parse_enum::<Task>)]
    task: Option<Task>,
    /// Items per prompt (key-value pairs or documents).
    #[arg(long = "n")]
    n_items: Option<u32>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// QA pool (JSON lines) for MDQA.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    max_doc_chars: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl GenCorpusArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let c = &mut cfg.corpus;
        set(&mut c.task, &self.task);
        set(&mut c.n_items, &self.n_items);
        set(&mut c.iterations, &self.iterations);
        set(&mut c.seed, &self.seed);
        set_opt(&mut c.pool, &self.pool);
        set(&mut c.test_fraction, &self.test_fraction);
        set(&mut c.max_doc_chars, &self.max_doc_chars);
        set_opt(&mut cfg.paths.out, &self.out);
    }
}

pub fn gen_corpus(cfg: &mut RunConfig, args: &GenCorpusArgs) -> CmdResult {
    args.apply(cfg);
    validated(cfg)?;
    let out = cfg.out_dir().exit(EXIT_CONFIG)?.to_path_buf();
    let c = &cfg.corpus;
    let pool = match c.task {
        Task::Kv => None,
        Task::Mdqa => {
            let path = require_file("QA pool", c.pool.as_deref()).exit(EXIT_CONFIG)?;
            Some(read_qa_pool(&path).exit(EXIT_GENERATION)?)
        }
        Task::Synthetic => {
            return Err(anyhow!("task synthetic has no text corpus; use the synth command")).exit(EXIT_CONFIG)
        }
    };
    let source = match &pool {
        None => CorpusSource::Kv,
        Some(p) => CorpusSource::Mdqa {
            pool: p,
            max_body_chars: c.max_doc_chars,
        },
    };
    let corpus = generate_corpus(source, c.n_items, c.iterations, c.seed).exit(EXIT_GENERATION)?;
    let (train, test) = split_corpus(&corpus, c.test_fraction, c.seed).exit(EXIT_GENERATION)?;
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating {}", out.display()))
        .exit(EXIT_GENERATION)?;
    train.write_jsonl(&out.join("train.jsonl")).exit(EXIT_GENERATION)?;
    test.write_jsonl(&out.join("test.jsonl")).exit(EXIT_GENERATION)?;
    cfg.write_resolved(&out).exit(EXIT_GENERATION)?;
    println!(
        "{} records ({} positions x {} iterations): train {}, test {}",
        corpus.records.len(),
        corpus.schedule.len(),
        c.iterations,
        train.records.len(),
        test.records.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Pure noise at every layer.
    #[arg(long)]
    chance: bool,
    #[arg(long)]
    n_layers: Option<u32>,
    #[arg(long)]
    hidden_dim: Option<u32>,
    #[arg(long)]
    n_classes: Option<u32>,
    #[arg(long)]
    signal_layer: Option<u32>,
    #[arg(long)]
    decay_start: Option<u32>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    per_class: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SynthArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.synth;
        s.chance |= self.chance;
        set(&mut s.n_layers, &self.n_layers);
        set(&mut s.hidden_dim, &self.hidden_dim);
        set(&mut s.n_classes, &self.n_classes);
        set(&mut s.signal_layer, &self.signal_layer);
        set_opt(&mut s.decay_start, &self.decay_start);
        set(&mut s.noise_sigma, &self.noise_sigma);
        set(&mut s.separation, &self.separation);
        set(&mut s.n_prompts_per_class, &self.per_class);
        set(&mut s.seed, &self.seed);
        set(&mut s.test_fraction, &self.test_fraction);
        set_opt(&mut cfg.paths.out, &self.out);
    }
}

pub fn synth(cfg: &mut RunConfig, args: &SynthArgs) -> CmdResult {
    args.apply(cfg);
    validated(cfg)?;
    let out = cfg.out_dir().exit(EXIT_CONFIG)?.to_path_buf();
    let s = &cfg.synth;
    let archive = if s.chance {
        chance_archive(s.n_layers, s.hidden_dim, s.n_classes, s.n_prompts_per_class, s.seed)
    } else {
        planted_archive(&PlantSpec {
            n_layers: s.n_layers,
            hidden_dim: s.hidden_dim,
            n_classes: s.n_classes,
            signal_layer: s.signal_layer,
            decay_start: s.decay_start,
            noise_sigma: s.noise_sigma,
            separation: s.separation,
            n_prompts_per_class: s.n_prompts_per_class,
            seed: s.seed,
        })
    }
    .exit(EXIT_CONFIG)?;
    let (train, test) = split_archive(&archive, s.test_fraction, s.seed).exit(EXIT_CONFIG)?;
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating {}", out.display()))
        .exit(EXIT_ARCHIVE)?;
    write_archive(&train, &out.join("train.prbe")).exit(EXIT_ARCHIVE)?;
    write_archive(&test, &out.join("test.prbe")).exit(EXIT_ARCHIVE)?;
    cfg.write_resolved(&out).exit(EXIT_ARCHIVE)?;
    println!(
        "{} prompts x {} layers x {} dims: train {}, test {}",
        archive.n_prompts(),
        archive.n_layers(),
        archive.hidden_dim(),
        train.n_prompts(),
        test.n_prompts()
    );
    Ok(())
}

pub fn validate(path: &Path) -> CmdResult {
    let report = validate_archive(path).exit(EXIT_ARCHIVE)?;
    if let Some(h) = &report.header {
        println!(
            "{}: {} prompts, {} layers, hidden dim {}",
            path.display(),
            h.n_prompts,
            h.n_layers,
            h.hidden_dim
        );
    }
    if report.is_valid() {
        println!("ok");
        return Ok(());
    }
    for f in &report.failures {
        println!("{f}");
    }
    Err(anyhow!("{} defect(s) in {}", report.failures.len(), path.display())).exit(EXIT_ARCHIVE)
}
