//! Command-line front end. Every command reads an optional key=value config,
//! applies `--set` overrides, writes `resolved_config.txt` and its outputs
//! under `--out`.

use std::path::{Path, PathBuf};

use advframe_core::corpus::{extract_instances, generate_synthetic_set, Corpus, FrameLexicon, TargetAnnotation, TargetInstance, WordVectors};
use advframe_core::metrics::breakdown;
use clap::{Args, Parser, Subcommand};

use crate::checkpoint;
use crate::clusters::{serialize_assignments, serialize_cluster_model};
use crate::config::{ExperimentConfig, RESOLVED_FILE};
use crate::error::Result;
use crate::formats::{load_corpus, load_lexicon, load_vectors, serialize_corpus, serialize_lexicon, serialize_vectors, write_sentence, write_text};
use crate::pipeline::{
    assign_domains, build_model, check_labels, evaluate_at, model_word_vectors, outcomes, posteriors, run_training, split_by_domain,
    sweep_at, DomainSource,
};
use crate::report::{breakdown_csv, curve_csv, eval_csv, fmax_summary, restart_log_csv, train_log_csv};

pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const CLUSTER_FILE: &str = "clusters.txt";
pub const ASSIGNMENTS_FILE: &str = "assignments.tsv";
pub const RESTARTS_FILE: &str = "restarts.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const FMAX_FILE: &str = "fmax.txt";
pub const BREAKDOWN_FILE: &str = "breakdown.csv";
pub const DECODED_FILE: &str = "decoded.txt";

#[derive(Debug, Parser)]
#[command(name = "advframe", version, about = "Domain-adversarial semantic frame parser")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for evaluation and clustering restarts.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Configuration override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-domain corpus, lexicon, vectors and splits.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        domains: Option<usize>,
        /// Sentences per domain.
        #[arg(long)]
        sentences: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cluster the training sentences into pseudo-domains.
    Cluster {
        #[command(flatten)]
        common: Common,
    },
    /// Train a parser (baseline, inferred-domain or gold-domain adversarial).
    Train {
        #[command(flatten)]
        common: Common,
        /// Domain labels for the adversary: none, inferred or gold.
        #[arg(long)]
        domains: Option<DomainSource>,
    },
    /// Score a checkpoint at the configured δ.
    Eval(EvalArgs),
    /// Score a checkpoint over the δ grid.
    Sweep(EvalArgs),
    /// Argument scores per error-analysis factor.
    Breakdown(EvalArgs),
    /// Write the corpus back with predicted frames and elements.
    Decode(EvalArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Checkpoint directory; defaults to the output directory.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Corpus to score; defaults to the `test` path.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

fn resolve(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for o in &common.overrides {
        cfg.set_pair(o)?;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn finish_config(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(crate::error::io_err(&cfg.out))?;
    // A second initialisation in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    write_text(&cfg.out.join(RESOLVED_FILE), &cfg.resolved())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { common, domains, sentences, seed } => {
            let mut cfg = resolve(&common)?;
            if let Some(d) = domains {
                cfg.synth.domains = d;
            }
            if let Some(s) = sentences {
                cfg.synth.sentences_per_domain = s;
            }
            if let Some(s) = seed {
                cfg.gen_seed = s;
            }
            finish_config(&cfg)?;
            cmd_gen(&cfg)
        }
        Command::Cluster { common } => {
            let cfg = resolve(&common)?;
            finish_config(&cfg)?;
            cmd_cluster(&cfg)
        }
        Command::Train { common, domains } => {
            let mut cfg = resolve(&common)?;
            if let Some(d) = domains {
                cfg.domain_source = d;
            }
            finish_config(&cfg)?;
            cmd_train(&cfg)
        }
        Command::Eval(a) => with_eval(&a, |cfg, s| {
            let e = evaluate_at(&s.posts, &s.instances, &s.lexicon, &s.model.labels, cfg.delta)?;
            write_text(&cfg.out.join(EVAL_FILE), &eval_csv(&e)?)
        }),
        Command::Sweep(a) => with_eval(&a, |cfg, s| {
            let curve = sweep_at(&s.posts, &s.instances, &s.lexicon, &s.model.labels, &cfg.grid()?)?;
            write_text(&cfg.out.join(CURVE_FILE), &curve_csv(&curve)?)?;
            write_text(&cfg.out.join(FMAX_FILE), &fmax_summary(&curve))
        }),
        Command::Breakdown(a) => with_eval(&a, |cfg, s| {
            let outs = outcomes(&s.posts, &s.instances, &s.lexicon, &s.model.labels, cfg.delta)?;
            let pairs: Vec<_> = s.instances.iter().zip(&outs).map(|(i, o)| (i, o.hypothesis())).collect();
            let rows = breakdown(&pairs, &s.corpus, &s.lexicon, &cfg.pos)?;
            write_text(&cfg.out.join(BREAKDOWN_FILE), &breakdown_csv(&rows)?)
        }),
        Command::Decode(a) => with_eval(&a, |cfg, s| {
            let outs = outcomes(&s.posts, &s.instances, &s.lexicon, &s.model.labels, cfg.delta)?;
            let mut per_sentence: Vec<Vec<TargetAnnotation>> = vec![Vec::new(); s.corpus.len()];
            for (inst, o) in s.instances.iter().zip(&outs) {
                if let Some(h) = o.hypothesis() {
                    per_sentence[inst.sentence].push(TargetAnnotation {
                        trigger: h.trigger,
                        lu: inst.lu.clone(),
                        frame: h.frame.clone(),
                        elements: h.elements.clone(),
                    });
                }
            }
            let mut text = String::new();
            for (sent, anns) in s.corpus.sentences.iter().zip(&per_sentence) {
                write_sentence(&mut text, sent, anns);
            }
            write_text(&cfg.out.join(DECODED_FILE), &text)
        }),
    }
}

fn cmd_gen(cfg: &ExperimentConfig) -> Result<()> {
    let set = generate_synthetic_set(&cfg.synth, cfg.gen_seed)?;
    let split = split_by_domain(&set.corpus, cfg.heldout_domains, cfg.train_fraction)?;
    let out = &cfg.out;
    write_text(&out.join("corpus.txt"), &serialize_corpus(&set.corpus))?;
    write_text(&out.join("lexicon.txt"), &serialize_lexicon(&set.lexicon))?;
    write_text(&out.join("vectors.txt"), &serialize_vectors(&set.vectors))?;
    let mut summary = format!("domains {}\n", set.domain_names.join(","));
    for (name, c) in [("corpus", &set.corpus), ("train", &split.train), ("test_in", &split.test_in), ("test_out", &split.test_out)] {
        if name != "corpus" {
            write_text(&out.join(format!("{name}.txt")), &serialize_corpus(c))?;
        }
        summary.push_str(&format!("{name} sentences {} instances {}\n", c.len(), c.annotation_count()));
    }
    write_text(&out.join("summary.txt"), &summary)
}

/// Training corpus and lexicon from the config paths.
fn load_training(cfg: &ExperimentConfig) -> Result<(Corpus, FrameLexicon, Vec<TargetInstance>)> {
    let corpus = load_corpus(cfg.require("train", &cfg.train)?)?;
    let lexicon = load_lexicon(cfg.require("lexicon", &cfg.lexicon)?)?;
    corpus.validate(Some(&lexicon))?;
    let instances = extract_instances(&corpus, &lexicon)?;
    Ok((corpus, lexicon, instances))
}

fn optional_vectors(cfg: &ExperimentConfig) -> Result<Option<WordVectors>> {
    cfg.vectors.as_deref().map(load_vectors).transpose()
}

/// External vectors when configured, else the fresh model's word table.
fn clustering_vectors(cfg: &ExperimentConfig, corpus: &Corpus, lexicon: &FrameLexicon) -> Result<WordVectors> {
    match optional_vectors(cfg)? {
        Some(v) => Ok(v),
        None => model_word_vectors(&build_model(corpus, lexicon, cfg.tagger, None, false, cfg.training.seed)?),
    }
}

fn write_clusters(out: &Path, labels: &crate::pipeline::DomainLabels) -> Result<()> {
    if let Some((model, logs, assignments)) = &labels.clusters {
        write_text(&out.join(CLUSTER_FILE), &serialize_cluster_model(model))?;
        write_text(&out.join(ASSIGNMENTS_FILE), &serialize_assignments(assignments))?;
        write_text(&out.join(RESTARTS_FILE), &restart_log_csv(logs)?)?;
    }
    Ok(())
}

fn cmd_cluster(cfg: &ExperimentConfig) -> Result<()> {
    let (corpus, lexicon, mut instances) = load_training(cfg)?;
    let vectors = clustering_vectors(cfg, &corpus, &lexicon)?;
    let labels = assign_domains(DomainSource::Inferred, &corpus, &mut instances, &vectors, &cfg.kmeans)?;
    write_clusters(&cfg.out, &labels)
}

fn cmd_train(cfg: &ExperimentConfig) -> Result<()> {
    let (corpus, lexicon, mut instances) = load_training(cfg)?;
    let vectors = optional_vectors(cfg)?;
    let model = build_model(&corpus, &lexicon, cfg.tagger, vectors.as_ref(), cfg.freeze_vectors, cfg.training.seed)?;
    let cluster_vectors = match &vectors {
        Some(v) => v.clone(),
        None => model_word_vectors(&model)?,
    };
    let labels = assign_domains(cfg.domain_source, &corpus, &mut instances, &cluster_vectors, &cfg.kmeans)?;
    write_clusters(&cfg.out, &labels)?;
    let trained = run_training(model, &corpus, &instances, &lexicon, cfg.domain_source, labels.classes, &cfg.train_config())?;
    checkpoint::save(&cfg.out, &trained.model, trained.head.as_ref())?;
    write_text(&cfg.out.join(TRAIN_LOG_FILE), &train_log_csv(&trained.log)?)
}

struct Scored {
    model: advframe_core::tagger::ParserModel,
    corpus: Corpus,
    lexicon: FrameLexicon,
    instances: Vec<TargetInstance>,
    posts: Vec<advframe_core::numerics::Tensor>,
}

fn with_eval(a: &EvalArgs, f: impl FnOnce(&ExperimentConfig, &Scored) -> Result<()>) -> Result<()> {
    let cfg = resolve(&a.common)?;
    finish_config(&cfg)?;
    let ckpt = a.checkpoint.clone().unwrap_or_else(|| cfg.out.clone());
    let (model, _) = checkpoint::load(&ckpt)?;
    let lexicon = load_lexicon(cfg.require("lexicon", &cfg.lexicon)?)?;
    check_labels(&model, &lexicon)?;
    let path = match &a.corpus {
        Some(p) => p.clone(),
        None => cfg.require("test", &cfg.test)?.to_path_buf(),
    };
    let corpus = load_corpus(&path)?;
    corpus.validate(Some(&lexicon))?;
    let instances = extract_instances(&corpus, &lexicon)?;
    let posts = posteriors(&model, &corpus, &instances)?;
    f(&cfg, &Scored { model, corpus, lexicon, instances, posts })
}
