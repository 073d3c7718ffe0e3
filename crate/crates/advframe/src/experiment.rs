//! The multi-seed domain-transfer protocol: generate a multi-domain corpus,
//! train on the leading domains, and compare run modes on in-domain and
//! held-out-domain test sets.

use std::time::Instant;

use advframe_core::adversary::{probe_accuracy, EpochLog, ProbeConfig, TrainConfig};
use advframe_core::clustering::KMeansConfig;
use advframe_core::corpus::{extract_instances, generate_synthetic_set, label_gold_domains, SynthConfig, SyntheticSet, TargetInstance};
use advframe_core::metrics::{delta_grid, Level};
use advframe_core::tagger::TaggerConfig;

use crate::error::{Error, Result};
use crate::pipeline::{assign_domains, build_model, posteriors, probe_features, run_training, split_by_domain, sweep_at, DomainSource, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub synth: SynthConfig,
    /// Corpus seed for run `s` is `corpus_seed + s`.
    pub corpus_seed: u64,
    pub heldout: usize,
    pub train_fraction: f64,
    pub tagger: TaggerConfig,
    pub freeze_vectors: bool,
    /// `seed` and `adversarial`/`k` are set per run.
    pub training: TrainConfig,
    pub inferred_k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub grid: (f64, f64, f64),
    pub seeds: Vec<u64>,
    pub probe: ProbeConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            synth: SynthConfig { domains: 3, sentences_per_domain: 150, ..Default::default() },
            corpus_seed: 100,
            heldout: 1,
            train_fraction: 0.8,
            tagger: TaggerConfig::default(),
            freeze_vectors: false,
            training: TrainConfig::default(),
            inferred_k: 2,
            restarts: 10,
            max_iter: 300,
            grid: (-0.4, 0.8, 0.1),
            seeds: (0..5).collect(),
            probe: ProbeConfig::default(),
        }
    }
}

/// One seed's corpus, split and gold-labelled instances.
#[derive(Debug, Clone)]
pub struct SeedData {
    pub seed: u64,
    pub set: SyntheticSet,
    pub split: Split,
    /// Training instances carrying gold domain labels.
    pub train: Vec<TargetInstance>,
    pub test_in: Vec<TargetInstance>,
    pub test_out: Vec<TargetInstance>,
    pub domain_names: Vec<String>,
}

pub fn prepare_seed(cfg: &ProtocolConfig, seed: u64) -> Result<SeedData> {
    let set = generate_synthetic_set(&cfg.synth, cfg.corpus_seed.wrapping_add(seed))?;
    let split = split_by_domain(&set.corpus, cfg.heldout, cfg.train_fraction)?;
    let mut train = extract_instances(&split.train, &set.lexicon)?;
    let domain_names = label_gold_domains(&split.train, &mut train)?;
    let mut test_in = extract_instances(&split.test_in, &set.lexicon)?;
    let in_names = label_gold_domains(&split.test_in, &mut test_in)?;
    if in_names != domain_names {
        return Err(Error::Config("in-domain test does not cover the training domains".into()));
    }
    let test_out = extract_instances(&split.test_out, &set.lexicon)?;
    Ok(SeedData { seed, set, split, train, test_in, test_out, domain_names })
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub mode: DomainSource,
    pub seed: u64,
    /// Argument-level `(δ*, Fmax)`.
    pub in_domain: (f64, f64),
    pub out_domain: (f64, f64),
    /// Accuracy of a gold-domain probe on the frozen top hidden layer.
    pub probe_accuracy: f64,
    pub last_epoch: EpochLog,
    pub seconds: f64,
}

pub fn run_mode(cfg: &ProtocolConfig, data: &SeedData, mode: DomainSource) -> Result<RunResult> {
    let start = Instant::now();
    let mut instances = data.train.clone();
    let kmeans = KMeansConfig { k: cfg.inferred_k, restarts: cfg.restarts, max_iter: cfg.max_iter, seed: data.seed };
    let domains = assign_domains(mode, &data.split.train, &mut instances, &data.set.vectors, &kmeans)?;
    let model = build_model(
        &data.split.train,
        &data.set.lexicon,
        cfg.tagger,
        Some(&data.set.vectors),
        cfg.freeze_vectors,
        data.seed,
    )?;
    let training = TrainConfig { seed: data.seed, log_train_f1: false, ..cfg.training.clone() };
    let trained = run_training(model, &data.split.train, &instances, &data.set.lexicon, mode, domains.classes, &training)?;
    let model = &trained.model;

    let grid = delta_grid(cfg.grid.0, cfg.grid.1, cfg.grid.2)?;
    let fmax = |corpus, insts: &[TargetInstance]| -> Result<(f64, f64)> {
        let posts = posteriors(model, corpus, insts)?;
        Ok(sweep_at(&posts, insts, &data.set.lexicon, &model.labels, &grid)?.fmax(Level::Argument))
    };
    let in_domain = fmax(&data.split.test_in, &data.test_in)?;
    let out_domain = fmax(&data.split.test_out, &data.test_out)?;

    let probe_train = probe_features(model, &data.split.train, &data.train)?;
    let probe_test = probe_features(model, &data.split.test_in, &data.test_in)?;
    let probe_cfg = ProbeConfig { seed: data.seed, ..cfg.probe.clone() };
    let probe_accuracy = probe_accuracy(&probe_train, &probe_test, data.domain_names.len(), &probe_cfg)?;

    let last_epoch = trained.log.last().cloned().ok_or_else(|| Error::Config("training ran no epochs".into()))?;
    Ok(RunResult {
        mode,
        seed: data.seed,
        in_domain,
        out_domain,
        probe_accuracy,
        last_epoch,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Every mode on every seed, seeds outermost.
pub fn run_protocol(cfg: &ProtocolConfig, modes: &[DomainSource]) -> Result<Vec<RunResult>> {
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let data = prepare_seed(cfg, seed)?;
        for &m in modes {
            out.push(run_mode(cfg, &data, m)?);
        }
    }
    Ok(out)
}

/// Upper median for even lengths; NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub mode: DomainSource,
    pub runs: usize,
    pub in_fmax: f64,
    pub out_fmax: f64,
    pub probe_accuracy: f64,
}

pub fn summarize(results: &[RunResult], mode: DomainSource) -> ModeSummary {
    let runs: Vec<&RunResult> = results.iter().filter(|r| r.mode == mode).collect();
    let col = |f: fn(&RunResult) -> f64| median(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
    ModeSummary {
        mode,
        runs: runs.len(),
        in_fmax: col(|r| r.in_domain.1),
        out_fmax: col(|r| r.out_domain.1),
        probe_accuracy: col(|r| r.probe_accuracy),
    }
}

/// Seeds on which `mode`'s probe accuracy is strictly below the baseline's.
pub fn probe_wins(results: &[RunResult], mode: DomainSource) -> (usize, usize) {
    let mut wins = 0;
    let mut total = 0;
    for r in results.iter().filter(|r| r.mode == mode) {
        if let Some(b) = results.iter().find(|b| b.mode == DomainSource::None && b.seed == r.seed) {
            total += 1;
            wins += usize::from(r.probe_accuracy < b.probe_accuracy);
        }
    }
    (wins, total)
}
