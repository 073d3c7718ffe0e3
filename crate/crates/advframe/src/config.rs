//! Plain-text `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored; unknown keys are errors. Every
//! value actually used can be written back with [`ExperimentConfig::resolved`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use advframe_core::adversary::TrainConfig;
use advframe_core::clustering::KMeansConfig;
use advframe_core::corpus::SynthConfig;
use advframe_core::decoder::check_delta;
use advframe_core::metrics::{delta_grid, PosClasses};
use advframe_core::tagger::TaggerConfig;

use crate::error::{Error, Result};
use crate::formats::read_text;
use crate::pipeline::DomainSource;

pub const RESOLVED_FILE: &str = "resolved_config.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub out: PathBuf,
    pub tagger: TaggerConfig,
    pub freeze_vectors: bool,
    pub training: TrainConfig,
    pub delta: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_step: f64,
    pub kmeans: KMeansConfig,
    pub domain_source: DomainSource,
    pub pos: PosClasses,
    pub threads: usize,
    pub synth: SynthConfig,
    pub gen_seed: u64,
    /// Trailing domains kept out of training by `gen`.
    pub heldout_domains: usize,
    pub train_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: None,
            test: None,
            lexicon: None,
            vectors: None,
            out: PathBuf::from("out"),
            tagger: TaggerConfig::default(),
            freeze_vectors: false,
            training: TrainConfig::default(),
            delta: 0.0,
            grid_lo: -0.4,
            grid_hi: 0.8,
            grid_step: 0.1,
            kmeans: KMeansConfig::default(),
            domain_source: DomainSource::None,
            pos: PosClasses::default(),
            threads: 1,
            synth: SynthConfig::default(),
            gen_seed: 0,
            heldout_domains: 0,
            train_fraction: 0.8,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn path_opt(value: &str) -> Option<PathBuf> {
    (value != "none" && !value.is_empty()).then(|| PathBuf::from(value))
}

fn show_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_text(path)?)
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let t = &mut self.training;
        match key {
            "train" => self.train = path_opt(v),
            "test" => self.test = path_opt(v),
            "lexicon" => self.lexicon = path_opt(v),
            "vectors" => self.vectors = path_opt(v),
            "out" => self.out = PathBuf::from(v),
            "word_dim" => self.tagger.word_dim = parse(key, v)?,
            "feature_dim" => self.tagger.feature_dim = parse(key, v)?,
            "hidden" => self.tagger.hidden = parse(key, v)?,
            "layers" => self.tagger.layers = parse(key, v)?,
            "freeze_vectors" => self.freeze_vectors = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "learning_rate" => t.learning_rate = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "seed" => t.seed = parse(key, v)?,
            "clip" => t.clip = parse_opt(key, v)?,
            "fixed_lambda" => t.fixed_lambda = parse_opt(key, v)?,
            "head_widths" => t.head_widths = parse_list(key, v)?,
            "head_filters" => t.head_filters = parse(key, v)?,
            "log_train_f1" => t.log_train_f1 = parse(key, v)?,
            "delta" => self.delta = parse(key, v)?,
            "grid_lo" => self.grid_lo = parse(key, v)?,
            "grid_hi" => self.grid_hi = parse(key, v)?,
            "grid_step" => self.grid_step = parse(key, v)?,
            "clusters" => self.kmeans.k = parse(key, v)?,
            "restarts" => self.kmeans.restarts = parse(key, v)?,
            "max_iter" => self.kmeans.max_iter = parse(key, v)?,
            "cluster_seed" => self.kmeans.seed = parse(key, v)?,
            "domain_source" => self.domain_source = v.parse()?,
            "verb_pos" => self.pos.verb_prefixes = parse_list(key, v)?,
            "noun_pos" => self.pos.noun_prefixes = parse_list(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "gen_domains" => self.synth.domains = parse(key, v)?,
            "gen_sentences" => self.synth.sentences_per_domain = parse(key, v)?,
            "gen_frames" => self.synth.frames = parse(key, v)?,
            "gen_nouns_per_class" => self.synth.nouns_per_class = parse(key, v)?,
            "gen_shared_nouns" => self.synth.shared_noun_fraction = parse(key, v)?,
            "gen_polysemous" => self.synth.polysemous_fraction = parse(key, v)?,
            "gen_frame_skew" => self.synth.frame_skew = parse(key, v)?,
            "gen_vector_dim" => self.synth.vector_dim = parse(key, v)?,
            "gen_topic_weight" => self.synth.topic_weight = parse(key, v)?,
            "gen_topic_axis" => self.synth.topic_axis = parse(key, v)?,
            "gen_noise_weight" => self.synth.noise_weight = parse(key, v)?,
            "gen_seed" => self.gen_seed = parse(key, v)?,
            "heldout_domains" => self.heldout_domains = parse(key, v)?,
            "train_fraction" => self.train_fraction = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Every key with the value in effect, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.training;
        let s = &self.synth;
        vec![
            ("train", show_path(&self.train)),
            ("test", show_path(&self.test)),
            ("lexicon", show_path(&self.lexicon)),
            ("vectors", show_path(&self.vectors)),
            ("out", self.out.display().to_string()),
            ("word_dim", self.tagger.word_dim.to_string()),
            ("feature_dim", self.tagger.feature_dim.to_string()),
            ("hidden", self.tagger.hidden.to_string()),
            ("layers", self.tagger.layers.to_string()),
            ("freeze_vectors", self.freeze_vectors.to_string()),
            ("epochs", t.epochs.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("seed", t.seed.to_string()),
            ("clip", show_opt(&t.clip)),
            ("fixed_lambda", show_opt(&t.fixed_lambda)),
            ("head_widths", join(&t.head_widths)),
            ("head_filters", t.head_filters.to_string()),
            ("log_train_f1", t.log_train_f1.to_string()),
            ("delta", self.delta.to_string()),
            ("grid_lo", self.grid_lo.to_string()),
            ("grid_hi", self.grid_hi.to_string()),
            ("grid_step", self.grid_step.to_string()),
            ("clusters", self.kmeans.k.to_string()),
            ("restarts", self.kmeans.restarts.to_string()),
            ("max_iter", self.kmeans.max_iter.to_string()),
            ("cluster_seed", self.kmeans.seed.to_string()),
            ("domain_source", self.domain_source.as_str().to_string()),
            ("verb_pos", join(&self.pos.verb_prefixes)),
            ("noun_pos", join(&self.pos.noun_prefixes)),
            ("threads", self.threads.to_string()),
            ("gen_domains", s.domains.to_string()),
            ("gen_sentences", s.sentences_per_domain.to_string()),
            ("gen_frames", s.frames.to_string()),
            ("gen_nouns_per_class", s.nouns_per_class.to_string()),
            ("gen_shared_nouns", s.shared_noun_fraction.to_string()),
            ("gen_polysemous", s.polysemous_fraction.to_string()),
            ("gen_frame_skew", s.frame_skew.to_string()),
            ("gen_vector_dim", s.vector_dim.to_string()),
            ("gen_topic_weight", s.topic_weight.to_string()),
            ("gen_topic_axis", s.topic_axis.to_string()),
            ("gen_noise_weight", s.noise_weight.to_string()),
            ("gen_seed", self.gen_seed.to_string()),
            ("heldout_domains", self.heldout_domains.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
        ]
    }

    pub fn resolved(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// The training settings with the adversary switched per domain source.
    pub fn train_config(&self) -> TrainConfig {
        let mut t = self.training.clone();
        t.adversarial = self.domain_source != DomainSource::None;
        t
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        Ok(delta_grid(self.grid_lo, self.grid_hi, self.grid_step)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        check_delta(self.delta)?;
        self.grid()?;
        if self.kmeans.k == 0 || self.kmeans.restarts == 0 || self.kmeans.max_iter == 0 {
            return Err(Error::Config("clusters, restarts and max_iter must be positive".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn require<'a>(&self, key: &str, p: &'a Option<PathBuf>) -> Result<&'a Path> {
        p.as_deref().ok_or_else(|| Error::Config(format!("`{key}` path is required")))
    }
}
