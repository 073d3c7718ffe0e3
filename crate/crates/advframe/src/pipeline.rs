//! Model construction, domain labelling and (optionally parallel)
//! evaluation shared by the CLI and the experiment harness.

use advframe_core::adversary::{top_hidden_states, train, TrainConfig, Trained};
use advframe_core::clustering::{corpus_embeddings, kmeans_restart, label_corpus, model_from_restarts, ClusterModel, KMeansConfig, RestartLog};
use advframe_core::corpus::{label_gold_domains, Corpus, FrameLexicon, TargetInstance, WordVectors};
use advframe_core::metrics::{check_grid, decode_outcome, instance_posteriors, tally, Evaluation, Outcome, PRCurve};
use advframe_core::numerics::Tensor;
use advframe_core::tagger::{LabelInventory, ParserModel, TaggerConfig, Vocabularies};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainSource {
    None,
    Inferred,
    Gold,
}

impl DomainSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainSource::None => "none",
            DomainSource::Inferred => "inferred",
            DomainSource::Gold => "gold",
        }
    }
}

impl std::str::FromStr for DomainSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DomainSource::None),
            "inferred" => Ok(DomainSource::Inferred),
            "gold" => Ok(DomainSource::Gold),
            other => Err(Error::Config(format!("domain source `{other}` is not none|inferred|gold"))),
        }
    }
}

/// Vocabularies from the training sentences plus any pre-trained words,
/// labels from the lexicon, and pre-trained vectors copied in.
pub fn build_model(
    train_corpus: &Corpus,
    lexicon: &FrameLexicon,
    config: TaggerConfig,
    vectors: Option<&WordVectors>,
    freeze: bool,
    seed: u64,
) -> Result<ParserModel> {
    let vocab = Vocabularies::build(&train_corpus.sentences, vectors);
    let mut model = ParserModel::new(config, vocab, LabelInventory::from_lexicon(lexicon), seed)?;
    if let Some(v) = vectors {
        model.load_word_vectors(v, freeze)?;
    }
    Ok(model)
}

/// The model's word-embedding table as stand-alone vectors.
pub fn model_word_vectors(model: &ParserModel) -> Result<WordVectors> {
    let table = &model.embeddings[0].table.value;
    let mut out = WordVectors::new(table.cols());
    out.set_unk(table.row(0))?;
    for (i, w) in model.vocab.words.items().iter().enumerate() {
        out.insert(w, table.row(i + 1))?;
    }
    Ok(out)
}

/// k-means restarts run in parallel; selection does not depend on order.
pub fn fit_clusters(points: &[Vec<f64>], config: &KMeansConfig) -> Result<(ClusterModel, Vec<RestartLog>)> {
    if config.restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    let results = (0..config.restarts)
        .into_par_iter()
        .map(|r| kmeans_restart(points, config.k, config.max_iter, r, config.seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(model_from_restarts(results, config.seed))
}

#[derive(Debug, Clone)]
pub struct DomainLabels {
    pub classes: usize,
    pub clusters: Option<(ClusterModel, Vec<RestartLog>, Vec<usize>)>,
    pub names: Vec<String>,
}

/// Fills `domain_label` per the requested source; returns the class count.
pub fn assign_domains(
    source: DomainSource,
    corpus: &Corpus,
    instances: &mut [TargetInstance],
    vectors: &WordVectors,
    kmeans: &KMeansConfig,
) -> Result<DomainLabels> {
    match source {
        DomainSource::None => Ok(DomainLabels { classes: 0, clusters: None, names: Vec::new() }),
        DomainSource::Gold => {
            let names = label_gold_domains(corpus, instances)
                .map_err(|e| Error::Config(format!("gold domains unavailable: {e}")))?;
            Ok(DomainLabels { classes: names.len(), clusters: None, names })
        }
        DomainSource::Inferred => {
            let points = corpus_embeddings(corpus, vectors)?;
            let (model, logs) = fit_clusters(&points, kmeans)?;
            let labels = label_corpus(corpus, instances, &model, vectors)?;
            let names = (0..model.k()).map(|c| format!("cluster{c}")).collect();
            Ok(DomainLabels { classes: model.k(), clusters: Some((model, logs, labels)), names })
        }
    }
}

pub fn run_training(
    model: ParserModel,
    corpus: &Corpus,
    instances: &[TargetInstance],
    lexicon: &FrameLexicon,
    source: DomainSource,
    classes: usize,
    config: &TrainConfig,
) -> Result<Trained> {
    let mut cfg = config.clone();
    cfg.adversarial = source != DomainSource::None;
    if cfg.adversarial {
        cfg.k = classes;
    }
    Ok(train(model, corpus, instances, lexicon, &cfg)?)
}

pub fn posteriors(model: &ParserModel, corpus: &Corpus, instances: &[TargetInstance]) -> Result<Vec<Tensor>> {
    Ok(instances
        .par_iter()
        .map(|i| instance_posteriors(model, corpus, i))
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn outcomes(
    posts: &[Tensor],
    instances: &[TargetInstance],
    lexicon: &FrameLexicon,
    labels: &LabelInventory,
    delta: f64,
) -> Result<Vec<Outcome>> {
    Ok(posts
        .par_iter()
        .zip(instances)
        .map(|(p, i)| decode_outcome(p, i, lexicon, labels, delta))
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn evaluate_at(
    posts: &[Tensor],
    instances: &[TargetInstance],
    lexicon: &FrameLexicon,
    labels: &LabelInventory,
    delta: f64,
) -> Result<Evaluation> {
    advframe_core::decoder::check_delta(delta)?;
    Ok(tally(instances, &outcomes(posts, instances, lexicon, labels, delta)?, delta)?)
}

pub fn sweep_at(
    posts: &[Tensor],
    instances: &[TargetInstance],
    lexicon: &FrameLexicon,
    labels: &LabelInventory,
    grid: &[f64],
) -> Result<PRCurve> {
    check_grid(grid)?;
    let points = grid
        .iter()
        .map(|&d| evaluate_at(posts, instances, lexicon, labels, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(PRCurve { points })
}

/// Errors unless the model's label inventory matches the lexicon's.
pub fn check_labels(model: &ParserModel, lexicon: &FrameLexicon) -> Result<()> {
    let expected = LabelInventory::from_lexicon(lexicon);
    if expected != model.labels {
        return Err(Error::Version("checkpoint label inventory differs from the lexicon's".into()));
    }
    Ok(())
}

/// Frozen top hidden layers paired with their domain labels.
pub fn probe_features(
    model: &ParserModel,
    corpus: &Corpus,
    instances: &[TargetInstance],
) -> Result<Vec<(Tensor, usize)>> {
    let tops = top_hidden_states(model, corpus, instances)?;
    tops.into_iter()
        .zip(instances)
        .map(|(t, i)| {
            i.domain_label
                .map(|d| (t, d))
                .ok_or_else(|| Error::Config("probe instance without a domain label".into()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub train: Corpus,
    pub test_in: Corpus,
    pub test_out: Corpus,
}

/// Domains in order of first appearance. Within each of the first
/// `len - heldout` domains the leading `train_fraction` of sentences (rounded
/// down) train and the rest form the in-domain test; the trailing `heldout`
/// domains are the out-of-domain test. Sentences keep their corpus order.
pub fn split_by_domain(corpus: &Corpus, heldout: usize, train_fraction: f64) -> Result<Split> {
    let mut order: Vec<&str> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    for s in &corpus.sentences {
        let d = s.domain.as_deref().ok_or_else(|| Error::Config("splitting needs `#domain` on every sentence".into()))?;
        match order.iter().position(|&o| o == d) {
            Some(i) => sizes[i] += 1,
            None => {
                order.push(d);
                sizes.push(1);
            }
        }
    }
    if heldout >= order.len() && !order.is_empty() {
        return Err(Error::Config(format!("cannot hold out {heldout} of {} domains", order.len())));
    }
    let kept = order.len() - heldout;
    let mut seen = vec![0usize; order.len()];
    let mut split = Split::default();
    for s in &corpus.sentences {
        let i = order.iter().position(|&o| Some(o) == s.domain.as_deref()).expect("collected above");
        seen[i] += 1;
        let target = if i >= kept {
            &mut split.test_out
        } else if (seen[i] as f64) <= (sizes[i] as f64 * train_fraction).floor() {
            &mut split.train
        } else {
            &mut split.test_in
        };
        target.sentences.push(s.clone());
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use advframe_core::corpus::Sentence;

    fn corpus(domains: &[&str]) -> Corpus {
        Corpus {
            sentences: domains
                .iter()
                .map(|d| Sentence { domain: Some(d.to_string()), ..Default::default() })
                .collect(),
        }
    }

    #[test]
    fn split_keeps_order_and_fractions() {
        let c = corpus(&["A", "B", "A", "A", "C", "B", "A", "A", "C"]);
        let s = split_by_domain(&c, 1, 0.8).unwrap();
        let names = |c: &Corpus| c.sentences.iter().map(|s| s.domain.clone().unwrap()).collect::<String>();
        assert_eq!(names(&s.train), "ABAAA");
        assert_eq!(names(&s.test_in), "BA");
        assert_eq!(names(&s.test_out), "CC");
        assert!(split_by_domain(&c, 3, 0.8).is_err());
        assert!(split_by_domain(&Corpus { sentences: vec![Sentence::default()] }, 0, 0.8).is_err());
    }

    #[test]
    fn domain_source_parses() {
        for s in [DomainSource::None, DomainSource::Inferred, DomainSource::Gold] {
            assert_eq!(s.as_str().parse::<DomainSource>().unwrap(), s);
        }
    }
}
