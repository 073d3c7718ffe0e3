//! Domain-adversarial training: a CNN domain classifier on the tagger's top
//! hidden layer, joined to the trunk through a gradient reversal layer.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, FrameLexicon, TargetInstance};
use crate::metrics::{evaluate, Level};
use crate::numerics::{
    conv1d_maxpool, conv1d_maxpool_backward, exp, softmax_xent, ConvBank, ConvCache, Linear, Param, Parameterized,
    Tensor,
};
use crate::tagger::model::frame_loss_grads;
use crate::tagger::{featurize, FeatureView, ParserModel};
use crate::{Error, Result};

const HEAD_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const PROBE_STREAM: u64 = 3;

/// λ = 2 / (1 + e^(−10p)) − 1 for training progress `p` in [0, 1].
pub fn lambda_schedule(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("progress {p} outside [0, 1]")));
    }
    Ok(2.0 / (1.0 + exp(-10.0 * p)) - 1.0)
}

/// Progress of `epoch` (0-based) out of `epochs`; a single epoch has p = 0.
pub fn epoch_progress(epoch: usize, epochs: usize) -> f64 {
    if epochs <= 1 {
        0.0
    } else {
        epoch as f64 / (epochs - 1) as f64
    }
}

/// Identity on the way forward.
pub fn grl_forward(x: &Tensor) -> Tensor {
    x.clone()
}

/// Reversed, scaled gradient on the way back.
pub fn grl_backward(upstream: &Tensor, lambda: f64) -> Tensor {
    let data = upstream.data().iter().map(|g| -lambda * g).collect();
    Tensor::from_vec(upstream.shape(), data).expect("same shape")
}

/// The Eq. 1 rule on one coordinate: θ − μ(∇L_frame − λ∇L_adv).
pub fn reversal_update(theta: f64, mu: f64, grad_frame: f64, grad_adv: f64, lambda: f64) -> f64 {
    theta - mu * (grad_frame - lambda * grad_adv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryHead {
    pub conv: ConvBank,
    pub output: Linear,
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    conv: ConvCache,
    pooled: Vec<f64>,
    rows: usize,
}

impl AdversaryHead {
    pub fn new(input_dim: usize, widths: &[usize], filters: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || filters == 0 || widths.is_empty() || widths.contains(&0) {
            return Err(Error::Config(format!("degenerate adversary head: k={k}, filters={filters}, widths={widths:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(HEAD_STREAM);
        let conv = ConvBank::new("adv.conv", input_dim, widths, filters, &mut rng);
        let output = Linear::new("adv.output", conv.output_dim(), k, &mut rng);
        Ok(AdversaryHead { conv, output })
    }

    pub fn classes(&self) -> usize {
        self.output.output_dim()
    }

    /// Domain logits. Sequences shorter than the widest filter are padded
    /// with zero rows at the end.
    pub fn forward(&self, top: &Tensor) -> Result<(Vec<f64>, HeadCache)> {
        let rows = top.rows();
        let need = self.conv.max_width();
        let padded;
        let input = if rows < need {
            let mut data = top.data().to_vec();
            data.resize(need * top.cols(), 0.0);
            padded = Tensor::from_vec(&[need, top.cols()], data)?;
            &padded
        } else {
            top
        };
        let (pooled, conv) = conv1d_maxpool(input, &self.conv)?;
        let logits = self.output.forward(&pooled)?;
        Ok((logits, HeadCache { conv, pooled, rows }))
    }

    /// Accumulates head gradients; returns the gradient on the top hidden layer.
    pub fn backward(&mut self, cache: &HeadCache, dlogits: &[f64]) -> Tensor {
        let dpooled = self.output.backward(&cache.pooled, dlogits);
        let dseq = conv1d_maxpool_backward(&cache.conv, &dpooled, &mut self.conv);
        let cols = dseq.cols();
        Tensor::from_vec(&[cache.rows, cols], dseq.data()[..cache.rows * cols].to_vec()).expect("trimmed shape")
    }

    pub fn predict(&self, top: &Tensor) -> Result<usize> {
        let (logits, _) = self.forward(top)?;
        Ok((0..logits.len()).fold(0, |b, i| if logits[i] > logits[b] { i } else { b }))
    }
}

impl Parameterized for AdversaryHead {
    fn params(&self) -> Vec<&Param> {
        let mut out = self.conv.params();
        out.extend(self.output.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.conv.params_mut();
        out.extend(self.output.params_mut());
        out
    }
}

/// Domain cross-entropy of the head on `top`, with `scale` applied to the
/// gradients. Head gradients are accumulated; the returned tensor is
/// ∂(scale·L_adv)/∂top before any reversal.
pub fn loss_adv(head: &mut AdversaryHead, top: &Tensor, domain: usize, scale: f64) -> Result<(f64, Tensor)> {
    if domain >= head.classes() {
        return Err(Error::Index { index: domain, len: head.classes() });
    }
    let (logits, cache) = head.forward(top)?;
    let (loss, mut d) = softmax_xent(&logits, domain)?;
    d.iter_mut().for_each(|x| *x *= scale);
    Ok((loss, head.backward(&cache, &d)))
}

/// Losses of one instance after accumulating the combined gradients:
/// trunk ← scale·(∇L_frame − λ∇L_adv), head ← scale·∇L_adv.
pub fn accumulate_instance(
    model: &mut ParserModel,
    head: Option<&mut AdversaryHead>,
    view: &FeatureView,
    gold: &[usize],
    domain: Option<usize>,
    lambda: f64,
    scale: f64,
) -> Result<(f64, Option<f64>)> {
    let (lf, mut dlogits, fwd) = frame_loss_grads(model, view, gold)?;
    dlogits.iter_mut().flatten().for_each(|x| *x *= scale);
    match head {
        None => {
            model.backward(&fwd.cache, &dlogits, None);
            Ok((lf, None))
        }
        Some(head) => {
            let d = domain.ok_or_else(|| Error::Config("instance has no domain label".into()))?;
            let (la, dtop) = loss_adv(head, &grl_forward(&fwd.top_hidden), d, scale)?;
            model.backward(&fwd.cache, &dlogits, Some(&grl_backward(&dtop, lambda)));
            Ok((lf, Some(la)))
        }
    }
}

/// Rescales all gradients of a group to global L2 norm at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm(params: &mut [&mut Param], max_norm: f64) -> f64 {
    let norm = libm::sqrt(params.iter().map(|p| p.grad.sq_norm()).sum());
    if norm > max_norm {
        let s = max_norm / norm;
        for p in params.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}

fn sgd(params: &mut [&mut Param], lr: f64) {
    for p in params.iter_mut() {
        let Param { value, grad, .. } = &mut **p;
        for (v, g) in value.data_mut().iter_mut().zip(grad.data()) {
            *v -= lr * g;
        }
    }
}

fn clip_and_check(params: &mut [&mut Param], clip: Option<f64>, group: &str) -> Result<()> {
    if let Some(c) = clip {
        clip_global_norm(params, c);
    }
    for p in params.iter() {
        if !p.grad.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient in {group} parameter `{}`; training aborted", p.name)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub adversarial: bool,
    /// Number of domain classes.
    pub k: usize,
    /// Global gradient-norm clip, applied separately to trunk and head.
    pub clip: Option<f64>,
    /// Overrides the schedule with a constant λ.
    pub fixed_lambda: Option<f64>,
    pub head_widths: Vec<usize>,
    pub head_filters: usize,
    /// Score the training set after each epoch.
    pub log_train_f1: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 0.05,
            batch_size: 16,
            seed: 0,
            adversarial: false,
            k: 5,
            clip: Some(5.0),
            fixed_lambda: None,
            head_widths: vec![2, 3],
            head_filters: 16,
            log_train_f1: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!("learning rate {} must be ≥ 0", self.learning_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be at least 1".into()));
        }
        if self.clip.is_some_and(|c| c.is_nan() || c <= 0.0) {
            return Err(Error::Config("clip norm must be positive".into()));
        }
        if self.fixed_lambda.is_some_and(|l| l.is_nan() || l < 0.0) {
            return Err(Error::Config("fixed lambda must be ≥ 0".into()));
        }
        Ok(())
    }

    pub fn lambda_for_epoch(&self, epoch: usize) -> Result<f64> {
        match self.fixed_lambda {
            Some(l) => Ok(l),
            None => lambda_schedule(epoch_progress(epoch, self.epochs)),
        }
    }
}

/// One mini-batch: per-group clipping, then plain SGD on both groups.
/// Returns the mean frame and adversarial losses.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    model: &mut ParserModel,
    mut head: Option<&mut AdversaryHead>,
    batch: &[(&FeatureView, &[usize], Option<usize>)],
    learning_rate: f64,
    lambda: f64,
    clip: Option<f64>,
) -> Result<(f64, Option<f64>)> {
    if batch.is_empty() {
        return Err(Error::Usage("empty batch".into()));
    }
    if lambda < 0.0 {
        return Err(Error::Domain(format!("lambda {lambda} < 0")));
    }
    model.zero_grads();
    if let Some(h) = head.as_deref_mut() {
        h.zero_grads();
    }
    let scale = 1.0 / batch.len() as f64;
    let (mut lf, mut la) = (0.0, 0.0);
    for (view, gold, domain) in batch {
        let (f, a) = accumulate_instance(model, head.as_deref_mut(), view, gold, *domain, lambda, scale)?;
        lf += f * scale;
        la += a.unwrap_or(0.0) * scale;
    }
    let mut trunk = model.params_mut();
    clip_and_check(&mut trunk, clip, "trunk")?;
    if let Some(h) = head.as_deref_mut() {
        let mut hp = h.params_mut();
        clip_and_check(&mut hp, clip, "adversary")?;
        sgd(&mut hp, learning_rate);
    }
    sgd(&mut trunk, learning_rate);
    Ok((lf, head.map(|_| la)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lambda: f64,
    pub loss_frame: f64,
    pub loss_adv: Option<f64>,
    /// Argument-level F1 on the training instances at δ = 0.
    pub train_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: ParserModel,
    pub head: Option<AdversaryHead>,
    pub log: Vec<EpochLog>,
}

/// Featurized views and gold label ids, one per instance.
pub fn prepare(
    model: &ParserModel,
    corpus: &Corpus,
    instances: &[TargetInstance],
) -> Result<Vec<(FeatureView, Vec<usize>)>> {
    instances
        .iter()
        .map(|inst| {
            let s = corpus
                .sentences
                .get(inst.sentence)
                .ok_or(Error::Index { index: inst.sentence, len: corpus.sentences.len() })?;
            Ok((featurize(s, inst.trigger, &model.vocab), model.labels.encode(&inst.gold_tags)?))
        })
        .collect()
}

/// Shuffled mini-batch SGD for `config.epochs` epochs, with λ recomputed at
/// the start of every epoch when adversarial training is on.
pub fn train(
    mut model: ParserModel,
    corpus: &Corpus,
    instances: &[TargetInstance],
    lexicon: &FrameLexicon,
    config: &TrainConfig,
) -> Result<Trained> {
    config.validate()?;
    if instances.is_empty() {
        return Err(Error::Usage("no training instances".into()));
    }
    if config.adversarial {
        for inst in instances {
            match inst.domain_label {
                None => return Err(Error::Config(format!("instance in sentence {} has no domain label", inst.sentence))),
                Some(d) if d >= config.k => return Err(Error::Index { index: d, len: config.k }),
                _ => {}
            }
        }
    }
    let data = prepare(&model, corpus, instances)?;
    let mut head = if config.adversarial {
        Some(AdversaryHead::new(model.top_dim(), &config.head_widths, config.head_filters, config.k, config.seed)?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lambda = if config.adversarial { config.lambda_for_epoch(epoch)? } else { 0.0 };
        order.shuffle(&mut rng);
        let (mut lf, mut la) = (0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&FeatureView, &[usize], Option<usize>)> = chunk
                .iter()
                .map(|&i| (&data[i].0, data[i].1.as_slice(), instances[i].domain_label))
                .collect();
            let (f, a) = train_step(&mut model, head.as_mut(), &batch, config.learning_rate, lambda, config.clip)?;
            let w = chunk.len() as f64 / data.len() as f64;
            lf += f * w;
            la += a.unwrap_or(0.0) * w;
        }
        let train_f1 = if config.log_train_f1 {
            Some(evaluate(&model, corpus, instances, lexicon, 0.0)?.counts.level(Level::Argument).f1())
        } else {
            None
        };
        log.push(EpochLog { epoch, lambda, loss_frame: lf, loss_adv: head.as_ref().map(|_| la), train_f1 });
    }
    Ok(Trained { model, head, log })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub widths: Vec<usize>,
    pub filters: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { epochs: 20, learning_rate: 0.05, batch_size: 16, widths: vec![2, 3], filters: 16, seed: 0 }
    }
}

/// Top hidden layers of a frozen model, one per instance.
pub fn top_hidden_states(model: &ParserModel, corpus: &Corpus, instances: &[TargetInstance]) -> Result<Vec<Tensor>> {
    prepare(model, corpus, instances)?
        .iter()
        .map(|(v, _)| Ok(model.forward(v)?.top_hidden))
        .collect()
}

/// Trains a fresh domain classifier on frozen `train` features and returns
/// its accuracy on `test`.
pub fn probe_accuracy(
    train: &[(Tensor, usize)],
    test: &[(Tensor, usize)],
    k: usize,
    config: &ProbeConfig,
) -> Result<f64> {
    let dim = train.first().ok_or_else(|| Error::Usage("empty probe training set".into()))?.0.cols();
    let mut head = AdversaryHead::new(dim, &config.widths, config.filters, k, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(PROBE_STREAM);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size.max(1)) {
            head.zero_grads();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                loss_adv(&mut head, &train[i].0, train[i].1, scale)?;
            }
            let mut hp = head.params_mut();
            clip_and_check(&mut hp, Some(5.0), "probe")?;
            sgd(&mut hp, config.learning_rate);
        }
    }
    if test.is_empty() {
        return Err(Error::Usage("empty probe test set".into()));
    }
    let mut correct = 0;
    for (x, y) in test {
        correct += (head.predict(x)? == *y) as usize;
    }
    Ok(correct as f64 / test.len() as f64)
}
