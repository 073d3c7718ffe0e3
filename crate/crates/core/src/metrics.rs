//! Cumulative target / frame / argument scoring with hard-span matching,
//! null-offset sweeps and error-analysis breakdowns.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::clustering::{sentence_embedding, ClusterModel};
use crate::corpus::{Corpus, Coreness, FrameLexicon, Span, TargetInstance, WordVectors};
use crate::decoder::{check_delta, decode_posteriors, FrameHypothesis};
use crate::numerics::Tensor;
use crate::tagger::{featurize, LabelInventory, ParserModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn add(&mut self, other: &Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn is_empty(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Target,
    Frame,
    Argument,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Target, Level::Frame, Level::Argument];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Target => "target",
            Level::Frame => "frame",
            Level::Argument => "argument",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub target: Counts,
    pub frame: Counts,
    pub argument: Counts,
}

impl EvalCounts {
    pub fn level(&self, level: Level) -> &Counts {
        match level {
            Level::Target => &self.target,
            Level::Frame => &self.frame,
            Level::Argument => &self.argument,
        }
    }

    pub fn add(&mut self, other: &EvalCounts) {
        self.target.add(&other.target);
        self.frame.add(&other.frame);
        self.argument.add(&other.argument);
    }
}

/// Hard-span argument counts: a hypothesised span is correct only when the
/// frame is correct and (start, end, label) equals a gold span.
pub fn score_arguments(frame_correct: bool, gold: &[Span], hyp: &[Span]) -> Counts {
    if !frame_correct {
        return Counts { tp: 0, fp: hyp.len(), fn_: gold.len() };
    }
    let gold_set: BTreeSet<&Span> = gold.iter().collect();
    let hyp_set: BTreeSet<&Span> = hyp.iter().collect();
    let tp = hyp_set.intersection(&gold_set).count();
    Counts { tp, fp: hyp_set.len() - tp, fn_: gold_set.len() - tp }
}

/// Counts for one gold target; `None` means no hypothesis was produced.
pub fn score_instance(gold: &TargetInstance, hyp: Option<&FrameHypothesis>) -> Result<EvalCounts> {
    let gold_spans = gold.gold_spans();
    let Some(h) = hyp else {
        return Ok(EvalCounts {
            target: Counts { tp: 0, fp: 0, fn_: 1 },
            frame: Counts { tp: 0, fp: 0, fn_: 1 },
            argument: Counts { tp: 0, fp: 0, fn_: gold_spans.len() },
        });
    };
    if h.trigger != gold.trigger {
        return Err(Error::Usage(format!("hypothesis trigger {} scored against gold trigger {}", h.trigger, gold.trigger)));
    }
    let frame_ok = h.frame == gold.frame;
    Ok(EvalCounts {
        target: Counts { tp: 1, fp: 0, fn_: 0 },
        frame: if frame_ok { Counts { tp: 1, fp: 0, fn_: 0 } } else { Counts { tp: 0, fp: 1, fn_: 1 } },
        argument: score_arguments(frame_ok, &gold_spans, &h.elements),
    })
}

/// Result of parsing one instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Parsed(FrameHypothesis),
    UnknownLu,
    DecodeFailed,
}

impl Outcome {
    pub fn hypothesis(&self) -> Option<&FrameHypothesis> {
        match self {
            Outcome::Parsed(h) => Some(h),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evaluation {
    pub delta: f64,
    pub counts: EvalCounts,
    pub instances: usize,
    pub unknown_lu: usize,
    pub decode_failures: usize,
}

/// Label posteriors for each instance, in order.
pub fn instance_posteriors(model: &ParserModel, corpus: &Corpus, instance: &TargetInstance) -> Result<Tensor> {
    let sentence = corpus
        .sentences
        .get(instance.sentence)
        .ok_or(Error::Index { index: instance.sentence, len: corpus.sentences.len() })?;
    Ok(model.forward(&featurize(sentence, instance.trigger, &model.vocab))?.posteriors)
}

/// Decodes one instance; unknown LUs and infeasible decodes are reported,
/// not raised, so that they can be counted.
pub fn decode_outcome(
    posteriors: &Tensor,
    instance: &TargetInstance,
    lexicon: &FrameLexicon,
    labels: &LabelInventory,
    delta: f64,
) -> Result<Outcome> {
    match decode_posteriors(posteriors, instance.trigger, &instance.lu, lexicon, labels, delta) {
        Ok(h) => Ok(Outcome::Parsed(h)),
        Err(Error::UnknownLu(_)) => Ok(Outcome::UnknownLu),
        Err(Error::Decode(_)) => Ok(Outcome::DecodeFailed),
        Err(e) => Err(e),
    }
}

pub fn tally(instances: &[TargetInstance], outcomes: &[Outcome], delta: f64) -> Result<Evaluation> {
    if instances.len() != outcomes.len() {
        return Err(Error::Shape(format!("{} outcomes for {} instances", outcomes.len(), instances.len())));
    }
    let mut ev = Evaluation { delta, instances: instances.len(), ..Default::default() };
    for (inst, out) in instances.iter().zip(outcomes) {
        match out {
            Outcome::UnknownLu => ev.unknown_lu += 1,
            Outcome::DecodeFailed => ev.decode_failures += 1,
            Outcome::Parsed(_) => {}
        }
        ev.counts.add(&score_instance(inst, out.hypothesis())?);
    }
    Ok(ev)
}

pub fn evaluate_posteriors(
    posteriors: &[Tensor],
    instances: &[TargetInstance],
    lexicon: &FrameLexicon,
    labels: &LabelInventory,
    delta: f64,
) -> Result<Evaluation> {
    check_delta(delta)?;
    if posteriors.len() != instances.len() {
        return Err(Error::Shape(format!("{} posteriors for {} instances", posteriors.len(), instances.len())));
    }
    let outcomes = posteriors
        .iter()
        .zip(instances)
        .map(|(p, inst)| decode_outcome(p, inst, lexicon, labels, delta))
        .collect::<Result<Vec<_>>>()?;
    tally(instances, &outcomes, delta)
}

pub fn evaluate(
    model: &ParserModel,
    corpus: &Corpus,
    instances: &[TargetInstance],
    lexicon: &FrameLexicon,
    delta: f64,
) -> Result<Evaluation> {
    let posts = instances
        .iter()
        .map(|i| instance_posteriors(model, corpus, i))
        .collect::<Result<Vec<_>>>()?;
    evaluate_posteriors(&posts, instances, lexicon, &model.labels, delta)
}

/// Evaluations along an ascending offset grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PRCurve {
    pub points: Vec<Evaluation>,
}

impl PRCurve {
    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|e| e.delta).collect()
    }

    /// `(δ, precision, recall, f1)` per grid point.
    pub fn level(&self, level: Level) -> Vec<(f64, f64, f64, f64)> {
        self.points
            .iter()
            .map(|e| {
                let c = e.counts.level(level);
                (e.delta, c.precision(), c.recall(), c.f1())
            })
            .collect()
    }

    /// `(δ*, Fmax)`; the lowest δ wins ties.
    pub fn fmax(&self, level: Level) -> (f64, f64) {
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for e in &self.points {
            let f = e.counts.level(level).f1();
            if f > best.1 {
                best = (e.delta, f);
            }
        }
        best
    }
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Usage("empty delta grid".into()));
    }
    for &d in grid {
        check_delta(d)?;
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("delta grid must be strictly ascending".into()));
    }
    Ok(())
}

/// `lo, lo+step, …` up to `hi` inclusive (rounded to avoid drift).
pub fn delta_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if step <= 0.0 || hi < lo {
        return Err(Error::Usage(format!("bad grid {lo}..{hi} step {step}")));
    }
    let n = libm::round((hi - lo) / step) as usize;
    let grid: Vec<f64> = (0..=n).map(|i| libm::round((lo + i as f64 * step) * 1e9) / 1e9).collect();
    check_grid(&grid)?;
    Ok(grid)
}

pub fn sweep_posteriors(
    posteriors: &[Tensor],
    instances: &[TargetInstance],
    lexicon: &FrameLexicon,
    labels: &LabelInventory,
    grid: &[f64],
) -> Result<PRCurve> {
    check_grid(grid)?;
    let points = grid
        .iter()
        .map(|&d| evaluate_posteriors(posteriors, instances, lexicon, labels, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(PRCurve { points })
}

pub fn sweep(
    model: &ParserModel,
    corpus: &Corpus,
    instances: &[TargetInstance],
    lexicon: &FrameLexicon,
    grid: &[f64],
) -> Result<PRCurve> {
    check_grid(grid)?;
    let posts = instances
        .iter()
        .map(|i| instance_posteriors(model, corpus, i))
        .collect::<Result<Vec<_>>>()?;
    sweep_posteriors(&posts, instances, lexicon, &model.labels, grid)
}

/// POS prefixes deciding whether a trigger is verbal or nominal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosClasses {
    pub verb_prefixes: Vec<String>,
    pub noun_prefixes: Vec<String>,
}

impl Default for PosClasses {
    fn default() -> Self {
        PosClasses {
            verb_prefixes: vec!["VERB".into(), "V".into()],
            noun_prefixes: vec!["NOUN".into(), "N".into(), "PROPN".into()],
        }
    }
}

impl PosClasses {
    pub fn classify(&self, pos: &str) -> &'static str {
        if self.verb_prefixes.iter().any(|p| pos.starts_with(p.as_str())) {
            "verbal"
        } else if self.noun_prefixes.iter().any(|p| pos.starts_with(p.as_str())) {
            "nominal"
        } else {
            "other"
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorRow {
    pub factor: String,
    pub instances: usize,
    pub counts: Counts,
}

impl FactorRow {
    /// A row no instance or span fell into.
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

pub const BREAKDOWN_FACTORS: [&str; 9] = [
    "overall",
    "core FE",
    "non-core FE",
    "verbal trigger",
    "nominal trigger",
    "other trigger",
    "root trigger",
    "non-root trigger",
    "unscored",
];

fn coreness_of(lexicon: &FrameLexicon, frame: &str, fe: &str) -> Coreness {
    lexicon.frame(frame).and_then(|f| f.coreness(fe)).unwrap_or(Coreness::NonCore)
}

/// Argument-level counts split by FE coreness, trigger part of speech and
/// whether the trigger is the syntactic root. The `unscored` row counts
/// instances with no hypothesis.
pub fn breakdown(
    pairs: &[(&TargetInstance, Option<&FrameHypothesis>)],
    corpus: &Corpus,
    lexicon: &FrameLexicon,
    classes: &PosClasses,
) -> Result<Vec<FactorRow>> {
    let mut rows: BTreeMap<&str, FactorRow> = BREAKDOWN_FACTORS
        .iter()
        .map(|f| (*f, FactorRow { factor: f.to_string(), instances: 0, counts: Counts::default() }))
        .collect();
    let mut bump = |name: &str, c: &Counts, inst: bool| {
        let row = rows.get_mut(name).expect("known factor");
        row.counts.add(c);
        row.instances += inst as usize;
    };
    for (gold, hyp) in pairs {
        let sentence = corpus
            .sentences
            .get(gold.sentence)
            .ok_or(Error::Index { index: gold.sentence, len: corpus.sentences.len() })?;
        let tok = sentence.token(gold.trigger).ok_or(Error::Index { index: gold.trigger, len: sentence.len() })?;
        let counts = score_instance(gold, *hyp)?;
        bump("overall", &counts.argument, true);
        if hyp.is_none() {
            bump("unscored", &Counts::default(), true);
        }
        let pos_row = match classes.classify(&tok.pos) {
            "verbal" => "verbal trigger",
            "nominal" => "nominal trigger",
            _ => "other trigger",
        };
        bump(pos_row, &counts.argument, true);
        bump(if tok.head == 0 { "root trigger" } else { "non-root trigger" }, &counts.argument, true);

        let gold_spans = gold.gold_spans();
        let frame_ok = hyp.is_some_and(|h| h.frame == gold.frame);
        for core in [Coreness::Core, Coreness::NonCore] {
            let g: Vec<Span> = gold_spans.iter().filter(|s| coreness_of(lexicon, &gold.frame, &s.label) == core).cloned().collect();
            let h: Vec<Span> = hyp
                .map(|h| h.elements.iter().filter(|s| coreness_of(lexicon, &h.frame, &s.label) == core).cloned().collect())
                .unwrap_or_default();
            let c = score_arguments(frame_ok, &g, &h);
            bump(if core == Coreness::Core { "core FE" } else { "non-core FE" }, &c, false);
        }
    }
    Ok(BREAKDOWN_FACTORS.iter().map(|f| rows.remove(f).expect("row")).collect())
}

/// Frame-identification counts per lexical unit.
pub fn frame_scores_by_lu(instances: &[TargetInstance], outcomes: &[Outcome]) -> Result<BTreeMap<String, Counts>> {
    let mut out: BTreeMap<String, Counts> = BTreeMap::new();
    for (inst, o) in instances.iter().zip(outcomes) {
        out.entry(inst.lu.clone()).or_default().add(&score_instance(inst, o.hypothesis())?.frame);
    }
    Ok(out)
}

/// Total-variation distance between two distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("histograms of length {} and {}", p.len(), q.len())));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Normalised cluster histogram of the distinct sentences containing `lu`.
pub fn lu_cluster_histogram(
    lu: &str,
    corpus: &Corpus,
    instances: &[TargetInstance],
    model: &ClusterModel,
    vectors: &WordVectors,
) -> Result<Vec<f64>> {
    let sentences: BTreeSet<usize> = instances.iter().filter(|i| i.lu == lu).map(|i| i.sentence).collect();
    if sentences.is_empty() {
        return Err(Error::Domain(format!("lexical unit `{lu}` does not occur")));
    }
    let mut hist = vec![0.0; model.k()];
    for &s in &sentences {
        let sent = corpus.sentences.get(s).ok_or(Error::Index { index: s, len: corpus.sentences.len() })?;
        hist[model.assign(&sentence_embedding(sent, vectors)?)?] += 1.0;
    }
    let n = sentences.len() as f64;
    hist.iter_mut().for_each(|h| *h /= n);
    Ok(hist)
}

/// How differently the sentences using `lu` spread over the clusters in two
/// instance sets, as a total-variation distance in [0, 1].
pub fn lu_cluster_divergence(
    lu: &str,
    a: (&Corpus, &[TargetInstance]),
    b: (&Corpus, &[TargetInstance]),
    model: &ClusterModel,
    vectors: &WordVectors,
) -> Result<f64> {
    let ha = lu_cluster_histogram(lu, a.0, a.1, model, vectors)?;
    let hb = lu_cluster_histogram(lu, b.0, b.1, model, vectors)?;
    total_variation(&ha, &hb)
}
