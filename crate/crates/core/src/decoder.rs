//! Frame selection, exact constrained BIO decoding with a null-label offset,
//! and conversion of tag sequences into frame hypotheses.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{decode_spans, FrameLexicon, Sentence, Span, Tag};
use crate::numerics::{ln, Tensor};
use crate::tagger::{featurize, LabelInventory, ParserModel};
use crate::{Error, Result};

/// Lower bound applied to every label score before taking its log.
pub const SCORE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    /// Offset added to the null-label probability, in (−1, 1).
    pub delta: f64,
}

impl DecodeConfig {
    pub fn new(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(DecodeConfig { delta })
    }
}

pub fn check_delta(delta: f64) -> Result<()> {
    if delta > -1.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("delta {delta} outside (-1, 1)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameHypothesis {
    pub trigger: usize,
    pub frame: String,
    pub elements: Vec<Span>,
    /// Sum of log scores of the decoded sequence.
    pub score: f64,
}

/// Most probable `T-<F>` at the trigger among the LU's candidate frames;
/// ties go to the first-declared frame.
pub fn select_frame(
    trigger: usize,
    posteriors: &Tensor,
    lu: &str,
    lexicon: &FrameLexicon,
    labels: &LabelInventory,
) -> Result<String> {
    let cands = lexicon.candidates(lu).ok_or_else(|| Error::UnknownLu(lu.to_string()))?;
    if trigger == 0 || trigger > posteriors.rows() {
        return Err(Error::Index { index: trigger, len: posteriors.rows() });
    }
    let row = posteriors.row(trigger - 1);
    let mut best: Option<(&str, f64)> = None;
    for f in cands {
        let idx = labels
            .index(&Tag::T(f.to_string()))
            .ok_or_else(|| Error::Validation(format!("no trigger label for frame `{f}`")))?;
        if best.is_none_or(|(_, p)| row[idx] > p) {
            best = Some((f, row[idx]));
        }
    }
    Ok(best.expect("lexicon entries are non-empty").0.to_string())
}

/// Labels allowed at each position for `frame`: the forced trigger label at
/// the trigger, and `O` plus the frame's `B-`/`I-` labels elsewhere.
pub fn allowed_labels(
    len: usize,
    trigger: usize,
    frame: &str,
    lexicon: &FrameLexicon,
    labels: &LabelInventory,
) -> Result<Vec<Vec<usize>>> {
    let def = lexicon.frame(frame).ok_or_else(|| Error::Validation(format!("unknown frame `{frame}`")))?;
    let t_idx = labels
        .index(&Tag::T(frame.to_string()))
        .ok_or_else(|| Error::Validation(format!("no trigger label for frame `{frame}`")))?;
    let mut open = vec![0usize];
    for (fe, _) in &def.elements {
        for tag in [Tag::B(fe.clone()), Tag::I(fe.clone())] {
            open.push(labels.index(&tag).ok_or_else(|| Error::Validation(format!("label {tag} missing from inventory")))?);
        }
    }
    open.sort_unstable();
    Ok((1..=len).map(|p| if p == trigger { vec![t_idx] } else { open.clone() }).collect())
}

/// Raw (pre-log) score of a label: `P(O) + δ` for the null label.
pub fn raw_score(p: f64, label: usize, delta: f64) -> f64 {
    if label == 0 {
        p + delta
    } else {
        p
    }
}

/// Log score with the floor applied.
pub fn log_score(p: f64, label: usize, delta: f64) -> f64 {
    ln(raw_score(p, label, delta).max(SCORE_FLOOR))
}

/// `prev → cur` respects BIO: `I-X` only after `B-X` or `I-X`.
pub fn transition_allowed(labels: &LabelInventory, prev: Option<usize>, cur: usize) -> bool {
    match labels.tag(cur) {
        Tag::I(x) => match prev.map(|p| labels.tag(p)) {
            Some(Tag::B(y)) | Some(Tag::I(y)) => x == y,
            _ => false,
        },
        _ => true,
    }
}

/// Highest-scoring valid label sequence under the frame's mask and the BIO
/// constraint, by dynamic programming over label transitions. Returns label
/// ids and the sequence score.
pub fn constrained_decode(
    posteriors: &Tensor,
    trigger: usize,
    frame: &str,
    lexicon: &FrameLexicon,
    labels: &LabelInventory,
    delta: f64,
) -> Result<(Vec<usize>, f64)> {
    check_delta(delta)?;
    let t_len = posteriors.rows();
    if trigger == 0 || trigger > t_len {
        return Err(Error::Index { index: trigger, len: t_len });
    }
    if posteriors.cols() != labels.len() {
        return Err(Error::Shape(format!("{} posterior columns for {} labels", posteriors.cols(), labels.len())));
    }
    let allowed = allowed_labels(t_len, trigger, frame, lexicon, labels)?;
    for (t, opts) in allowed.iter().enumerate() {
        let row = posteriors.row(t);
        if opts.iter().all(|&l| raw_score(row[l], l, delta) <= 0.0) {
            return Err(Error::Decode(format!("no label with positive score at position {}", t + 1)));
        }
    }

    let n_labels = labels.len();
    let mut best = vec![f64::NEG_INFINITY; n_labels];
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(t_len);
    for &l in &allowed[0] {
        if transition_allowed(labels, None, l) {
            best[l] = log_score(posteriors.row(0)[l], l, delta);
        }
    }
    back.push(vec![usize::MAX; n_labels]);
    for t in 1..t_len {
        let row = posteriors.row(t);
        let mut next = vec![f64::NEG_INFINITY; n_labels];
        let mut bp = vec![usize::MAX; n_labels];
        for &cur in &allowed[t] {
            let mut arg = usize::MAX;
            let mut val = f64::NEG_INFINITY;
            for &prev in &allowed[t - 1] {
                if best[prev] > val && transition_allowed(labels, Some(prev), cur) {
                    val = best[prev];
                    arg = prev;
                }
            }
            if arg != usize::MAX {
                next[cur] = val + log_score(row[cur], cur, delta);
                bp[cur] = arg;
            }
        }
        best = next;
        back.push(bp);
    }
    let (mut last, score) = allowed[t_len - 1]
        .iter()
        .map(|&l| (l, best[l]))
        .fold((usize::MAX, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    if last == usize::MAX {
        return Err(Error::Decode("no valid label sequence".into()));
    }
    let mut seq = vec![0; t_len];
    for t in (0..t_len).rev() {
        seq[t] = last;
        last = back[t][last];
    }
    Ok((seq, score))
}

/// Spans from maximal `B I*` runs.
pub fn to_hypothesis(tags: &[Tag], trigger: usize, frame: &str, score: f64) -> FrameHypothesis {
    FrameHypothesis { trigger, frame: frame.to_string(), elements: decode_spans(tags), score }
}

/// Frame selection and argument decoding from precomputed posteriors.
pub fn decode_posteriors(
    posteriors: &Tensor,
    trigger: usize,
    lu: &str,
    lexicon: &FrameLexicon,
    labels: &LabelInventory,
    delta: f64,
) -> Result<FrameHypothesis> {
    let frame = select_frame(trigger, posteriors, lu, lexicon, labels)?;
    let (ids, score) = constrained_decode(posteriors, trigger, &frame, lexicon, labels, delta)?;
    let tags: Vec<Tag> = ids.into_iter().map(|i| labels.tag(i).clone()).collect();
    Ok(to_hypothesis(&tags, trigger, &frame, score))
}

/// featurize → forward → select_frame → constrained_decode → to_hypothesis.
pub fn parse_instance(
    model: &ParserModel,
    sentence: &Sentence,
    trigger: usize,
    lu: &str,
    lexicon: &FrameLexicon,
    delta: f64,
) -> Result<FrameHypothesis> {
    let view = featurize(sentence, trigger, &model.vocab);
    let fwd = model.forward(&view)?;
    decode_posteriors(&fwd.posteriors, trigger, lu, lexicon, &model.labels, delta)
}
