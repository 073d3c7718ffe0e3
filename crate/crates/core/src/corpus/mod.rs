//! Annotated sentences, the frame lexicon, and per-trigger training
//! instances.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

mod synth;
mod vectors;

pub use synth::{generate_synthetic, generate_synthetic_set, SynthConfig, SyntheticSet};
pub use vectors::WordVectors;

/// One analysed token. `index` is 1-based; `head` is 0 for the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub pos: String,
    pub morph: Vec<(String, String)>,
    pub head: usize,
    pub deprel: String,
}

/// A frame-element span, 1-based and end-inclusive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Span {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Span { start, end, label: label.into() }
    }

    fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetAnnotation {
    pub trigger: usize,
    pub lu: String,
    pub frame: String,
    pub elements: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    /// Gold domain name from `#domain` metadata.
    pub domain: Option<String>,
    pub tokens: Vec<Token>,
    pub annotations: Vec<TargetAnnotation>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at a 1-based position.
    pub fn token(&self, position: usize) -> Option<&Token> {
        position.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// Structural checks that need no lexicon.
    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::Validation("sentence has no tokens".into()));
        }
        let n = self.tokens.len();
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(Error::Validation(format!(
                    "token index {} at position {}; indices must run 1..{n}",
                    t.index,
                    i + 1
                )));
            }
            if t.head > n {
                return Err(Error::Validation(format!("token {} has head {} beyond {n}", t.index, t.head)));
            }
        }
        for a in &self.annotations {
            if a.trigger == 0 || a.trigger > n {
                return Err(Error::Validation(format!("trigger {} outside 1..{n}", a.trigger)));
            }
            for (k, s) in a.elements.iter().enumerate() {
                if s.start == 0 || s.start > s.end || s.end > n {
                    return Err(Error::Validation(format!(
                        "span ({}, {}, {}) outside 1..{n}",
                        s.start, s.end, s.label
                    )));
                }
                if s.start <= a.trigger && a.trigger <= s.end {
                    return Err(Error::Validation(format!(
                        "span ({}, {}, {}) covers the trigger {}",
                        s.start, s.end, s.label, a.trigger
                    )));
                }
                if a.elements[..k].iter().any(|o| o.overlaps(s)) {
                    return Err(Error::Validation(format!(
                        "span ({}, {}, {}) overlaps another element",
                        s.start, s.end, s.label
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn annotation_count(&self) -> usize {
        self.sentences.iter().map(|s| s.annotations.len()).sum()
    }

    /// Checks every sentence, and annotation coherence when a lexicon is given.
    pub fn validate(&self, lexicon: Option<&FrameLexicon>) -> Result<()> {
        for (i, s) in self.sentences.iter().enumerate() {
            s.validate().map_err(|e| Error::Validation(format!("sentence {i}: {e}")))?;
            if let Some(lex) = lexicon {
                for a in &s.annotations {
                    lex.check_annotation(a).map_err(|e| Error::Validation(format!("sentence {i}: {e}")))?;
                }
            }
        }
        Ok(())
    }

    /// Sorted distinct gold domain names; errors if any sentence lacks one.
    pub fn gold_domains(&self) -> Result<Vec<String>> {
        let mut names = Vec::new();
        for (i, s) in self.sentences.iter().enumerate() {
            match &s.domain {
                Some(d) => names.push(d.clone()),
                None => return Err(Error::Config(format!("sentence {i} has no #domain metadata"))),
            }
        }
        names.sort();
        names.dedup();
        Ok(names)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coreness {
    Core,
    NonCore,
}

impl Coreness {
    pub fn as_str(self) -> &'static str {
        match self {
            Coreness::Core => "core",
            Coreness::NonCore => "non-core",
        }
    }
}

impl core::str::FromStr for Coreness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "core" => Ok(Coreness::Core),
            "non-core" => Ok(Coreness::NonCore),
            other => Err(Error::Validation(format!("unknown coreness `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameDef {
    pub name: String,
    pub elements: Vec<(String, Coreness)>,
}

impl FrameDef {
    pub fn has_element(&self, label: &str) -> bool {
        self.elements.iter().any(|(l, _)| l == label)
    }

    pub fn coreness(&self, label: &str) -> Option<Coreness> {
        self.elements.iter().find(|(l, _)| l == label).map(|(_, c)| *c)
    }
}

/// Frames with their element inventories and the lexical units that evoke
/// them. Frames keep declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameLexicon {
    frames: Vec<FrameDef>,
    frame_index: BTreeMap<String, usize>,
    lu_to_frames: BTreeMap<String, Vec<String>>,
    lu_order: Vec<(String, String)>,
}

impl FrameLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_frame(&mut self, name: &str) -> Result<()> {
        if self.frame_index.contains_key(name) {
            return Err(Error::Validation(format!("frame `{name}` declared twice")));
        }
        self.frame_index.insert(name.to_string(), self.frames.len());
        self.frames.push(FrameDef { name: name.to_string(), elements: Vec::new() });
        Ok(())
    }

    pub fn add_element(&mut self, frame: &str, label: &str, coreness: Coreness) -> Result<()> {
        let idx = *self
            .frame_index
            .get(frame)
            .ok_or_else(|| Error::Validation(format!("frame element `{label}` for undeclared frame `{frame}`")))?;
        let def = &mut self.frames[idx];
        if def.has_element(label) {
            return Err(Error::Validation(format!("duplicate frame element `{label}` in `{frame}`")));
        }
        def.elements.push((label.to_string(), coreness));
        Ok(())
    }

    pub fn add_lu(&mut self, lemma: &str, frame: &str) -> Result<()> {
        if !self.frame_index.contains_key(frame) {
            return Err(Error::Validation(format!("lexical unit `{lemma}` references undeclared frame `{frame}`")));
        }
        let entry = self.lu_to_frames.entry(lemma.to_string()).or_default();
        if !entry.iter().any(|f| f == frame) {
            entry.push(frame.to_string());
            self.lu_order.push((lemma.to_string(), frame.to_string()));
        }
        Ok(())
    }

    pub fn frames(&self) -> &[FrameDef] {
        &self.frames
    }

    pub fn frame(&self, name: &str) -> Option<&FrameDef> {
        self.frame_index.get(name).map(|&i| &self.frames[i])
    }

    pub fn frame_position(&self, name: &str) -> Option<usize> {
        self.frame_index.get(name).copied()
    }

    /// Candidate frames of a lemma, in frame declaration order.
    pub fn candidates(&self, lu: &str) -> Option<Vec<&str>> {
        let list = self.lu_to_frames.get(lu)?;
        let mut out: Vec<&str> = list.iter().map(String::as_str).collect();
        out.sort_by_key(|f| self.frame_index[*f]);
        Some(out)
    }

    /// `(lemma, frame)` pairs in the order they were added.
    pub fn lu_entries(&self) -> &[(String, String)] {
        &self.lu_order
    }

    pub fn lu_count(&self) -> usize {
        self.lu_to_frames.len()
    }

    /// Distinct element labels across all frames, first appearance first.
    pub fn element_labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for f in &self.frames {
            for (l, _) in &f.elements {
                if !out.contains(&l.as_str()) {
                    out.push(l);
                }
            }
        }
        out
    }

    /// Every frame must carry an element inventory.
    pub fn validate(&self) -> Result<()> {
        for (lu, frames) in &self.lu_to_frames {
            for f in frames {
                let def = self.frame(f).ok_or_else(|| Error::Validation(format!("`{lu}` → unknown frame `{f}`")))?;
                if def.elements.is_empty() {
                    return Err(Error::Validation(format!("frame `{f}` has no frame elements")));
                }
            }
        }
        Ok(())
    }

    pub fn check_annotation(&self, a: &TargetAnnotation) -> Result<()> {
        let cands = self.candidates(&a.lu).ok_or_else(|| Error::UnknownLu(a.lu.clone()))?;
        if !cands.contains(&a.frame.as_str()) {
            return Err(Error::Validation(format!("frame `{}` is not a candidate of `{}`", a.frame, a.lu)));
        }
        let def = self.frame(&a.frame).expect("candidate frames are declared");
        for s in &a.elements {
            if !def.has_element(&s.label) {
                return Err(Error::Validation(format!("`{}` is not an element of `{}`", s.label, a.frame)));
            }
        }
        Ok(())
    }
}

/// One BIO label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    O,
    /// Trigger of the named frame.
    T(String),
    B(String),
    I(String),
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::T(x) => write!(f, "T-{x}"),
            Tag::B(x) => write!(f, "B-{x}"),
            Tag::I(x) => write!(f, "I-{x}"),
        }
    }
}

impl core::str::FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Tag::O);
        }
        match s.split_once('-') {
            Some(("T", x)) if !x.is_empty() => Ok(Tag::T(x.to_string())),
            Some(("B", x)) if !x.is_empty() => Ok(Tag::B(x.to_string())),
            Some(("I", x)) if !x.is_empty() => Ok(Tag::I(x.to_string())),
            _ => Err(Error::Validation(format!("bad tag `{s}`"))),
        }
    }
}

pub type TagSequence = Vec<Tag>;

/// `I-X` may only follow `B-X` or `I-X`.
pub fn is_bio_valid(tags: &[Tag]) -> bool {
    let mut prev: Option<&Tag> = None;
    for t in tags {
        if let Tag::I(x) = t {
            match prev {
                Some(Tag::B(p)) | Some(Tag::I(p)) if p == x => {}
                _ => return false,
            }
        }
        prev = Some(t);
    }
    true
}

/// Tags for one target: `T-<frame>` at the trigger, `B-/I-` over spans.
pub fn encode_bio(len: usize, trigger: usize, frame: &str, spans: &[Span]) -> TagSequence {
    let mut tags = vec![Tag::O; len];
    for s in spans {
        tags[s.start - 1] = Tag::B(s.label.clone());
        for t in &mut tags[s.start..s.end] {
            *t = Tag::I(s.label.clone());
        }
    }
    tags[trigger - 1] = Tag::T(frame.to_string());
    tags
}

/// Maximal `B I*` runs as 1-based spans. A stray `I-X` opens a span.
pub fn decode_spans(tags: &[Tag]) -> Vec<Span> {
    let mut out: Vec<Span> = Vec::new();
    let mut open: Option<Span> = None;
    for (i, t) in tags.iter().enumerate() {
        let pos = i + 1;
        match t {
            Tag::I(x) if open.as_ref().is_some_and(|s| &s.label == x) => {
                open.as_mut().unwrap().end = pos;
            }
            Tag::B(x) | Tag::I(x) => {
                out.extend(open.take());
                open = Some(Span::new(pos, pos, x.clone()));
            }
            _ => out.extend(open.take()),
        }
    }
    out.extend(open);
    out
}

/// One parse sample: a sentence seen from one trigger.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetInstance {
    pub sentence: usize,
    pub trigger: usize,
    pub lu: String,
    pub frame: String,
    pub gold_tags: TagSequence,
    pub domain_label: Option<usize>,
}

impl TargetInstance {
    pub fn gold_spans(&self) -> Vec<Span> {
        decode_spans(&self.gold_tags)
    }
}

/// One instance per annotation, in corpus order.
pub fn extract_instances(corpus: &Corpus, lexicon: &FrameLexicon) -> Result<Vec<TargetInstance>> {
    corpus.validate(Some(lexicon))?;
    let mut out = Vec::with_capacity(corpus.annotation_count());
    for (si, s) in corpus.sentences.iter().enumerate() {
        for a in &s.annotations {
            let mut spans = a.elements.clone();
            spans.sort();
            out.push(TargetInstance {
                sentence: si,
                trigger: a.trigger,
                lu: a.lu.clone(),
                frame: a.frame.clone(),
                gold_tags: encode_bio(s.len(), a.trigger, &a.frame, &spans),
                domain_label: None,
            });
        }
    }
    Ok(out)
}

/// Fills `domain_label` from gold `#domain` metadata; labels index the
/// sorted distinct domain names.
pub fn label_gold_domains(corpus: &Corpus, instances: &mut [TargetInstance]) -> Result<Vec<String>> {
    let names = corpus.gold_domains()?;
    for inst in instances.iter_mut() {
        let d = corpus.sentences[inst.sentence].domain.as_ref().expect("checked by gold_domains");
        inst.domain_label = Some(names.binary_search(d).expect("name collected above"));
    }
    Ok(names)
}
