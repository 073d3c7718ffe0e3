//! Seeded generator for small multi-domain frame-annotated corpora.
//!
//! Domains share one frame inventory but differ in their content-noun
//! vocabularies, frame and lexical-unit priors, and syntactic style (rate
//! of nominal triggers, fronted adjuncts, embedded and coordinated
//! clauses). Companion word vectors mimic distributional embeddings: a
//! semantic-class component plus a domain-topic component plus noise.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, Coreness, FrameLexicon, Sentence, Span, TargetAnnotation, Token, WordVectors};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub domains: usize,
    pub sentences_per_domain: usize,
    /// Number of frames taken from the built-in inventory (at most 10).
    pub frames: usize,
    /// Content nouns per semantic class and domain.
    pub nouns_per_class: usize,
    /// Fraction of each domain's nouns drawn from a pool shared by all domains.
    pub shared_noun_fraction: f64,
    /// Fraction of frame pairs that share an ambiguous verbal lexical unit.
    pub polysemous_fraction: f64,
    /// Prior weight of a domain's favoured frames (others weigh 1).
    pub frame_skew: f64,
    pub vector_dim: usize,
    /// Scale of the domain-topic component in the word vectors.
    pub topic_weight: f64,
    /// Share of each domain's topic lying on a common axis, on which domains
    /// sit at evenly spaced positions (the last domain at the far end); the
    /// rest is a domain-specific direction.
    pub topic_axis: f64,
    pub noise_weight: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            domains: 2,
            sentences_per_domain: 100,
            frames: 8,
            nouns_per_class: 12,
            shared_noun_fraction: 0.25,
            polysemous_fraction: 0.5,
            frame_skew: 4.0,
            vector_dim: 32,
            topic_weight: 0.8,
            topic_axis: 0.0,
            noise_weight: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    pub corpus: Corpus,
    pub lexicon: FrameLexicon,
    pub vectors: WordVectors,
    /// Domain names in generation order (`D1`, `D2`, ...).
    pub domain_names: Vec<String>,
}

/// Corpus and lexicon for `(config, seed)`.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<(Corpus, FrameLexicon)> {
    let set = generate_synthetic_set(config, seed)?;
    Ok((set.corpus, set.lexicon))
}

/// Corpus, lexicon and word vectors; a pure function of `(config, seed)`.
pub fn generate_synthetic_set(config: &SynthConfig, seed: u64) -> Result<SyntheticSet> {
    if config.domains == 0 {
        return Err(Error::Config("at least one domain is required".into()));
    }
    if config.frames == 0 || config.frames > FRAMES.len() {
        return Err(Error::Config(format!("frames must be in 1..={}", FRAMES.len())));
    }
    if config.nouns_per_class == 0 || config.vector_dim == 0 {
        return Err(Error::Config("nouns_per_class and vector_dim must be positive".into()));
    }
    for (name, v) in [
        ("shared_noun_fraction", config.shared_noun_fraction),
        ("polysemous_fraction", config.polysemous_fraction),
        ("topic_axis", config.topic_axis),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!("{name} must lie in [0, 1]")));
        }
    }
    if config.frame_skew.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) {
        return Err(Error::Config("frame_skew must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = World::build(config, &mut rng);
    let lexicon = world.lexicon()?;
    let mut corpus = Corpus::default();
    for d in 0..config.domains {
        for _ in 0..config.sentences_per_domain {
            corpus.sentences.push(world.sentence(d, &mut rng));
        }
    }
    let vectors = world.vectors(config, &mut rng)?;
    Ok(SyntheticSet { corpus, lexicon, vectors, domain_names: (1..=config.domains).map(|d| format!("D{d}")).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Class {
    Person,
    Group,
    Place,
    Time,
    Artifact,
    Abstract,
}

const CLASSES: [Class; 6] = [Class::Person, Class::Group, Class::Place, Class::Time, Class::Artifact, Class::Abstract];

struct FrameTemplate {
    name: &'static str,
    agent: (&'static str, Class),
    theme: (&'static str, Class),
}

const FRAMES: [FrameTemplate; 10] = [
    FrameTemplate { name: "Attack", agent: ("Assailant", Class::Group), theme: ("Victim", Class::Person) },
    FrameTemplate { name: "Leadership", agent: ("Leader", Class::Person), theme: ("Governed", Class::Place) },
    FrameTemplate { name: "Creating", agent: ("Creator", Class::Group), theme: ("Created_entity", Class::Artifact) },
    FrameTemplate { name: "Scrutiny", agent: ("Cognizer", Class::Person), theme: ("Ground", Class::Place) },
    FrameTemplate { name: "Losing", agent: ("Owner", Class::Group), theme: ("Possession", Class::Artifact) },
    FrameTemplate { name: "Statement", agent: ("Speaker", Class::Person), theme: ("Message", Class::Abstract) },
    FrameTemplate { name: "Arriving", agent: ("Theme", Class::Group), theme: ("Goal", Class::Place) },
    FrameTemplate { name: "Death", agent: ("Protagonist", Class::Person), theme: ("Cause", Class::Abstract) },
    FrameTemplate { name: "Giving", agent: ("Donor", Class::Person), theme: ("Recipient", Class::Group) },
    FrameTemplate { name: "Finding", agent: ("Finder", Class::Group), theme: ("Found_entity", Class::Artifact) },
];

const DETERMINERS: [&str; 5] = ["le", "la", "les", "un", "une"];
const TIME_PREPS: [&str; 3] = ["en", "pendant", "vers"];
const PLACE_PREPS: [&str; 3] = ["à", "dans", "près"];
const LIGHT_VERBS: [(&str, &str); 3] = [("commença", "commencer"), ("marqua", "marquer"), ("eut", "avoir")];
const REPORT_VERBS: [(&str, &str); 3] = [("dit", "dire"), ("affirma", "affirmer"), ("raconta", "raconter")];
const TENSES: [(&str, &str); 3] = [("e", "Pres"), ("a", "Past"), ("ait", "Imp")];

#[derive(Debug, Clone)]
struct Noun {
    form: String,
    proper: bool,
    /// Home domain; `None` for the shared pool.
    home: Option<usize>,
    class: Class,
}

#[derive(Debug, Clone)]
struct Lu {
    lemma: String,
    verbal: bool,
    frames: Vec<usize>,
}

struct Style {
    nominal: f64,
    fronting: f64,
    embedded: f64,
    coordination: f64,
    adjective: f64,
}

struct World {
    domains: usize,
    frames: usize,
    frame_skew: f64,
    /// nouns[domain][class]
    nouns: Vec<Vec<Vec<Noun>>>,
    adjectives: Vec<Vec<String>>,
    lus: Vec<Lu>,
    /// LU indices per frame.
    frame_lus: Vec<Vec<usize>>,
    /// Frames whose theme must be present to disambiguate a shared LU.
    all_words: BTreeSet<String>,
}

fn pseudo_word<R: Rng>(rng: &mut R, syllables: usize, taken: &mut BTreeSet<String>) -> String {
    const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "ch", "gr", "tr"];
    const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ou"];
    loop {
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS.choose(rng).unwrap());
            w.push_str(VOWELS.choose(rng).unwrap());
        }
        if taken.insert(w.clone()) {
            return w;
        }
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

impl World {
    fn build<R: Rng>(config: &SynthConfig, rng: &mut R) -> World {
        let mut taken: BTreeSet<String> = BTreeSet::new();
        for w in DETERMINERS.iter().chain(&TIME_PREPS).chain(&PLACE_PREPS).chain(&["de", "par", "que", "et", ",", "."]) {
            taken.insert(w.to_string());
        }
        let n = config.nouns_per_class;
        let shared_n = ((config.shared_noun_fraction * n as f64) + 0.5) as usize;
        let make_noun = |rng: &mut R, taken: &mut BTreeSet<String>, class: Class, home: Option<usize>| -> Noun {
            if class == Class::Time && rng.gen_bool(0.5) {
                loop {
                    let year = format!("{}", rng.gen_range(1000..2000));
                    if taken.insert(year.clone()) {
                        return Noun { form: year, proper: true, home, class };
                    }
                }
            }
            let proper = matches!(class, Class::Place) || (class == Class::Person && rng.gen_bool(0.5));
            let base = pseudo_word(rng, 2, taken);
            let form = if proper { capitalize(&base) } else { base };
            Noun { form, proper, home, class }
        };
        let shared: Vec<Vec<Noun>> =
            CLASSES.iter().map(|&c| (0..n).map(|_| make_noun(rng, &mut taken, c, None)).collect()).collect();
        let mut nouns = Vec::with_capacity(config.domains);
        let mut adjectives = Vec::with_capacity(config.domains);
        for d in 0..config.domains {
            let mut per_class = Vec::with_capacity(CLASSES.len());
            for (ci, &c) in CLASSES.iter().enumerate() {
                let mut list: Vec<Noun> = shared[ci].choose_multiple(rng, shared_n).cloned().collect();
                while list.len() < n {
                    list.push(make_noun(rng, &mut taken, c, Some(d)));
                }
                per_class.push(list);
            }
            nouns.push(per_class);
            adjectives.push((0..6).map(|_| format!("{}al", pseudo_word(rng, 2, &mut taken))).collect());
        }

        let mut lus = Vec::new();
        let mut frame_lus = vec![Vec::new(); config.frames];
        for (f, lus_of_frame) in frame_lus.iter_mut().enumerate() {
            for k in 0..3 {
                let verbal = k < 2;
                let stem = pseudo_word(rng, 2, &mut taken);
                let lemma = if verbal { format!("{stem}er") } else { format!("{stem}ment") };
                lus_of_frame.push(lus.len());
                lus.push(Lu { lemma, verbal, frames: vec![f] });
            }
        }
        let pairs = config.frames / 2;
        let poly = ((config.polysemous_fraction * pairs as f64) + 0.5) as usize;
        for k in 0..poly.min(pairs) {
            let shared_lu = frame_lus[2 * k][0];
            lus[shared_lu].frames.push(2 * k + 1);
            frame_lus[2 * k + 1].push(shared_lu);
        }
        World {
            domains: config.domains,
            frames: config.frames,
            frame_skew: config.frame_skew,
            nouns,
            adjectives,
            lus,
            frame_lus,
            all_words: taken,
        }
    }

    fn lexicon(&self) -> Result<FrameLexicon> {
        let mut lex = FrameLexicon::new();
        for tmpl in &FRAMES[..self.frames] {
            lex.add_frame(tmpl.name)?;
            lex.add_element(tmpl.name, tmpl.agent.0, Coreness::Core)?;
            lex.add_element(tmpl.name, tmpl.theme.0, Coreness::Core)?;
            lex.add_element(tmpl.name, "Time", Coreness::NonCore)?;
            lex.add_element(tmpl.name, "Place", Coreness::NonCore)?;
        }
        for lu in &self.lus {
            for &f in &lu.frames {
                lex.add_lu(&lu.lemma, FRAMES[f].name)?;
            }
        }
        Ok(lex)
    }

    fn style(&self, d: usize) -> Style {
        let s = if self.domains > 1 { d as f64 / (self.domains - 1) as f64 } else { 0.0 };
        Style {
            nominal: 0.15 + 0.3 * s,
            fronting: 0.1 + 0.3 * s,
            embedded: 0.1 + 0.2 * s,
            coordination: 0.15,
            adjective: 0.35 - 0.15 * s,
        }
    }

    fn pick_frame<R: Rng>(&self, d: usize, rng: &mut R) -> usize {
        let weights: Vec<f64> =
            (0..self.frames).map(|f| if f % self.domains == d % self.domains { self.frame_skew } else { 1.0 }).collect();
        weighted(&weights, rng)
    }

    fn pick_lu<R: Rng>(&self, frame: usize, d: usize, rng: &mut R) -> usize {
        let cands = &self.frame_lus[frame];
        let favoured = (frame + d) % cands.len();
        let weights: Vec<f64> = (0..cands.len()).map(|i| if i == favoured { 3.0 } else { 1.0 }).collect();
        cands[weighted(&weights, rng)]
    }

    fn sentence<R: Rng>(&self, d: usize, rng: &mut R) -> Sentence {
        let style = self.style(d);
        let mut b = Builder::default();
        let mut annotations = Vec::new();

        let fronted = rng.gen_bool(style.fronting);
        let mut front_pp = None;
        if fronted {
            let (label, class, preps) =
                if rng.gen_bool(0.5) { ("Time", Class::Time, &TIME_PREPS) } else { ("Place", Class::Place, &PLACE_PREPS) };
            let (s, e, head) = self.pp(&mut b, preps.choose(rng).unwrap(), class, d, &style, rng);
            let comma = b.push(",", ",", "PUNCT", vec![], "punct");
            front_pp = Some((s, e, head, comma, label));
        }

        let embedded = rng.gen_bool(style.embedded);
        let mut report_verb = None;
        if embedded {
            let (_, _, subj) = self.np(&mut b, Class::Person, d, &style, rng);
            let (form, lemma) = REPORT_VERBS.choose(rng).unwrap();
            let v = b.push(form, lemma, "VERB", vec![("Tense", "Past")], "root");
            b.set_head(subj, v, "nsubj");
            let que = b.push("que", "que", "SCONJ", vec![], "mark");
            report_verb = Some((v, que));
        }

        let frame = self.pick_frame(d, rng);
        let lu = self.pick_lu(frame, d, rng);
        let (trigger, clause_head, mut elements) = self.clause(&mut b, frame, lu, d, &style, rng);
        match report_verb {
            Some((v, que)) => {
                b.set_head(clause_head, v, "ccomp");
                b.set_head(que, clause_head, "mark");
            }
            None => b.set_root(clause_head),
        }
        if let Some((s, e, head, comma, label)) = front_pp {
            b.set_head(head, clause_head, "obl");
            b.set_head(comma, clause_head, "punct");
            elements.push(Span::new(s + 1, e + 1, label));
        }
        annotations.push((trigger, lu, frame, elements));

        if rng.gen_bool(style.coordination) {
            let et = b.push("et", "et", "CCONJ", vec![], "cc");
            let frame2 = self.pick_frame(d, rng);
            let lu2 = self.pick_verbal_lu(frame2, d, rng);
            let (trigger2, elements2) = self.verbal_clause(&mut b, frame2, lu2, d, &style, rng);
            b.set_head(trigger2, clause_head, "conj");
            b.set_head(et, trigger2, "cc");
            annotations.push((trigger2, lu2, frame2, elements2));
        }
        let dot = b.push(".", ".", "PUNCT", vec![], "punct");
        b.set_head(dot, report_verb.map_or(clause_head, |(v, _)| v), "punct");

        let tokens = b.finish();
        let annotations = annotations
            .into_iter()
            .map(|(t, lu, f, mut el)| {
                el.sort();
                TargetAnnotation { trigger: t + 1, lu: self.lus[lu].lemma.clone(), frame: FRAMES[f].name.to_string(), elements: el }
            })
            .collect();
        Sentence { domain: Some(format!("D{}", d + 1)), tokens, annotations }
    }

    fn pick_verbal_lu<R: Rng>(&self, frame: usize, d: usize, rng: &mut R) -> usize {
        loop {
            let lu = self.pick_lu(frame, d, rng);
            if self.lus[lu].verbal {
                return lu;
            }
        }
    }

    /// Returns the trigger position, the clause head and 1-based element spans.
    fn clause<R: Rng>(&self, b: &mut Builder, frame: usize, lu: usize, d: usize, style: &Style, rng: &mut R) -> (usize, usize, Vec<Span>) {
        if self.lus[lu].verbal {
            // Verbal LUs may still surface nominally via their frame's noun.
            if rng.gen_bool(style.nominal * 0.5) && self.lus[lu].frames.len() == 1 {
                let noun = self.frame_lus[frame][2];
                return self.nominal_clause(b, frame, noun, d, style, rng);
            }
            let (v, el) = self.verbal_clause(b, frame, lu, d, style, rng);
            (v, v, el)
        } else {
            self.nominal_clause(b, frame, lu, d, style, rng)
        }
    }

    fn core_plan<R: Rng>(&self, lu: usize, rng: &mut R) -> (bool, bool) {
        let ambiguous = self.lus[lu].frames.len() > 1;
        (rng.gen_bool(0.9), ambiguous || rng.gen_bool(0.95))
    }

    fn verbal_clause<R: Rng>(&self, b: &mut Builder, frame: usize, lu: usize, d: usize, style: &Style, rng: &mut R) -> (usize, Vec<Span>) {
        let tmpl = &FRAMES[frame];
        let (with_agent, with_theme) = self.core_plan(lu, rng);
        let mut elements = Vec::new();
        let agent = with_agent.then(|| self.np(b, tmpl.agent.1, d, style, rng));
        let (suffix, tense) = TENSES.choose(rng).unwrap();
        let lemma = &self.lus[lu].lemma;
        let form = format!("{}{}", &lemma[..lemma.len() - 2], suffix);
        let v = b.push(&form, lemma, "VERB", vec![("Tense", tense)], "root");
        if let Some((s, e, h)) = agent {
            b.set_head(h, v, "nsubj");
            elements.push(Span::new(s + 1, e + 1, tmpl.agent.0));
        }
        if with_theme {
            let (s, e, h) = self.np(b, tmpl.theme.1, d, style, rng);
            b.set_head(h, v, "obj");
            elements.push(Span::new(s + 1, e + 1, tmpl.theme.0));
        }
        self.adjuncts(b, v, d, style, rng, &mut elements);
        (v, elements)
    }

    fn nominal_clause<R: Rng>(&self, b: &mut Builder, frame: usize, lu: usize, d: usize, style: &Style, rng: &mut R) -> (usize, usize, Vec<Span>) {
        let tmpl = &FRAMES[frame];
        let (with_agent, with_theme) = self.core_plan(lu, rng);
        let mut elements = Vec::new();
        let det = b.push("la", "le", "DET", vec![], "det");
        let lemma = &self.lus[lu].lemma;
        let n = b.push(lemma, lemma, "NOUN", vec![("Number", "Sing")], "nsubj");
        b.set_head(det, n, "det");
        if with_theme {
            let (s, e, h) = self.pp(b, "de", tmpl.theme.1, d, style, rng);
            b.set_head(h, n, "nmod");
            elements.push(Span::new(s + 1, e + 1, tmpl.theme.0));
        }
        if with_agent {
            let (s, e, h) = self.pp(b, "par", tmpl.agent.1, d, style, rng);
            b.set_head(h, n, "nmod");
            elements.push(Span::new(s + 1, e + 1, tmpl.agent.0));
        }
        let (form, lv_lemma) = LIGHT_VERBS.choose(rng).unwrap();
        let v = b.push(form, lv_lemma, "VERB", vec![("Tense", "Past")], "root");
        b.set_head(n, v, "nsubj");
        self.adjuncts(b, v, d, style, rng, &mut elements);
        (n, v, elements)
    }

    fn adjuncts<R: Rng>(&self, b: &mut Builder, head: usize, d: usize, style: &Style, rng: &mut R, elements: &mut Vec<Span>) {
        if rng.gen_bool(0.4) {
            let (s, e, h) = self.pp(b, TIME_PREPS.choose(rng).unwrap(), Class::Time, d, style, rng);
            b.set_head(h, head, "obl");
            elements.push(Span::new(s + 1, e + 1, "Time"));
        }
        if rng.gen_bool(0.35) {
            let (s, e, h) = self.pp(b, PLACE_PREPS.choose(rng).unwrap(), Class::Place, d, style, rng);
            b.set_head(h, head, "obl");
            elements.push(Span::new(s + 1, e + 1, "Place"));
        }
    }

    /// Noun phrase: returns (first, last, head) builder positions.
    fn np<R: Rng>(&self, b: &mut Builder, class: Class, d: usize, style: &Style, rng: &mut R) -> (usize, usize, usize) {
        let noun = self.nouns[d][class as usize].choose(rng).unwrap();
        let start = b.len();
        let det = (!noun.proper).then(|| {
            let w = DETERMINERS.choose(rng).unwrap();
            b.push(w, w, "DET", vec![], "det")
        });
        let pos = if noun.form.chars().all(|c| c.is_ascii_digit()) {
            "NUM"
        } else if noun.proper {
            "PROPN"
        } else {
            "NOUN"
        };
        let h = b.push(&noun.form, &noun.form.to_lowercase(), pos, vec![("Number", "Sing")], "dep");
        if let Some(det) = det {
            b.set_head(det, h, "det");
        }
        if !noun.proper && rng.gen_bool(style.adjective) {
            let adj = self.adjectives[d].choose(rng).unwrap();
            let a = b.push(adj, adj, "ADJ", vec![], "amod");
            b.set_head(a, h, "amod");
        }
        (start, b.len() - 1, h)
    }

    fn pp<R: Rng>(&self, b: &mut Builder, prep: &str, class: Class, d: usize, style: &Style, rng: &mut R) -> (usize, usize, usize) {
        let p = b.push(prep, prep, "ADP", vec![], "case");
        let (_, e, h) = self.np(b, class, d, style, rng);
        b.set_head(p, h, "case");
        (p, e, h)
    }

    fn vectors<R: Rng>(&self, config: &SynthConfig, rng: &mut R) -> Result<WordVectors> {
        let dim = config.vector_dim;
        let unit = |rng: &mut R| -> Vec<f64> {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>()).max(1e-12);
            v.into_iter().map(|x| x / n).collect()
        };
        let class_vecs: Vec<Vec<f64>> = CLASSES.iter().map(|_| unit(rng)).collect();
        let axis = unit(rng);
        let topics: Vec<Vec<f64>> = (0..self.domains)
            .map(|d| {
                let pos = if self.domains > 1 { 2.0 * d as f64 / (self.domains - 1) as f64 - 1.0 } else { 0.0 };
                let own = unit(rng);
                let a = config.topic_axis;
                own.iter().zip(&axis).map(|(o, x)| (1.0 - a) * o + a * pos * x).collect()
            })
            .collect();
        let frame_vecs: Vec<Vec<f64>> = (0..self.frames).map(|_| unit(rng)).collect();
        let mut out = WordVectors::new(dim);
        let add = |out: &mut WordVectors, word: &str, parts: &[(&[f64], f64)], rng: &mut R| -> Result<()> {
            let noise = unit(rng);
            let mut v = vec![0.0; dim];
            for (p, w) in parts {
                for (a, b) in v.iter_mut().zip(p.iter()) {
                    *a += w * b;
                }
            }
            for (a, b) in v.iter_mut().zip(&noise) {
                *a += config.noise_weight * b;
            }
            out.insert(word, &v)
        };
        for (d, per_class) in self.nouns.iter().enumerate() {
            for list in per_class {
                for noun in list {
                    if out.get(&noun.form).is_some() {
                        continue;
                    }
                    let class = &class_vecs[noun.class as usize];
                    match noun.home {
                        Some(h) => add(&mut out, &noun.form, &[(class, 1.0), (&topics[h], config.topic_weight)], rng)?,
                        None => add(&mut out, &noun.form, &[(class, 1.0)], rng)?,
                    }
                }
            }
            for adj in &self.adjectives[d] {
                add(&mut out, adj, &[(&topics[d], config.topic_weight)], rng)?;
            }
        }
        for lu in &self.lus {
            let f = &frame_vecs[lu.frames[0]];
            let stem = if lu.verbal { &lu.lemma[..lu.lemma.len() - 2] } else { &lu.lemma };
            if lu.verbal {
                for (suffix, _) in TENSES {
                    add(&mut out, &format!("{stem}{suffix}"), &[(f, 1.0)], rng)?;
                }
            }
            add(&mut out, &lu.lemma, &[(f, 1.0)], rng)?;
        }
        let function_words = DETERMINERS
            .iter()
            .chain(&TIME_PREPS)
            .chain(&PLACE_PREPS)
            .copied()
            .chain(["de", "par", "que", "et", ",", "."])
            .chain(LIGHT_VERBS.iter().map(|x| x.0))
            .chain(REPORT_VERBS.iter().map(|x| x.0));
        for w in function_words {
            add(&mut out, w, &[], rng)?;
        }
        debug_assert!(self.all_words.len() >= out.len() / 4);
        Ok(out)
    }
}

fn weighted<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

#[derive(Default)]
struct Builder {
    tokens: Vec<(String, String, String, Vec<(String, String)>, Option<usize>, String)>,
}

impl Builder {
    fn len(&self) -> usize {
        self.tokens.len()
    }

    fn push(&mut self, form: &str, lemma: &str, pos: &str, morph: Vec<(&str, &str)>, deprel: &str) -> usize {
        let morph = morph.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        self.tokens.push((form.to_string(), lemma.to_string(), pos.to_string(), morph, None, deprel.to_string()));
        self.tokens.len() - 1
    }

    fn set_head(&mut self, i: usize, head: usize, deprel: &str) {
        self.tokens[i].4 = Some(head);
        self.tokens[i].5 = deprel.to_string();
    }

    fn set_root(&mut self, i: usize) {
        self.tokens[i].4 = None;
        self.tokens[i].5 = "root".to_string();
    }

    fn finish(self) -> Vec<Token> {
        self.tokens
            .into_iter()
            .enumerate()
            .map(|(i, (form, lemma, pos, morph, head, deprel))| Token {
                index: i + 1,
                form,
                lemma,
                pos,
                morph,
                head: head.map_or(0, |h| h + 1),
                deprel,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::extract_instances;
    use alloc::collections::BTreeMap;

    #[test]
    fn deterministic_for_fixed_seed() {
        let c = SynthConfig::default();
        assert_eq!(generate_synthetic_set(&c, 7).unwrap(), generate_synthetic_set(&c, 7).unwrap());
        assert_ne!(generate_synthetic(&c, 7).unwrap().0, generate_synthetic(&c, 8).unwrap().0);
    }

    #[test]
    fn sizes_and_domain_metadata() {
        let c = SynthConfig { domains: 2, sentences_per_domain: 100, ..SynthConfig::default() };
        let (corpus, lex) = generate_synthetic(&c, 1).unwrap();
        assert_eq!(corpus.len(), 200);
        assert_eq!(corpus.sentences.iter().filter(|s| s.domain.as_deref() == Some("D1")).count(), 100);
        assert_eq!(corpus.sentences.iter().filter(|s| s.domain.as_deref() == Some("D2")).count(), 100);
        corpus.validate(Some(&lex)).unwrap();
        lex.validate().unwrap();
        assert_eq!(extract_instances(&corpus, &lex).unwrap().len(), corpus.annotation_count());
    }

    #[test]
    fn every_sentence_is_a_tree() {
        let (corpus, _) = generate_synthetic(&SynthConfig { domains: 3, ..SynthConfig::default() }, 4).unwrap();
        for s in &corpus.sentences {
            assert_eq!(s.tokens.iter().filter(|t| t.head == 0).count(), 1, "{:?}", s.tokens.iter().map(|t| (t.form.as_str(), t.head, t.deprel.as_str())).collect::<Vec<_>>());
            for t in &s.tokens {
                let mut seen = 0;
                let mut h = t.head;
                while h != 0 {
                    h = s.tokens[h - 1].head;
                    seen += 1;
                    assert!(seen <= s.len(), "cycle in sentence");
                }
            }
        }
    }

    #[test]
    fn polysemous_lus_show_several_frames() {
        let (corpus, lex) = generate_synthetic(&SynthConfig::default(), 3).unwrap();
        let mut seen: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for s in &corpus.sentences {
            for a in &s.annotations {
                seen.entry(&a.lu).or_default().insert(&a.frame);
            }
        }
        let ambiguous: Vec<&str> = lex.lu_entries().iter().map(|(l, _)| l.as_str()).filter(|l| lex.candidates(l).unwrap().len() > 1).collect();
        assert!(!ambiguous.is_empty());
        assert!(ambiguous.iter().any(|l| seen.get(l).is_some_and(|f| f.len() >= 2)));
    }

    #[test]
    fn rejects_degenerate_configs() {
        assert!(generate_synthetic(&SynthConfig { domains: 0, ..SynthConfig::default() }, 0).is_err());
        assert!(generate_synthetic(&SynthConfig { frames: 0, ..SynthConfig::default() }, 0).is_err());
    }

    #[test]
    fn vectors_cover_every_form() {
        let set = generate_synthetic_set(&SynthConfig::default(), 2).unwrap();
        for s in &set.corpus.sentences {
            for t in &s.tokens {
                assert!(set.vectors.get(&t.form).is_some(), "missing vector for {}", t.form);
            }
        }
    }
}
