//! Plain-text corpus, lexicon and word-vector formats.
//!
//! Corpus: one TAB-separated token line per token
//! (`INDEX FORM LEMMA POS MORPH HEAD DEPREL`, MORPH `_` or `k=v|k=v`),
//! optional `#domain <name>` before the tokens, `#target` / `#fe` lines
//! after them, and a blank line after each sentence.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use advframe_core::corpus::{Corpus, Coreness, FrameLexicon, Sentence, Span, TargetAnnotation, Token, WordVectors};

use crate::error::{io_err, Error, Result};

pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut cur = Pending::default();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if let Some(s) = cur.finish(n)? {
                corpus.sentences.push(s);
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("#domain") {
            if !cur.tokens.is_empty() {
                return Err(Error::parse(n, "#domain after the first token"));
            }
            let name = rest.trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(Error::parse(n, "#domain needs one name"));
            }
            cur.domain = Some(name.to_string());
        } else if let Some(rest) = line.strip_prefix("#target") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            let [trigger, lu, frame] = f[..] else {
                return Err(Error::parse(n, "expected `#target <trigger> <lu> <frame>`"));
            };
            cur.annotations.push(TargetAnnotation {
                trigger: number(trigger, n)?,
                lu: lu.to_string(),
                frame: frame.to_string(),
                elements: Vec::new(),
            });
            cur.saw_annotation = true;
        } else if let Some(rest) = line.strip_prefix("#fe") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            let [ord, start, end, label] = f[..] else {
                return Err(Error::parse(n, "expected `#fe <target> <start> <end> <label>`"));
            };
            let ord: usize = number(ord, n)?;
            let a = ord
                .checked_sub(1)
                .and_then(|o| cur.annotations.get_mut(o))
                .ok_or_else(|| Error::parse(n, format!("#fe refers to missing target {ord}")))?;
            a.elements.push(Span::new(number(start, n)?, number(end, n)?, label));
        } else if line.starts_with('#') {
            return Err(Error::parse(n, format!("unknown directive `{line}`")));
        } else {
            if cur.saw_annotation {
                return Err(Error::parse(n, "token line after annotation lines"));
            }
            cur.tokens.push(parse_token(line, n)?);
            cur.start_line.get_or_insert(n);
        }
    }
    if let Some(s) = cur.finish(text.lines().count() + 1)? {
        corpus.sentences.push(s);
    }
    Ok(corpus)
}

#[derive(Default)]
struct Pending {
    domain: Option<String>,
    tokens: Vec<Token>,
    annotations: Vec<TargetAnnotation>,
    saw_annotation: bool,
    start_line: Option<usize>,
}

impl Pending {
    fn finish(&mut self, line: usize) -> Result<Option<Sentence>> {
        let p = std::mem::take(self);
        if p.tokens.is_empty() {
            if p.domain.is_some() || !p.annotations.is_empty() {
                return Err(Error::parse(line, "sentence without tokens"));
            }
            return Ok(None);
        }
        let mut s = Sentence { domain: p.domain, tokens: p.tokens, annotations: p.annotations };
        for a in &mut s.annotations {
            a.elements.sort();
        }
        s.validate().map_err(|e| Error::parse(p.start_line.unwrap_or(line), e.to_string()))?;
        Ok(Some(s))
    }
}

fn number(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| Error::parse(line, format!("`{s}` is not a non-negative integer")))
}

fn parse_token(line: &str, n: usize) -> Result<Token> {
    let f: Vec<&str> = line.split('\t').collect();
    let [index, form, lemma, pos, morph, head, deprel] = f[..] else {
        return Err(Error::parse(n, format!("expected 7 TAB-separated columns, found {}", f.len())));
    };
    let morph = if morph == "_" {
        Vec::new()
    } else {
        morph
            .split('|')
            .map(|kv| {
                kv.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| Error::parse(n, format!("morph feature `{kv}` is not key=value")))
            })
            .collect::<Result<_>>()?
    };
    if [form, lemma, pos, deprel].iter().any(|c| c.is_empty()) {
        return Err(Error::parse(n, "empty column"));
    }
    Ok(Token {
        index: number(index, n)?,
        form: form.to_string(),
        lemma: lemma.to_string(),
        pos: pos.to_string(),
        morph,
        head: number(head, n)?,
        deprel: deprel.to_string(),
    })
}

pub fn write_sentence(out: &mut String, s: &Sentence, annotations: &[TargetAnnotation]) {
    if let Some(d) = &s.domain {
        let _ = writeln!(out, "#domain {d}");
    }
    for t in &s.tokens {
        let morph = if t.morph.is_empty() {
            "_".to_string()
        } else {
            t.morph.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("|")
        };
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}", t.index, t.form, t.lemma, t.pos, morph, t.head, t.deprel);
    }
    for (i, a) in annotations.iter().enumerate() {
        let _ = writeln!(out, "#target {} {} {}", a.trigger, a.lu, a.frame);
        for e in &a.elements {
            let _ = writeln!(out, "#fe {} {} {} {}", i + 1, e.start, e.end, e.label);
        }
    }
    out.push('\n');
}

pub fn serialize_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for s in &corpus.sentences {
        write_sentence(&mut out, s, &s.annotations);
    }
    out
}

pub fn parse_lexicon(text: &str) -> Result<FrameLexicon> {
    let mut lex = FrameLexicon::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let wrap = |e: advframe_core::Error| Error::parse(n, e.to_string());
        match f[..] {
            ["frame", name] => {
                lex.add_frame(name).map_err(wrap)?;
                current = Some(name.to_string());
            }
            ["fe", label, coreness] => {
                let frame = current.as_deref().ok_or_else(|| Error::parse(n, "`fe` before any `frame`"))?;
                let c: Coreness = coreness.parse().map_err(wrap)?;
                lex.add_element(frame, label, c).map_err(wrap)?;
            }
            ["lu", lemma, frame] => lex.add_lu(lemma, frame).map_err(wrap)?,
            _ => return Err(Error::parse(n, format!("unrecognised lexicon line `{line}`"))),
        }
    }
    lex.validate()?;
    Ok(lex)
}

pub fn serialize_lexicon(lex: &FrameLexicon) -> String {
    let mut out = String::new();
    for f in lex.frames() {
        let _ = writeln!(out, "frame {}", f.name);
        for (label, c) in &f.elements {
            let _ = writeln!(out, "fe {label} {}", c.as_str());
        }
    }
    for (lemma, frame) in lex.lu_entries() {
        let _ = writeln!(out, "lu {lemma} {frame}");
    }
    out
}

/// word2vec-style text: optional `<count> <dim>` header, then `word v1 … vd`.
/// A `<unk>` entry sets the unknown-word vector.
pub fn parse_vectors(text: &str) -> Result<WordVectors> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let mut dim = None;
    if let Some((_, first)) = lines.peek() {
        let f: Vec<&str> = first.split_whitespace().collect();
        if f.len() == 2 && f.iter().all(|x| x.parse::<usize>().is_ok()) {
            dim = Some(f[1].parse::<usize>().expect("checked"));
            lines.next();
        }
    }
    let mut out: Option<WordVectors> = None;
    for (i, line) in lines {
        let n = i + 1;
        let mut f = line.split_whitespace();
        let word = f.next().expect("non-empty line");
        let v: Vec<f64> = f
            .map(|x| x.parse::<f64>().map_err(|_| Error::parse(n, format!("bad number `{x}`"))))
            .collect::<Result<_>>()?;
        let d = *dim.get_or_insert(v.len());
        let wv = out.get_or_insert_with(|| WordVectors::new(d));
        if v.len() != d {
            return Err(Error::parse(n, format!("{} values, expected {d}", v.len())));
        }
        if word == "<unk>" {
            wv.set_unk(&v)?;
        } else {
            wv.insert(word, &v)?;
        }
    }
    out.ok_or_else(|| Error::parse(1, "no vectors"))
}

pub fn serialize_vectors(v: &WordVectors) -> String {
    let mut out = format!("{} {}\n", v.len() + 1, v.dim());
    let row = |out: &mut String, w: &str, x: &[f64]| {
        out.push_str(w);
        for a in x {
            let _ = write!(out, " {a:e}");
        }
        out.push('\n');
    };
    row(&mut out, "<unk>", v.unk());
    for (w, x) in v.iter() {
        row(&mut out, w, x);
    }
    out
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    parse_corpus(&read_text(path)?)
}

pub fn load_lexicon(path: &Path) -> Result<FrameLexicon> {
    parse_lexicon(&read_text(path)?)
}

pub fn load_vectors(path: &Path) -> Result<WordVectors> {
    parse_vectors(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use advframe_core::corpus::{generate_synthetic_set, SynthConfig};

    const MINI: &str = "1\tPaul\tpaul\tPROPN\t_\t2\tnsubj\n2\tattaque\tattaquer\tVERB\tTense=Pres\t0\troot\n3\tRome\trome\tPROPN\t_\t2\tobj\n#target 2 attaquer Attack\n#fe 1 3 3 Victim\n\n";

    #[test]
    fn minimal_sentence() {
        let c = parse_corpus(MINI).unwrap();
        assert_eq!(c.sentences.len(), 1);
        assert_eq!(c.annotation_count(), 1);
        assert_eq!(c.sentences[0].tokens[1].morph, vec![("Tense".to_string(), "Pres".to_string())]);
        assert_eq!(serialize_corpus(&c), MINI);
    }

    #[test]
    fn empty_input() {
        assert!(parse_corpus("").unwrap().sentences.is_empty());
        assert!(parse_corpus("\n\n").unwrap().sentences.is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "1\tPaul\tpaul\tPROPN\t_\t0\n";
        assert!(matches!(parse_corpus(bad), Err(Error::Parse { line: 1, .. })));
        let out_of_range = MINI.replace("#fe 1 3 3", "#fe 1 3 4");
        assert!(matches!(parse_corpus(&out_of_range), Err(Error::Parse { .. })));
        let orphan = MINI.replace("#fe 1", "#fe 2");
        assert!(matches!(parse_corpus(&orphan), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn lexicon_basics() {
        let lex = parse_lexicon("frame Attack\nfe Assailant core\nlu attaquer Attack\n").unwrap();
        assert_eq!(lex.frames().len(), 1);
        assert_eq!(lex.frames()[0].elements.len(), 1);
        assert_eq!(lex.lu_count(), 1);
        assert!(parse_lexicon("frame A\nfe X core\nfe X non-core\n").is_err());
        assert!(parse_lexicon("lu x Nowhere\n").is_err());
        let two = parse_lexicon("# two senses\nframe A\nfe X core\nframe B\nfe Y core\nlu x A\nlu x B\n").unwrap();
        assert_eq!(two.candidates("x").unwrap(), vec!["A", "B"]);
    }

    #[test]
    fn generated_round_trips() {
        let set = generate_synthetic_set(&SynthConfig { sentences_per_domain: 25, ..Default::default() }, 4).unwrap();
        let text = serialize_corpus(&set.corpus);
        assert_eq!(parse_corpus(&text).unwrap(), set.corpus);
        let lex = parse_lexicon(&serialize_lexicon(&set.lexicon)).unwrap();
        assert_eq!(lex, set.lexicon);
        let vecs = parse_vectors(&serialize_vectors(&set.vectors)).unwrap();
        assert_eq!(vecs, set.vectors);
    }
}
