use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{Sentence, WordVectors};

/// Reserved id of the unknown entry in every vocabulary.
pub const UNK: usize = 0;

/// Feature columns, in embedding-table order.
pub const NUM_FEATURES: usize = 10;
pub const DISTANCE_BUCKETS: usize = 13;
pub const CAP_CLASSES: usize = 5;
pub const TREE_DISTANCE_CAP: usize = 5;

/// String-to-id map with `<unk>` at id 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    items: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_items(Vec::new())
    }
}

impl Vocab {
    /// Builds from items listed after the implicit `<unk>` entry.
    pub fn from_items(items: Vec<String>) -> Self {
        let mut v = Vocab { items: vec!["<unk>".to_string()], index: BTreeMap::new() };
        for it in items {
            v.add(&it);
        }
        v
    }

    pub fn add(&mut self, item: &str) -> usize {
        if let Some(&i) = self.index.get(item) {
            return i;
        }
        self.index.insert(item.to_string(), self.items.len());
        self.items.push(item.to_string());
        self.items.len() - 1
    }

    pub fn id(&self, item: &str) -> usize {
        self.index.get(item).copied().unwrap_or(UNK)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Items after `<unk>`, in id order.
    pub fn items(&self) -> &[String] {
        &self.items[1..]
    }

    pub fn item(&self, id: usize) -> &str {
        &self.items[id]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabularies {
    pub words: Vocab,
    pub pos: Vocab,
    pub deprels: Vocab,
    pub suffix2: Vocab,
    pub suffix3: Vocab,
}

impl Vocabularies {
    /// Collects every value seen in `sentences`; words from `extra` (for
    /// example pretrained vectors) are added after, in sorted order.
    pub fn build<'a, I>(sentences: I, extra: Option<&WordVectors>) -> Self
    where
        I: IntoIterator<Item = &'a Sentence>,
    {
        let mut v = Vocabularies::default();
        for s in sentences {
            for t in &s.tokens {
                let w = t.form.to_lowercase();
                v.words.add(&w);
                v.pos.add(&t.pos);
                v.deprels.add(&t.deprel);
                v.suffix2.add(&suffix(&w, 2));
                v.suffix3.add(&suffix(&w, 3));
            }
        }
        if let Some(vectors) = extra {
            for w in vectors.words() {
                v.words.add(&w);
                v.suffix2.add(&suffix(&w, 2));
                v.suffix3.add(&suffix(&w, 3));
            }
        }
        v
    }

    /// Table sizes in feature-column order.
    pub fn table_sizes(&self) -> [usize; NUM_FEATURES] {
        [
            self.words.len(),
            self.pos.len(),
            self.deprels.len(),
            2,
            DISTANCE_BUCKETS,
            CAP_CLASSES,
            self.suffix2.len(),
            self.suffix3.len(),
            self.deprels.len(),
            TREE_DISTANCE_CAP + 1,
        ]
    }
}

fn suffix(word: &str, n: usize) -> String {
    let chars: Vec<char> = word.chars().collect();
    chars[chars.len().saturating_sub(n)..].iter().collect()
}

/// Signed distance `position − trigger` clamped to [−6, 6], shifted to 0..13.
pub fn distance_bucket(position: usize, trigger: usize) -> usize {
    let d = (position as i64 - trigger as i64).clamp(-6, 6);
    (d + 6) as usize
}

/// 0 lower, 1 initial capital, 2 all capitals, 3 contains a digit, 4 other.
pub fn capitalization_class(form: &str) -> usize {
    let letters: Vec<char> = form.chars().filter(|c| c.is_alphabetic()).collect();
    if form.chars().any(|c| c.is_ascii_digit()) {
        3
    } else if letters.is_empty() {
        4
    } else if letters.iter().all(|c| c.is_lowercase()) {
        0
    } else if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        2
    } else if form.chars().next().is_some_and(char::is_uppercase) {
        1
    } else {
        4
    }
}

/// Number of dependency arcs between two tokens (1-based), capped.
pub fn tree_distance(sentence: &Sentence, a: usize, b: usize) -> usize {
    let path = |mut p: usize| {
        let mut out = vec![p];
        let mut guard = 0;
        while p != 0 && guard <= sentence.len() {
            p = sentence.token(p).map_or(0, |t| t.head);
            out.push(p);
            guard += 1;
        }
        out
    };
    let pa = path(a);
    let pb = path(b);
    for (i, x) in pa.iter().enumerate() {
        if let Some(j) = pb.iter().position(|y| y == x) {
            return (i + j).min(TREE_DISTANCE_CAP);
        }
    }
    TREE_DISTANCE_CAP
}

/// Per-token categorical ids, one row per token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureView {
    pub ids: Vec<[usize; NUM_FEATURES]>,
}

impl FeatureView {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Predicate-flag column.
    pub fn predicate_flags(&self) -> Vec<usize> {
        self.ids.iter().map(|r| r[3]).collect()
    }
}

/// Features of `sentence` relative to the 1-based `trigger`.
pub fn featurize(sentence: &Sentence, trigger: usize, vocab: &Vocabularies) -> FeatureView {
    let trig_rel = sentence.token(trigger).map_or(UNK, |t| vocab.deprels.id(&t.deprel));
    let ids = sentence
        .tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let pos = i + 1;
            let w = t.form.to_lowercase();
            [
                vocab.words.id(&w),
                vocab.pos.id(&t.pos),
                vocab.deprels.id(&t.deprel),
                usize::from(pos == trigger),
                distance_bucket(pos, trigger),
                capitalization_class(&t.form),
                vocab.suffix2.id(&suffix(&w, 2)),
                vocab.suffix3.id(&suffix(&w, 3)),
                trig_rel,
                tree_distance(sentence, pos, trigger),
            ]
        })
        .collect();
    FeatureView { ids }
}
