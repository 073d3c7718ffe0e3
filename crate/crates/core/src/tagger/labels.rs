use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{FrameLexicon, Tag};
use crate::{Error, Result};

/// Ordered label set: `O`, one `T-<Frame>` per frame, then `B-`/`I-` per
/// distinct frame-element label. The order is part of the checkpoint format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelInventory {
    tags: Vec<Tag>,
    index: BTreeMap<Tag, usize>,
}

impl LabelInventory {
    pub fn from_lexicon(lexicon: &FrameLexicon) -> Self {
        let mut tags = alloc::vec![Tag::O];
        tags.extend(lexicon.frames().iter().map(|f| Tag::T(f.name.clone())));
        for fe in lexicon.element_labels() {
            tags.push(Tag::B(fe.to_string()));
            tags.push(Tag::I(fe.to_string()));
        }
        Self::from_tags(tags).expect("lexicon labels are unique")
    }

    pub fn from_tags(tags: Vec<Tag>) -> Result<Self> {
        if tags.first() != Some(&Tag::O) {
            return Err(Error::Validation("label inventory must start with O".into()));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tags.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate label {t}")));
            }
        }
        for t in &tags {
            if let Tag::I(x) = t {
                if !index.contains_key(&Tag::B(x.clone())) {
                    return Err(Error::Validation(format!("label {t} has no matching B-{x}")));
                }
            }
        }
        Ok(LabelInventory { tags, index })
    }

    /// Parses labels from their text form (`O`, `T-x`, `B-x`, `I-x`).
    pub fn from_strings<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        Self::from_tags(labels.iter().map(|s| s.as_ref().parse()).collect::<Result<Vec<Tag>>>()?)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn tag(&self, i: usize) -> &Tag {
        &self.tags[i]
    }

    pub fn index(&self, tag: &Tag) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.tags.iter().map(ToString::to_string).collect()
    }

    pub fn encode(&self, tags: &[Tag]) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| self.index(t).ok_or_else(|| Error::Validation(format!("label {t} not in inventory"))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Coreness;

    #[test]
    fn inventory_layout() {
        let mut lex = FrameLexicon::new();
        lex.add_frame("A").unwrap();
        lex.add_element("A", "X", Coreness::Core).unwrap();
        lex.add_element("A", "Time", Coreness::NonCore).unwrap();
        lex.add_frame("B").unwrap();
        lex.add_element("B", "Time", Coreness::NonCore).unwrap();
        let inv = LabelInventory::from_lexicon(&lex);
        assert_eq!(inv.to_strings(), ["O", "T-A", "T-B", "B-X", "I-X", "B-Time", "I-Time"]);
        assert_eq!(inv.index(&Tag::O), Some(0));
        assert_eq!(LabelInventory::from_strings(&inv.to_strings()).unwrap(), inv);
    }

    #[test]
    fn rejects_bad_inventories() {
        assert!(LabelInventory::from_strings(&["T-A", "O"]).is_err());
        assert!(LabelInventory::from_strings(&["O", "I-X"]).is_err());
        assert!(LabelInventory::from_strings(&["O", "O"]).is_err());
    }
}
