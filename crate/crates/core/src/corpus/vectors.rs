use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Word-form vectors keyed by lowercased form, with a dedicated unknown
/// vector.
#[derive(Debug, Clone)]
pub struct WordVectors {
    dim: usize,
    index: BTreeMap<String, usize>,
    data: Vec<f64>,
    unk: Vec<f64>,
}

impl WordVectors {
    pub fn new(dim: usize) -> Self {
        WordVectors { dim, index: BTreeMap::new(), data: Vec::new(), unk: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Shape(format!("vector for `{word}` has {} dims, expected {}", vector.len(), self.dim)));
        }
        let key = word.to_lowercase();
        match self.index.get(&key) {
            Some(&i) => self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(key, self.data.len() / self.dim);
                self.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn set_unk(&mut self, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Shape(format!("unk vector has {} dims, expected {}", vector.len(), self.dim)));
        }
        self.unk = vector.to_vec();
        Ok(())
    }

    pub fn unk(&self) -> &[f64] {
        &self.unk
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        let i = *self.index.get(&word.to_lowercase())?;
        Some(&self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// The word's vector, or the unknown vector.
    pub fn get_or_unk(&self, word: &str) -> &[f64] {
        self.get(word).unwrap_or(&self.unk)
    }

    /// Entries sorted by word.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.index.iter().map(|(w, &i)| (w.as_str(), &self.data[i * self.dim..(i + 1) * self.dim]))
    }

    pub fn words(&self) -> Vec<String> {
        self.index.keys().map(ToString::to_string).collect()
    }
}

/// Equal when the same words map to the same vectors, whatever the
/// insertion order.
impl PartialEq for WordVectors {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.unk == other.unk && self.len() == other.len() && self.iter().eq(other.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_case_insensitive_with_unk_fallback() {
        let mut v = WordVectors::new(2);
        v.insert("Paris", &[1.0, 2.0]).unwrap();
        v.set_unk(&[9.0, 9.0]).unwrap();
        assert_eq!(v.get("paris"), Some(&[1.0, 2.0][..]));
        assert_eq!(v.get_or_unk("lyon"), &[9.0, 9.0]);
        assert!(v.insert("x", &[1.0]).is_err());
    }
}
