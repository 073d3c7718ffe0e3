//! Binary parameter container plus JSON sidecar.
//!
//! Container layout, all integers little-endian:
//!
//! ```text
//! magic    4 bytes  "AFCK"
//! version  u8       1
//! count    u32      number of records
//! record*  name_len u32, name (UTF-8), ndim u32, dims u64 × ndim,
//!          values f64 × product(dims)
//! ```

use std::fs;
use std::path::Path;

use advframe_core::adversary::AdversaryHead;
use advframe_core::numerics::{Parameterized, Tensor};
use advframe_core::tagger::{LabelInventory, ParserModel, TaggerConfig, Vocab, Vocabularies};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

pub const MAGIC: &[u8; 4] = b"AFCK";
pub const VERSION: u8 = 1;
pub const SIDECAR_VERSION: u32 = 1;

pub fn encode_records(records: &[(&str, &Tensor)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for (name, t) in records {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Version(format!("container truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_records(buf: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Version("not a parameter container (bad magic)".into()));
    }
    let v = r.take(1)?[0];
    if v != VERSION {
        return Err(Error::Version(format!("container version {v}, expected {VERSION}")));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let n = r.u32()? as usize;
        let name = String::from_utf8(r.take(n)?.to_vec()).map_err(|_| Error::Version("record name is not UTF-8".into()))?;
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| Error::Version("shape overflow".into()))?;
        let bytes = r.take(len.checked_mul(8).ok_or_else(|| Error::Version("shape overflow".into()))?)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        out.push((name, Tensor::from_vec(&shape, data)?));
    }
    if r.pos != buf.len() {
        return Err(Error::Version("trailing bytes after last record".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadShape {
    pub widths: Vec<usize>,
    pub filters: usize,
    pub classes: usize,
}

/// Everything besides parameter values needed to rebuild a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: u32,
    pub word_dim: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub words_frozen: bool,
    pub words: Vec<String>,
    pub pos: Vec<String>,
    pub deprels: Vec<String>,
    pub suffix2: Vec<String>,
    pub suffix3: Vec<String>,
    /// Label inventory in output-row order.
    pub labels: Vec<String>,
    pub head: Option<HeadShape>,
}

impl Sidecar {
    pub fn describe(model: &ParserModel, head: Option<&AdversaryHead>) -> Self {
        let v = &model.vocab;
        let items = |x: &Vocab| x.items().to_vec();
        Sidecar {
            version: SIDECAR_VERSION,
            word_dim: model.config.word_dim,
            feature_dim: model.config.feature_dim,
            hidden: model.config.hidden,
            layers: model.config.layers,
            words_frozen: model.embeddings[0].frozen,
            words: items(&v.words),
            pos: items(&v.pos),
            deprels: items(&v.deprels),
            suffix2: items(&v.suffix2),
            suffix3: items(&v.suffix3),
            labels: model.labels.to_strings(),
            head: head.map(|h| HeadShape {
                widths: h.conv.filters.iter().map(|f| f.width).collect(),
                filters: h.conv.filters[0].count(),
                classes: h.classes(),
            }),
        }
    }

    fn skeleton(&self) -> Result<(ParserModel, Option<AdversaryHead>)> {
        if self.version != SIDECAR_VERSION {
            return Err(Error::Version(format!("sidecar version {}, expected {SIDECAR_VERSION}", self.version)));
        }
        let vocab = Vocabularies {
            words: Vocab::from_items(self.words.clone()),
            pos: Vocab::from_items(self.pos.clone()),
            deprels: Vocab::from_items(self.deprels.clone()),
            suffix2: Vocab::from_items(self.suffix2.clone()),
            suffix3: Vocab::from_items(self.suffix3.clone()),
        };
        let config = TaggerConfig {
            word_dim: self.word_dim,
            feature_dim: self.feature_dim,
            hidden: self.hidden,
            layers: self.layers,
        };
        let labels = LabelInventory::from_strings(&self.labels)?;
        let mut model = ParserModel::new(config, vocab, labels, 0)?;
        model.embeddings[0].frozen = self.words_frozen;
        let head = match &self.head {
            Some(h) => Some(AdversaryHead::new(model.top_dim(), &h.widths, h.filters, h.classes, 0)?),
            None => None,
        };
        Ok((model, head))
    }
}

pub fn checkpoint_bytes(model: &ParserModel, head: Option<&AdversaryHead>) -> Vec<u8> {
    let mut params = model.params();
    if let Some(h) = head {
        params.extend(h.params());
    }
    let records: Vec<(&str, &Tensor)> = params.iter().map(|p| (p.name.as_str(), &p.value)).collect();
    encode_records(&records)
}

/// Restores parameters by name; every parameter must be present with the
/// same shape and nothing may be left over.
pub fn restore(sidecar: &Sidecar, bytes: &[u8]) -> Result<(ParserModel, Option<AdversaryHead>)> {
    let (mut model, mut head) = sidecar.skeleton()?;
    let mut records: std::collections::BTreeMap<String, Tensor> = decode_records(bytes)?.into_iter().collect();
    let mut params = model.params_mut();
    if let Some(h) = head.as_mut() {
        params.extend(h.params_mut());
    }
    for p in params {
        let t = records
            .remove(&p.name)
            .ok_or_else(|| Error::Version(format!("checkpoint lacks parameter `{}`", p.name)))?;
        if t.shape() != p.value.shape() {
            return Err(Error::Version(format!("parameter `{}` has shape {:?}, expected {:?}", p.name, t.shape(), p.value.shape())));
        }
        p.value = t;
    }
    if let Some(name) = records.keys().next() {
        return Err(Error::Version(format!("unexpected parameter `{name}` in checkpoint")));
    }
    Ok((model, head))
}

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const SIDECAR_FILE: &str = "checkpoint.json";

pub fn save(dir: &Path, model: &ParserModel, head: Option<&AdversaryHead>) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let bin = dir.join(CHECKPOINT_FILE);
    fs::write(&bin, checkpoint_bytes(model, head)).map_err(io_err(&bin))?;
    let side = dir.join(SIDECAR_FILE);
    let json = serde_json::to_string_pretty(&Sidecar::describe(model, head))?;
    fs::write(&side, json + "\n").map_err(io_err(&side))
}

pub fn load(dir: &Path) -> Result<(ParserModel, Option<AdversaryHead>)> {
    let side = dir.join(SIDECAR_FILE);
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(&side).map_err(io_err(&side))?)?;
    let bin = dir.join(CHECKPOINT_FILE);
    restore(&sidecar, &fs::read(&bin).map_err(io_err(&bin))?)
}
