//! Binary model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "AHCR1"                      magic, 5 bytes
//! u32 version                  currently 1
//! u32 tensor count
//! per tensor:  u16 name length, UTF-8 name, u8 rank, rank x u32 dims
//! per tensor:  element payload as f32, in catalog order
//! u32 CRC-32 of every byte between the magic and this trailer
//! ```
//!
//! Tensors are grouped into sections by name prefix: `meta.` and `cnn.`
//! hold the network, `svm.` the optional SVM head.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::scalar::Scalar;
use crate::svm::{Standardizer, SvmModel};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 5] = b"AHCR1";
pub const VERSION: u32 = 1;

/// Ordered catalog of named f32 tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Container {
    entries: Vec<(String, Tensor<f32>)>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptContainer(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt("unexpected end of data"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a tensor.
    pub fn insert(&mut self, name: &str, tensor: Tensor<f32>) {
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = tensor,
            None => self.entries.push((name.to_string(), tensor)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    fn require(&self, name: &str, section: &str) -> Result<&Tensor<f32>> {
        self.get(name).ok_or_else(|| Error::MissingSection(section.to_string()))
    }

    pub fn has_section(&self, prefix: &str) -> bool {
        let p = format!("{prefix}.");
        self.entries.iter().any(|(n, _)| n.starts_with(&p))
    }

    pub fn remove_section(&mut self, prefix: &str) {
        let p = format!("{prefix}.");
        self.entries.retain(|(n, _)| !n.starts_with(&p));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend(VERSION.to_le_bytes());
        out.extend((self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            out.extend((name.len() as u16).to_le_bytes());
            out.extend(name.as_bytes());
            out.push(t.rank() as u8);
            for &d in t.shape() {
                out.extend((d as u32).to_le_bytes());
            }
        }
        for (_, t) in &self.entries {
            for v in t.data() {
                out.extend(v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out[MAGIC.len()..]);
        out.extend(crc.to_le_bytes());
        out
    }

    /// Parses and verifies a container. Any checksum mismatch, truncation
    /// or trailing data is a [`Error::CorruptContainer`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 12 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        if crc32fast::hash(&body[MAGIC.len()..]) != stored {
            return Err(corrupt("checksum mismatch"));
        }
        let mut r = Reader {
            bytes: body,
            at: MAGIC.len(),
        };
        let version = r.u32()?;
        if version != VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut catalog = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| corrupt("tensor name is not UTF-8"))?
                .to_string();
            let rank = r.u8()? as usize;
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            catalog.push((name, shape));
        }
        let mut entries = Vec::with_capacity(catalog.len());
        for (name, shape) in catalog {
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or_else(|| corrupt("tensor too large"))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t = Tensor::from_vec(&shape, data).map_err(|e| corrupt(format!("{name}: {e}")))?;
            entries.push((name, t));
        }
        if r.at != body.len() {
            return Err(corrupt("trailing bytes after payload"));
        }
        Ok(Container { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// Stores the network under `meta.` and `cnn.`, replacing any previous one.
    pub fn put_model<T: Scalar>(&mut self, model: &Model<T>) {
        let cfg = model.config();
        self.insert(
            "meta.widths",
            Tensor::from_vec(&[3], cfg.widths.iter().map(|&w| w as f32).collect()).unwrap(),
        );
        self.insert(
            "meta.dropout_rate",
            Tensor::from_vec(&[1], vec![cfg.dropout_rate as f32]).unwrap(),
        );
        for (name, t) in Model::<T>::param_names().iter().zip(model.params()) {
            self.insert(&format!("cnn.{name}"), t.cast());
        }
    }

    pub fn model<T: Scalar>(&self) -> Result<Model<T>> {
        let widths = self.require("meta.widths", "meta")?;
        let rate = self.require("meta.dropout_rate", "meta")?;
        if widths.len() != 3 || rate.len() != 1 {
            return Err(corrupt("malformed meta section"));
        }
        let w = widths.data();
        let config = ModelConfig {
            widths: [w[0] as usize, w[1] as usize, w[2] as usize],
            dropout_rate: rate.data()[0] as f64,
        };
        let mut model = Model::<T>::zeros(config)?;
        let params = Model::<T>::param_names()
            .iter()
            .map(|n| self.require(&format!("cnn.{n}"), "cnn").map(|t| t.cast()))
            .collect::<Result<Vec<_>>>()?;
        model.set_params(params).map_err(|e| corrupt(e.to_string()))?;
        Ok(model)
    }

    /// Stores the SVM head under `svm.`, replacing any previous one.
    pub fn put_svm(&mut self, svm: &SvmModel<f32>) {
        self.remove_section("svm");
        self.insert("svm.weights", svm.weights.clone());
        self.insert("svm.bias", svm.bias.clone());
        self.insert("svm.reg_lambda", Tensor::from_vec(&[1], vec![svm.reg_lambda as f32]).unwrap());
        if let Some(s) = &svm.standardizer {
            self.insert("svm.mean", s.mean.clone());
            self.insert("svm.scale", s.scale.clone());
        }
    }

    pub fn svm(&self) -> Result<SvmModel<f32>> {
        let weights = self.require("svm.weights", "svm")?.clone();
        let bias = self.require("svm.bias", "svm")?.clone();
        let reg = self.require("svm.reg_lambda", "svm")?;
        let standardizer = match (self.get("svm.mean"), self.get("svm.scale")) {
            (Some(m), Some(s)) => Some(Standardizer {
                mean: m.clone(),
                scale: s.clone(),
            }),
            (None, None) => None,
            _ => return Err(corrupt("svm standardizer is incomplete")),
        };
        Ok(SvmModel {
            weights,
            bias,
            reg_lambda: reg.data()[0] as f64,
            standardizer,
        })
    }
}
