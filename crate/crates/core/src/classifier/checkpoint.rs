//! Versioned binary model checkpoint.
//!
//! Layout (little-endian): `AIDM`, version u32, training config as
//! length-prefixed TOML, label index (accents then speakers, each a u32
//! count of u16-length strings), shape (input dim + three widths, u32),
//! trained flag u8, then every tensor as a u32 length followed by f32 values.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use super::model::{Affine, AidModel, BatchNorm, Mode, ModelShape};
use super::train::TrainingConfig;
use crate::error::{AidError, Result};
use crate::io::atomic_write;
use crate::types::LabelIndex;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"AIDM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: AidModel,
    pub labels: LabelIndex,
    pub config: TrainingConfig,
}

fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| AidError::Config(format!("label too long: {s}")))?;
    buf.write_u16::<LittleEndian>(len).unwrap();
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

fn put_tensor(buf: &mut Vec<u8>, values: &[f64]) {
    buf.write_u32::<LittleEndian>(values.len() as u32).unwrap();
    for v in values {
        buf.write_f32::<LittleEndian>(*v as f32).unwrap();
    }
}

fn tensors(model: &AidModel) -> Vec<&[f64]> {
    let mut out: Vec<&[f64]> = Vec::new();
    for (layer, bn) in model.layers.iter().zip(&model.norms) {
        out.push(layer.weight.as_slice().expect("standard layout"));
        out.push(layer.bias.as_slice().expect("standard layout"));
        out.push(bn.gamma.as_slice().expect("standard layout"));
        out.push(bn.beta.as_slice().expect("standard layout"));
        out.push(bn.running_mean.as_slice().expect("standard layout"));
        out.push(bn.running_var.as_slice().expect("standard layout"));
    }
    for head in [&model.accent_head, &model.speaker_head] {
        out.push(head.weight.as_slice().expect("standard layout"));
        out.push(head.bias.as_slice().expect("standard layout"));
    }
    out
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.write_u32::<LittleEndian>(CHECKPOINT_VERSION).unwrap();
        let cfg = toml::to_string(&self.config).map_err(|e| AidError::Config(e.to_string()))?;
        buf.write_u32::<LittleEndian>(cfg.len() as u32).unwrap();
        buf.extend_from_slice(cfg.as_bytes());
        for list in [self.labels.accents(), self.labels.speakers()] {
            buf.write_u32::<LittleEndian>(list.len() as u32).unwrap();
            for s in list {
                put_str(&mut buf, s)?;
            }
        }
        let shape = self.model.shape();
        buf.write_u32::<LittleEndian>(shape.input_dim as u32).unwrap();
        for w in shape.hidden {
            buf.write_u32::<LittleEndian>(w as u32).unwrap();
        }
        buf.write_u8(u8::from(self.model.is_trained())).unwrap();
        for t in tensors(&self.model) {
            put_tensor(&mut buf, t);
        }
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let header = |reason: String| AidError::MalformedHeader {
            path: origin.to_owned(),
            reason,
        };
        let body = |reason: &str| AidError::MalformedRecord {
            path: origin.to_owned(),
            reason: reason.to_owned(),
        };
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic).map_err(|_| header("truncated".into()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(header("bad magic".into()));
        }
        let version = cur.read_u32::<LittleEndian>().map_err(|_| header("truncated".into()))?;
        if version != CHECKPOINT_VERSION {
            return Err(header(format!("unsupported version {version}")));
        }
        let read_u32 =
            |cur: &mut Cursor<&[u8]>| -> Result<u32> { cur.read_u32::<LittleEndian>().map_err(|_| body("truncated")) };
        let read_string = |cur: &mut Cursor<&[u8]>, len: usize| -> Result<String> {
            let mut raw = vec![0u8; len];
            cur.read_exact(&mut raw).map_err(|_| body("truncated"))?;
            String::from_utf8(raw).map_err(|_| body("string is not UTF-8"))
        };
        let cfg_len = read_u32(&mut cur)? as usize;
        let cfg_text = read_string(&mut cur, cfg_len)?;
        let config: TrainingConfig = toml::from_str(&cfg_text).map_err(|e| AidError::Parse {
            path: origin.to_owned(),
            reason: e.to_string(),
        })?;
        let mut lists: Vec<Vec<String>> = Vec::new();
        for _ in 0..2 {
            let n = read_u32(&mut cur)? as usize;
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                let len = cur.read_u16::<LittleEndian>().map_err(|_| body("truncated"))? as usize;
                list.push(read_string(&mut cur, len)?);
            }
            lists.push(list);
        }
        let labels = LabelIndex::from_labels(lists[0].iter().map(String::as_str), lists[1].iter().map(String::as_str));
        if labels.accents() != lists[0] || labels.speakers() != lists[1] {
            return Err(body("label lists are not sorted and unique"));
        }
        let input_dim = read_u32(&mut cur)? as usize;
        let mut hidden = [0usize; 3];
        for h in &mut hidden {
            *h = read_u32(&mut cur)? as usize;
        }
        let trained = cur.read_u8().map_err(|_| body("truncated"))? != 0;
        let shape = ModelShape {
            input_dim,
            hidden,
            n_accents: labels.n_accents(),
            n_speakers: labels.n_speakers(),
        };

        let mut read_tensor = |expected: usize| -> Result<Vec<f64>> {
            let n = read_u32(&mut cur)? as usize;
            if n != expected {
                return Err(body(&format!("tensor has {n} values, expected {expected}")));
            }
            let mut vals = vec![0f32; n];
            cur.read_f32_into::<LittleEndian>(&mut vals)
                .map_err(|_| body("truncated"))?;
            Ok(vals.into_iter().map(f64::from).collect())
        };
        let mut layers = Vec::new();
        let mut norms = Vec::new();
        let mut fan_in = input_dim;
        for &w in &hidden {
            let weight = Array2::from_shape_vec((fan_in, w), read_tensor(fan_in * w)?).expect("length checked");
            let bias = Array1::from(read_tensor(w)?);
            layers.push(Affine { weight, bias });
            let gamma = Array1::from(read_tensor(w)?);
            let beta = Array1::from(read_tensor(w)?);
            let running_mean = Array1::from(read_tensor(w)?);
            let running_var = Array1::from(read_tensor(w)?);
            if running_var.iter().any(|&v| v.is_nan() || v < 0.0) {
                return Err(body("negative running variance"));
            }
            norms.push(BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
            });
            fan_in = w;
        }
        let mut head = |classes: usize| -> Result<Affine> {
            Ok(Affine {
                weight: Array2::from_shape_vec((fan_in, classes), read_tensor(fan_in * classes)?)
                    .expect("length checked"),
                bias: Array1::from(read_tensor(classes)?),
            })
        };
        let accent_head = head(shape.n_accents)?;
        let speaker_head = head(shape.n_speakers)?;
        if (cur.position() as usize) != bytes.len() {
            return Err(body("trailing bytes"));
        }
        let model = AidModel {
            shape,
            layers,
            norms,
            accent_head,
            speaker_head,
            mode: Mode::Eval,
            batchnorm_momentum: config.batchnorm_momentum,
            version: 0,
            trained,
        };
        Ok(Checkpoint { model, labels, config })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| AidError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
