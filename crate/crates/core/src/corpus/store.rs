//! Manifest + binary feature store.
//!
//! Manifest: UTF-8 TSV, header line starting with `#`, columns
//! `id speaker accent store_offset n_frames [source_id target_speaker]`.
//! The provenance columns are `-` for original utterances.
//!
//! Feature store (little-endian): `AIDF`, version u32, dim u32, count u64,
//! then per record: id length u16, id bytes, T u32, T×D f32 row-major.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Corpus, EmbeddingVariant, FactorTable};
use crate::error::{AidError, Result};
use crate::io::atomic_write;
use crate::types::{FrameSequence, Provenance, Utterance};

pub const STORE_MAGIC: &[u8; 4] = b"AIDF";
pub const STORE_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const STORE_FILE: &str = "features.aidf";
const FACTOR_STORE_FILE: &str = "factors.aidf";
const FACTOR_META_FILE: &str = "factors.toml";
const MANIFEST_HEADER: &str = "#id\tspeaker\taccent\tstore_offset\tn_frames\tsource_id\ttarget_speaker";

/// One decoded store record.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub offset: u64,
    pub frames: Array2<f64>,
}

/// Encode records; returns the bytes and each record's byte offset.
pub fn write_feature_store(dim: usize, records: &[(&str, &FrameSequence)]) -> Result<(Vec<u8>, Vec<u64>)> {
    let mut buf = Vec::new();
    buf.extend_from_slice(STORE_MAGIC);
    buf.write_u32::<LittleEndian>(STORE_VERSION).unwrap();
    buf.write_u32::<LittleEndian>(dim as u32).unwrap();
    buf.write_u64::<LittleEndian>(records.len() as u64).unwrap();
    let mut offsets = Vec::with_capacity(records.len());
    for (id, frames) in records {
        if frames.dim() != dim {
            return Err(AidError::DimensionMismatch {
                expected: dim,
                got: frames.dim(),
            });
        }
        let id_len = u16::try_from(id.len()).map_err(|_| AidError::Config(format!("utterance id too long: {id}")))?;
        offsets.push(buf.len() as u64);
        buf.write_u16::<LittleEndian>(id_len).unwrap();
        buf.extend_from_slice(id.as_bytes());
        buf.write_u32::<LittleEndian>(frames.len() as u32).unwrap();
        for v in frames.as_slice() {
            buf.write_f32::<LittleEndian>(*v as f32).unwrap();
        }
    }
    Ok((buf, offsets))
}

/// Decode a feature store; returns its dimension and records in file order.
pub fn read_feature_store(path: &Path) -> Result<(usize, Vec<FeatureRecord>)> {
    let bytes = fs::read(path).map_err(|e| AidError::io(path, e))?;
    let header = |reason: &str| AidError::MalformedHeader {
        path: path.to_owned(),
        reason: reason.to_owned(),
    };
    let record_err = |reason: String| AidError::MalformedRecord {
        path: path.to_owned(),
        reason,
    };
    let mut cur = Cursor::new(&bytes[..]);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(|_| header("truncated"))?;
    if &magic != STORE_MAGIC {
        return Err(header("bad magic"));
    }
    let version = cur.read_u32::<LittleEndian>().map_err(|_| header("truncated"))?;
    if version != STORE_VERSION {
        return Err(header(&format!("unsupported version {version}")));
    }
    let dim = cur.read_u32::<LittleEndian>().map_err(|_| header("truncated"))? as usize;
    if dim == 0 {
        return Err(header("dimension is zero"));
    }
    let count = cur.read_u64::<LittleEndian>().map_err(|_| header("truncated"))?;
    let mut records = Vec::new();
    for i in 0..count {
        let offset = cur.position();
        let truncated = |_| record_err(format!("record {i} truncated"));
        let id_len = cur.read_u16::<LittleEndian>().map_err(truncated)? as usize;
        let mut id = vec![0u8; id_len];
        cur.read_exact(&mut id).map_err(truncated)?;
        let id = String::from_utf8(id).map_err(|_| record_err(format!("record {i} id is not UTF-8")))?;
        let t = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        if t == 0 {
            return Err(record_err(format!("record `{id}` has no frames")));
        }
        let mut values = vec![0f32; t * dim];
        cur.read_f32_into::<LittleEndian>(&mut values).map_err(truncated)?;
        let frames = Array2::from_shape_vec((t, dim), values.into_iter().map(f64::from).collect())
            .expect("shape matches length");
        records.push(FeatureRecord { id, offset, frames });
    }
    if (cur.position() as usize) != bytes.len() {
        return Err(record_err("trailing bytes after last record".into()));
    }
    Ok((dim, records))
}

/// Render a manifest for utterances whose store offsets are known.
pub fn write_manifest(utterances: &[&Utterance], offsets: &[u64]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for (u, off) in utterances.iter().zip(offsets) {
        let n = u.frames.as_ref().map_or(1, FrameSequence::len);
        let (src, tgt) = match &u.provenance {
            Provenance::Original => ("-", "-"),
            Provenance::Converted {
                source_id,
                target_speaker,
            } => (source_id.as_str(), target_speaker.as_str()),
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            u.id, u.speaker, u.accent, off, n, src, tgt
        ));
    }
    out
}

struct ManifestRow {
    id: String,
    speaker: String,
    accent: String,
    offset: u64,
    n_frames: usize,
    provenance: Provenance,
}

fn parse_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = fs::read_to_string(path).map_err(|e| AidError::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with('#') => {}
        _ => {
            return Err(AidError::MalformedHeader {
                path: path.to_owned(),
                reason: "first line must be a `#` header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| AidError::MalformedRecord {
            path: path.to_owned(),
            reason: format!("line {}: {reason}", lineno + 2),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 && fields.len() != 7 {
            return Err(bad("expected 5 or 7 tab-separated fields"));
        }
        let offset = fields[3].parse().map_err(|_| bad("store_offset is not an integer"))?;
        let n_frames = fields[4].parse().map_err(|_| bad("n_frames is not an integer"))?;
        let provenance = match fields.get(5..7) {
            Some(["-", "-"]) | None => Provenance::Original,
            Some([src, tgt]) => Provenance::Converted {
                source_id: (*src).to_owned(),
                target_speaker: (*tgt).to_owned(),
            },
            Some(_) => unreachable!(),
        };
        rows.push(ManifestRow {
            id: fields[0].to_owned(),
            speaker: fields[1].to_owned(),
            accent: fields[2].to_owned(),
            offset,
            n_frames,
            provenance,
        });
    }
    Ok(rows)
}

/// Load a corpus from a manifest and its feature store.
pub fn ingest(manifest_path: &Path, store_path: &Path) -> Result<Corpus> {
    let rows = parse_manifest(manifest_path)?;
    let (_, records) = read_feature_store(store_path)?;
    let by_offset: BTreeMap<u64, &FeatureRecord> = records.iter().map(|r| (r.offset, r)).collect();
    let mut utterances = Vec::with_capacity(rows.len());
    for row in rows {
        let record = match by_offset.get(&row.offset) {
            Some(r) if r.id == row.id => *r,
            _ if records.iter().any(|r| r.id == row.id) => {
                return Err(AidError::MalformedRecord {
                    path: manifest_path.to_owned(),
                    reason: format!("store_offset {} does not point at `{}`", row.offset, row.id),
                })
            }
            _ => return Err(AidError::DanglingReference { id: row.id }),
        };
        if record.frames.nrows() != row.n_frames {
            return Err(AidError::MalformedRecord {
                path: manifest_path.to_owned(),
                reason: format!(
                    "`{}` declares {} frames, store has {}",
                    row.id,
                    row.n_frames,
                    record.frames.nrows()
                ),
            });
        }
        let mut u = Utterance::with_frames(
            row.id,
            row.speaker,
            row.accent,
            FrameSequence::new(record.frames.clone())?,
        );
        u.provenance = row.provenance;
        utterances.push(u);
    }
    Corpus::new(utterances, None)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorMeta {
    variant: EmbeddingVariant,
    accent_scale: f64,
    speaker_scale: f64,
    entanglement: f64,
    noise_scale: f64,
}

fn frames_of(u: &Utterance) -> Result<FrameSequence> {
    match (&u.frames, &u.embedding) {
        (Some(f), _) => Ok(f.clone()),
        (None, Some(e)) => FrameSequence::from_rows(&[e.values().to_vec()]),
        (None, None) => Err(AidError::Empty("utterance has neither frames nor embedding")),
    }
}

/// In-memory manifest text and feature-store bytes for `corpus`.
pub fn encode_corpus(corpus: &Corpus) -> Result<(String, Vec<u8>)> {
    let dim = corpus.dim().ok_or(AidError::Empty("corpus"))?;
    let frames: Vec<FrameSequence> = corpus.utterances().iter().map(frames_of).collect::<Result<_>>()?;
    let records: Vec<(&str, &FrameSequence)> = corpus
        .utterances()
        .iter()
        .zip(&frames)
        .map(|(u, f)| (u.id.as_str(), f))
        .collect();
    let (bytes, offsets) = write_feature_store(dim, &records)?;
    let utts: Vec<&Utterance> = corpus.utterances().iter().collect();
    Ok((write_manifest(&utts, &offsets), bytes))
}

/// Write `manifest.tsv` + `features.aidf` (and the factor table, if any) into `dir`.
///
/// Embedding-only utterances are stored as single-frame records.
pub fn write_corpus_dir(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| AidError::io(dir, e))?;
    let dim = corpus.dim().ok_or(AidError::Empty("corpus"))?;
    let (manifest, bytes) = encode_corpus(corpus)?;
    atomic_write(&dir.join(STORE_FILE), &bytes)?;
    atomic_write(&dir.join(MANIFEST_FILE), manifest.as_bytes())?;

    if let Some(f) = &corpus.factors {
        let mut latents = Vec::new();
        for (label, g) in &f.accents {
            latents.push((
                format!("accent:{label}"),
                FrameSequence::from_rows(std::slice::from_ref(g))?,
            ));
        }
        for (label, h) in &f.speakers {
            latents.push((
                format!("speaker:{label}"),
                FrameSequence::from_rows(std::slice::from_ref(h))?,
            ));
        }
        let refs: Vec<(&str, &FrameSequence)> = latents.iter().map(|(k, v)| (k.as_str(), v)).collect();
        let (bytes, _) = write_feature_store(dim, &refs)?;
        atomic_write(&dir.join(FACTOR_STORE_FILE), &bytes)?;
        let meta = FactorMeta {
            variant: f.variant,
            accent_scale: f.accent_scale,
            speaker_scale: f.speaker_scale,
            entanglement: f.entanglement,
            noise_scale: f.noise_scale,
        };
        let text = toml::to_string(&meta).map_err(|e| AidError::Config(e.to_string()))?;
        atomic_write(&dir.join(FACTOR_META_FILE), text.as_bytes())?;
    }
    Ok(())
}

/// Inverse of [`write_corpus_dir`].
pub fn read_corpus_dir(dir: &Path) -> Result<Corpus> {
    let corpus = ingest(&dir.join(MANIFEST_FILE), &dir.join(STORE_FILE))?;
    let meta_path: PathBuf = dir.join(FACTOR_META_FILE);
    if !meta_path.exists() {
        return Ok(corpus);
    }
    let text = fs::read_to_string(&meta_path).map_err(|e| AidError::io(&meta_path, e))?;
    let meta: FactorMeta = toml::from_str(&text).map_err(|e| AidError::Parse {
        path: meta_path.clone(),
        reason: e.to_string(),
    })?;
    let store_path = dir.join(FACTOR_STORE_FILE);
    let (dim, records) = read_feature_store(&store_path)?;
    if Some(dim) != corpus.dim() {
        return Err(AidError::DimensionMismatch {
            expected: corpus.dim().unwrap_or(0),
            got: dim,
        });
    }
    let mut accents = BTreeMap::new();
    let mut speakers = BTreeMap::new();
    for r in records {
        let v = r.frames.row(0).to_vec();
        if let Some(label) = r.id.strip_prefix("accent:") {
            accents.insert(label.to_owned(), v);
        } else if let Some(label) = r.id.strip_prefix("speaker:") {
            speakers.insert(label.to_owned(), v);
        } else {
            return Err(AidError::MalformedRecord {
                path: store_path,
                reason: format!("unexpected factor record `{}`", r.id),
            });
        }
    }
    let factors = FactorTable {
        variant: meta.variant,
        accent_scale: meta.accent_scale,
        speaker_scale: meta.speaker_scale,
        entanglement: meta.entanglement,
        noise_scale: meta.noise_scale,
        accents,
        speakers,
    };
    Corpus::new(corpus.utterances().to_vec(), Some(factors))
}
