//! Domain values shared by every pipeline stage.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{AidError, Result};

/// Utterance-level feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(AidError::Empty("embedding"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AidError::NonFinite("embedding"));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.0[..])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// T×D matrix of per-frame features.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Array2<f64>,
    pub frame_rate_hint: Option<f64>,
}

impl FrameSequence {
    pub fn new(frames: Array2<f64>) -> Result<Self> {
        if frames.nrows() == 0 {
            return Err(AidError::Empty("frame sequence"));
        }
        if frames.ncols() == 0 {
            return Err(AidError::Empty("frame dimension"));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(AidError::NonFinite("frame sequence"));
        }
        Ok(FrameSequence {
            frames: frames.as_standard_layout().into_owned(),
            frame_rate_hint: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(AidError::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let frames = Array2::from_shape_vec((rows.len(), d), flat).map_err(|_| AidError::Empty("frame sequence"))?;
        Self::new(frames)
    }

    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.frames.view()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let d = self.dim();
        &self.as_slice()[t * d..(t + 1) * d]
    }

    /// Row-major contiguous storage.
    pub fn as_slice(&self) -> &[f64] {
        self.frames.as_slice().expect("frames are kept in standard layout")
    }
}

/// Where an utterance came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Original,
    Converted { source_id: String, target_speaker: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub speaker: String,
    pub accent: String,
    pub frames: Option<FrameSequence>,
    pub embedding: Option<EmbeddingVector>,
    pub provenance: Provenance,
}

impl Utterance {
    pub fn with_frames(
        id: impl Into<String>,
        speaker: impl Into<String>,
        accent: impl Into<String>,
        frames: FrameSequence,
    ) -> Self {
        Utterance {
            id: id.into(),
            speaker: speaker.into(),
            accent: accent.into(),
            frames: Some(frames),
            embedding: None,
            provenance: Provenance::Original,
        }
    }

    pub fn with_embedding(
        id: impl Into<String>,
        speaker: impl Into<String>,
        accent: impl Into<String>,
        embedding: EmbeddingVector,
    ) -> Self {
        Utterance {
            id: id.into(),
            speaker: speaker.into(),
            accent: accent.into(),
            frames: None,
            embedding: Some(embedding),
            provenance: Provenance::Original,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.embedding
            .as_ref()
            .map(EmbeddingVector::dim)
            .or_else(|| self.frames.as_ref().map(FrameSequence::dim))
    }

    /// Utterance-level vector: the stored embedding, else the mean-pooled frames.
    pub fn pooled(&self) -> Result<EmbeddingVector> {
        match (&self.embedding, &self.frames) {
            (Some(e), _) => Ok(e.clone()),
            (None, Some(f)) => crate::numeric::mean_pool(f),
            (None, None) => Err(AidError::Empty("utterance has neither frames nor embedding")),
        }
    }

    pub fn is_converted(&self) -> bool {
        matches!(self.provenance, Provenance::Converted { .. })
    }
}

/// Deterministic class-id assignment for accents and speakers.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelIndex {
    accents: Vec<String>,
    speakers: Vec<String>,
}

impl LabelIndex {
    pub fn from_labels<'a>(
        accents: impl IntoIterator<Item = &'a str>,
        speakers: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        let accents: BTreeSet<&str> = accents.into_iter().collect();
        let speakers: BTreeSet<&str> = speakers.into_iter().collect();
        LabelIndex {
            accents: accents.into_iter().map(str::to_owned).collect(),
            speakers: speakers.into_iter().map(str::to_owned).collect(),
        }
    }

    pub fn from_utterances(utterances: &[Utterance]) -> Self {
        Self::from_labels(
            utterances.iter().map(|u| u.accent.as_str()),
            utterances.iter().map(|u| u.speaker.as_str()),
        )
    }

    pub fn accents(&self) -> &[String] {
        &self.accents
    }

    pub fn speakers(&self) -> &[String] {
        &self.speakers
    }

    pub fn n_accents(&self) -> usize {
        self.accents.len()
    }

    pub fn n_speakers(&self) -> usize {
        self.speakers.len()
    }

    pub fn accent_id(&self, label: &str) -> Option<usize> {
        self.accents.binary_search_by(|a| a.as_str().cmp(label)).ok()
    }

    pub fn speaker_id(&self, label: &str) -> Option<usize> {
        self.speakers.binary_search_by(|s| s.as_str().cmp(label)).ok()
    }
}
