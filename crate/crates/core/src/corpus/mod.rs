//! Utterance collections: synthetic generation, on-disk format, splitting.

mod split;
mod store;
mod synth;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{AidError, Result};
use crate::types::{EmbeddingVector, LabelIndex, Provenance, Utterance};

pub use split::{split_speaker_disjoint, SplitSpec};
pub use store::{
    encode_corpus, ingest, read_corpus_dir, read_feature_store, write_corpus_dir, write_feature_store, write_manifest,
    FeatureRecord, MANIFEST_FILE, STORE_FILE, STORE_MAGIC, STORE_VERSION,
};
pub use synth::{generate_synthetic, EmbeddingVariant, SynthConfig, LID_SPEAKER_KEEP};

/// Latent generator vectors of a synthetic corpus.
///
/// Every frame was produced as `alpha * g[accent] + speaker_part(h[speaker], g[accent]) + noise`,
/// which lets the oracle converter swap the speaker part while keeping the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    pub variant: EmbeddingVariant,
    pub accent_scale: f64,
    pub speaker_scale: f64,
    pub entanglement: f64,
    pub noise_scale: f64,
    pub accents: BTreeMap<String, Vec<f64>>,
    pub speakers: BTreeMap<String, Vec<f64>>,
}

impl FactorTable {
    /// Speaker-dependent part of a clean frame.
    pub fn speaker_part(&self, h: &[f64], g: &[f64]) -> Vec<f64> {
        let raw: Vec<f64> = h
            .iter()
            .zip(g)
            .map(|(hi, gi)| self.speaker_scale * hi + self.entanglement * hi * gi)
            .collect();
        match self.variant {
            EmbeddingVariant::Raw => raw,
            EmbeddingVariant::LidLike => raw.into_iter().map(|v| LID_SPEAKER_KEEP * v).collect(),
            EmbeddingVariant::Wnta64Like => {
                let hh: f64 = h.iter().map(|v| v * v).sum();
                if hh == 0.0 {
                    return raw;
                }
                let along = raw.iter().zip(h).map(|(r, hi)| r * hi).sum::<f64>() / hh;
                raw.iter().zip(h).map(|(r, hi)| r - along * hi).collect()
            }
        }
    }

    pub fn accent(&self, label: &str) -> Result<&[f64]> {
        self.accents
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| AidError::Config(format!("no latent vector for accent `{label}`")))
    }

    pub fn speaker(&self, label: &str) -> Result<&[f64]> {
        self.speakers
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| AidError::UnknownSpeaker(label.to_owned()))
    }
}

/// A validated set of utterances, kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    utterances: Vec<Utterance>,
    label_index: LabelIndex,
    pub factors: Option<FactorTable>,
}

impl Corpus {
    pub fn new(mut utterances: Vec<Utterance>, factors: Option<FactorTable>) -> Result<Self> {
        utterances.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in utterances.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(AidError::DuplicateId(pair[0].id.clone()));
            }
        }
        let mut dim = None;
        for u in &utterances {
            if u.frames.is_none() && u.embedding.is_none() {
                return Err(AidError::Empty("utterance has neither frames nor embedding"));
            }
            if let (Some(f), Some(e)) = (&u.frames, &u.embedding) {
                if f.dim() != e.dim() {
                    return Err(AidError::DimensionMismatch {
                        expected: f.dim(),
                        got: e.dim(),
                    });
                }
            }
            let d = u.dim().expect("checked above");
            match dim {
                None => dim = Some(d),
                Some(expected) if expected != d => return Err(AidError::DimensionMismatch { expected, got: d }),
                _ => {}
            }
        }
        let label_index = LabelIndex::from_utterances(&utterances);
        Ok(Corpus {
            utterances,
            label_index,
            factors,
        })
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn labels(&self) -> &LabelIndex {
        &self.label_index
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Feature dimension, or `None` for an empty corpus.
    pub fn dim(&self) -> Option<usize> {
        self.utterances.first().and_then(Utterance::dim)
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances
            .binary_search_by(|u| u.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.utterances[i])
    }

    pub fn by_speaker<'a>(&'a self, speaker: &'a str) -> impl Iterator<Item = &'a Utterance> + 'a {
        self.utterances.iter().filter(move |u| u.speaker == speaker)
    }

    /// Accent of each speaker, taken from original utterances by majority
    /// (ties go to the lexicographically smallest accent).
    pub fn speaker_accents(&self) -> BTreeMap<String, String> {
        let mut tally: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
        for u in self.utterances.iter().filter(|u| !u.is_converted()) {
            *tally.entry(&u.speaker).or_default().entry(&u.accent).or_default() += 1;
        }
        tally
            .into_iter()
            .map(|(spk, accents)| {
                let mut best: Option<(&str, usize)> = None;
                for (a, n) in accents {
                    if best.is_none_or(|(_, m)| n > m) {
                        best = Some((a, n));
                    }
                }
                (spk.to_owned(), best.expect("nonempty").0.to_owned())
            })
            .collect()
    }

    /// Pooled embeddings for the given ids, in the given order.
    pub fn pooled<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Vec<EmbeddingVector>> {
        ids.into_iter()
            .map(|id| {
                self.get(id)
                    .ok_or_else(|| AidError::DanglingReference { id: id.to_owned() })?
                    .pooled()
            })
            .collect()
    }

    /// Corpus with extra utterances appended.
    pub fn extended(&self, extra: Vec<Utterance>) -> Result<Corpus> {
        let mut all = self.utterances.clone();
        all.extend(extra);
        Corpus::new(all, self.factors.clone())
    }

    pub fn converted(&self) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(|u| u.is_converted())
    }

    pub fn provenance_of(&self, id: &str) -> Option<&Provenance> {
        self.get(id).map(|u| &u.provenance)
    }
}

/// Per-split utterance tally for one label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitTally {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub unassigned: usize,
}

impl SplitTally {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test + self.unassigned
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub accents: BTreeMap<String, SplitTally>,
    pub speakers: BTreeMap<String, SplitTally>,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.accents.values().map(SplitTally::total).sum()
    }
}

pub fn class_counts(corpus: &Corpus, split: &SplitSpec) -> ClassCounts {
    let mut counts = ClassCounts::default();
    for u in corpus.utterances() {
        let bump = |t: &mut SplitTally| {
            if split.train.contains(&u.id) {
                t.train += 1;
            } else if split.val.contains(&u.id) {
                t.val += 1;
            } else if split.test.contains(&u.id) {
                t.test += 1;
            } else {
                t.unassigned += 1;
            }
        };
        bump(counts.accents.entry(u.accent.clone()).or_default());
        bump(counts.speakers.entry(u.speaker.clone()).or_default());
    }
    counts
}

/// Distinct speakers among a set of utterance ids.
pub fn speakers_of(corpus: &Corpus, ids: &BTreeSet<String>) -> BTreeSet<String> {
    ids.iter()
        .filter_map(|id| corpus.get(id))
        .map(|u| u.speaker.clone())
        .collect()
}
