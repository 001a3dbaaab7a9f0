use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{AidError, Result};
use crate::numeric::{cosine_similarity, cosine_slices};
use crate::rng::substream;
use crate::types::EmbeddingVector;

/// Accent Embedding Cosine Similarity between two accent embeddings.
pub fn aecs(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    cosine_similarity(a, b)
}

/// Mean AECS over `n_pairs` seeded random pairs of distinct embeddings.
pub fn random_pair_aecs(embeddings: &[EmbeddingVector], n_pairs: usize, seed: u64) -> Result<MeanStd> {
    if embeddings.len() < 2 {
        return Err(AidError::Empty("need at least two embeddings for random pairs"));
    }
    let mut rng = substream(seed, "metrics/random-pairs");
    let mut values = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let i = rng.random_range(0..embeddings.len());
        let mut j = rng.random_range(0..embeddings.len() - 1);
        if j >= i {
            j += 1;
        }
        values.push(aecs(&embeddings[i], &embeddings[j])?);
    }
    MeanStd::of(&values)
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(AidError::Empty("no values to aggregate"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(MeanStd {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

/// Space in which speaker similarity is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeakerSpace {
    /// Pooled embeddings as they are.
    Raw,
    /// Pooled embeddings minus the mean of their accent, so the shared
    /// accent direction does not dominate the cosine.
    #[default]
    AccentCentered,
}

/// Per-speaker centroids of pooled original utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerCentroids {
    pub space: SpeakerSpace,
    accent_means: BTreeMap<String, Vec<f64>>,
    centroids: BTreeMap<String, Vec<f64>>,
}

fn mean_of(rows: &[&[f64]]) -> Vec<f64> {
    let d = rows[0].len();
    let mut out = vec![0.0; d];
    for row in rows {
        for (o, v) in out.iter_mut().zip(row.iter()) {
            *o += v;
        }
    }
    let n = rows.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

impl SpeakerCentroids {
    /// Centroids over every original (unconverted) utterance of `corpus`.
    pub fn from_corpus(corpus: &Corpus, space: SpeakerSpace) -> Result<Self> {
        let mut pooled: Vec<(String, String, Vec<f64>)> = Vec::new();
        for u in corpus.utterances().iter().filter(|u| !u.is_converted()) {
            pooled.push((u.speaker.clone(), u.accent.clone(), u.pooled()?.into_inner()));
        }
        if pooled.is_empty() {
            return Err(AidError::Empty("corpus has no original utterances"));
        }
        let mut by_accent: BTreeMap<&str, Vec<&[f64]>> = BTreeMap::new();
        let mut by_speaker: BTreeMap<&str, Vec<&[f64]>> = BTreeMap::new();
        for (spk, acc, v) in &pooled {
            by_accent.entry(acc).or_default().push(v);
            by_speaker.entry(spk).or_default().push(v);
        }
        let accent_means: BTreeMap<String, Vec<f64>> = by_accent
            .into_iter()
            .map(|(a, rows)| (a.to_owned(), mean_of(&rows)))
            .collect();
        let speaker_accent = corpus.speaker_accents();
        let mut centroids = BTreeMap::new();
        for (spk, rows) in by_speaker {
            let mut c = mean_of(&rows);
            if space == SpeakerSpace::AccentCentered {
                let m = &accent_means[&speaker_accent[spk]];
                c.iter_mut().zip(m).for_each(|(x, mu)| *x -= mu);
            }
            centroids.insert(spk.to_owned(), c);
        }
        Ok(SpeakerCentroids {
            space,
            accent_means,
            centroids,
        })
    }

    /// Map a pooled embedding carrying accent label `accent` into centroid space.
    pub fn project(&self, pooled: &EmbeddingVector, accent: &str) -> Result<Vec<f64>> {
        let mut v = pooled.values().to_vec();
        if self.space == SpeakerSpace::AccentCentered {
            let m = self
                .accent_means
                .get(accent)
                .ok_or_else(|| AidError::Config(format!("no centroid for accent `{accent}`")))?;
            v.iter_mut().zip(m).for_each(|(x, mu)| *x -= mu);
        }
        Ok(v)
    }

    pub fn centroid(&self, speaker: &str) -> Result<&[f64]> {
        self.centroids
            .get(speaker)
            .map(Vec::as_slice)
            .ok_or_else(|| AidError::UnknownSpeaker(speaker.to_owned()))
    }

    /// Cosine similarity between a pooled embedding and a speaker's centroid.
    pub fn similarity(&self, pooled: &EmbeddingVector, accent: &str, speaker: &str) -> Result<f64> {
        cosine_slices(&self.project(pooled, accent)?, self.centroid(speaker)?)
    }
}

/// One converted utterance as seen by the similarity statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvertedSample {
    pub source_speaker: String,
    pub target_speaker: String,
    pub accent: String,
    pub pooled: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityStats {
    pub source: MeanStd,
    pub target: MeanStd,
    /// (similarity to source, similarity to target) per conversion.
    pub per_conversion: Vec<(f64, f64)>,
}

pub fn speaker_similarity_stats(
    conversions: &[ConvertedSample],
    centroids: &SpeakerCentroids,
) -> Result<SimilarityStats> {
    let per_conversion = conversions
        .iter()
        .map(|c| {
            Ok((
                centroids.similarity(&c.pooled, &c.accent, &c.source_speaker)?,
                centroids.similarity(&c.pooled, &c.accent, &c.target_speaker)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let src: Vec<f64> = per_conversion.iter().map(|p| p.0).collect();
    let tgt: Vec<f64> = per_conversion.iter().map(|p| p.1).collect();
    Ok(SimilarityStats {
        source: MeanStd::of(&src)?,
        target: MeanStd::of(&tgt)?,
        per_conversion,
    })
}
