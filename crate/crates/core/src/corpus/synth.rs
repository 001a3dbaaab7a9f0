use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Corpus, FactorTable};
use crate::error::{AidError, Result};
use crate::numeric::quantize;
use crate::rng::{item_stream, substream};
use crate::types::{FrameSequence, Utterance};

/// Fraction of the speaker part kept by the LID-like variant.
pub const LID_SPEAKER_KEEP: f64 = 0.5;

/// Which synthetic "embedding extractor" the corpus imitates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingVariant {
    /// Generator output as is.
    #[default]
    Raw,
    /// Accent kept, speaker part attenuated.
    LidLike,
    /// Speaker part with the speaker's own latent direction projected out.
    #[serde(rename = "wnta64-like")]
    Wnta64Like,
}

impl EmbeddingVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            EmbeddingVariant::Raw => "raw",
            EmbeddingVariant::LidLike => "lid-like",
            EmbeddingVariant::Wnta64Like => "wnta64-like",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "raw" => Some(EmbeddingVariant::Raw),
            "lid-like" => Some(EmbeddingVariant::LidLike),
            "wnta64-like" => Some(EmbeddingVariant::Wnta64Like),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_accents: usize,
    pub speakers_per_accent: usize,
    pub utterances_per_speaker: usize,
    pub frame_dim: usize,
    pub frames_min: usize,
    pub frames_max: usize,
    pub accent_scale: f64,
    pub speaker_scale: f64,
    pub noise_scale: f64,
    pub entanglement: f64,
    pub variant: EmbeddingVariant,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_accents: 13,
            speakers_per_accent: 6,
            utterances_per_speaker: 20,
            frame_dim: 32,
            frames_min: 8,
            frames_max: 24,
            accent_scale: 1.0,
            speaker_scale: 1.0,
            noise_scale: 0.3,
            entanglement: 0.0,
            variant: EmbeddingVariant::Raw,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_accents", self.n_accents),
            ("speakers_per_accent", self.speakers_per_accent),
            ("utterances_per_speaker", self.utterances_per_speaker),
            ("frame_dim", self.frame_dim),
            ("frames_min", self.frames_min),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(AidError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.frames_max < self.frames_min {
            return Err(AidError::Config("frames_max < frames_min".into()));
        }
        for (name, v) in [
            ("accent_scale", self.accent_scale),
            ("speaker_scale", self.speaker_scale),
            ("noise_scale", self.noise_scale),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(AidError::Config(format!("{name} must be finite and >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.entanglement) {
            return Err(AidError::Config("entanglement must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

pub(crate) fn accent_label(a: usize) -> String {
    format!("acc{a:02}")
}

pub(crate) fn speaker_label(a: usize, s: usize) -> String {
    format!("acc{a:02}-spk{s:02}")
}

fn normal_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| quantize(rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// Build a corpus from the latent-factor generator.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let d = cfg.frame_dim;
    let mut factor_rng = substream(cfg.seed, "corpus/factors");
    let mut accents = BTreeMap::new();
    for a in 0..cfg.n_accents {
        accents.insert(accent_label(a), normal_vector(&mut factor_rng, d));
    }
    let mut speakers = BTreeMap::new();
    for a in 0..cfg.n_accents {
        for s in 0..cfg.speakers_per_accent {
            speakers.insert(speaker_label(a, s), normal_vector(&mut factor_rng, d));
        }
    }
    let factors = FactorTable {
        variant: cfg.variant,
        accent_scale: cfg.accent_scale,
        speaker_scale: cfg.speaker_scale,
        entanglement: cfg.entanglement,
        noise_scale: cfg.noise_scale,
        accents,
        speakers,
    };

    let jobs: Vec<(usize, usize, usize)> = (0..cfg.n_accents)
        .flat_map(|a| {
            (0..cfg.speakers_per_accent).flat_map(move |s| (0..cfg.utterances_per_speaker).map(move |u| (a, s, u)))
        })
        .collect();
    let utterances = jobs
        .par_iter()
        .map(|&(a, s, u)| {
            let accent = accent_label(a);
            let speaker = speaker_label(a, s);
            let id = format!("{speaker}-utt{u:03}");
            let g = &factors.accents[&accent];
            let h = &factors.speakers[&speaker];
            let clean: Vec<f64> = factors
                .speaker_part(h, g)
                .iter()
                .zip(g)
                .map(|(sp, gi)| cfg.accent_scale * gi + sp)
                .collect();
            let mut rng = item_stream(cfg.seed, "corpus/utterance", &id);
            let t = rng.random_range(cfg.frames_min..=cfg.frames_max);
            let mut frames = Array2::zeros((t, d));
            for mut row in frames.rows_mut() {
                for (x, c) in row.iter_mut().zip(&clean) {
                    let eps: f64 = rng.sample(StandardNormal);
                    *x = quantize(c + cfg.noise_scale * eps);
                }
            }
            Ok(Utterance::with_frames(id, speaker, accent, FrameSequence::new(frames)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(utterances, Some(factors))
}
