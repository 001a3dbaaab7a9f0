use ndarray::Array2;

use crate::corpus::FactorTable;
use crate::error::{AidError, Result};
use crate::numeric::quantize;
use crate::types::{FrameSequence, Provenance, Utterance};

/// Ground-truth conversion on a synthetic corpus.
///
/// Swaps the source speaker's latent contribution for the target's, keeping
/// the accent latent and the noise realization. Converting to the source's
/// own speaker returns the frames unchanged.
pub fn oracle_convert(
    source: &Utterance,
    target_speaker: &str,
    factors: Option<&FactorTable>,
    id: impl Into<String>,
) -> Result<Utterance> {
    let factors = factors.ok_or(AidError::MissingFactors)?;
    let frames = source
        .frames
        .as_ref()
        .ok_or_else(|| AidError::NoFrames(source.speaker.clone()))?;
    let h_target = factors.speaker(target_speaker)?;
    let converted = if target_speaker == source.speaker {
        frames.clone()
    } else {
        let g = factors.accent(&source.accent)?;
        let h_source = factors.speaker(&source.speaker)?;
        if g.len() != frames.dim() {
            return Err(AidError::DimensionMismatch {
                expected: frames.dim(),
                got: g.len(),
            });
        }
        let old = factors.speaker_part(h_source, g);
        let new = factors.speaker_part(h_target, g);
        let mut out = Array2::zeros((frames.len(), frames.dim()));
        for (t, mut row) in out.rows_mut().into_iter().enumerate() {
            for (((o, x), a), b) in row.iter_mut().zip(frames.row(t)).zip(&old).zip(&new) {
                *o = quantize(x - a + b);
            }
        }
        FrameSequence::new(out)?
    };
    let mut u = Utterance::with_frames(id, target_speaker, source.accent.clone(), converted);
    u.provenance = Provenance::Converted {
        source_id: source.id.clone(),
        target_speaker: target_speaker.to_owned(),
    };
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthConfig};
    use crate::metrics::{SpeakerCentroids, SpeakerSpace};

    fn corpus(noise: f64) -> crate::corpus::Corpus {
        generate_synthetic(&SynthConfig {
            n_accents: 3,
            speakers_per_accent: 3,
            utterances_per_speaker: 4,
            frame_dim: 12,
            noise_scale: noise,
            seed: 5,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn self_conversion_is_identity() {
        let c = corpus(0.0);
        let u = &c.utterances()[0];
        let out = oracle_convert(u, &u.speaker, c.factors.as_ref(), "x").unwrap();
        assert_eq!(out.frames, u.frames);
        assert_eq!(out.accent, u.accent);
        assert!(out.is_converted());
    }

    #[test]
    fn missing_factors_is_an_error() {
        let c = corpus(0.0);
        let u = &c.utterances()[0];
        assert!(matches!(
            oracle_convert(u, &u.speaker, None, "x"),
            Err(AidError::MissingFactors)
        ));
    }

    #[test]
    fn converted_is_closer_to_target_centroid() {
        let c = corpus(0.05);
        let centroids = SpeakerCentroids::from_corpus(&c, SpeakerSpace::AccentCentered).unwrap();
        let speakers = c.labels().speakers().to_vec();
        for u in c.utterances().iter().step_by(5) {
            for target in speakers.iter().filter(|s| **s != u.speaker) {
                let out = oracle_convert(u, target, c.factors.as_ref(), "x").unwrap();
                assert_eq!(out.accent, u.accent);
                assert_eq!(&out.speaker, target);
                let pooled = out.pooled().unwrap();
                let to_target = centroids.similarity(&pooled, &u.accent, target).unwrap();
                let to_source = centroids.similarity(&pooled, &u.accent, &u.speaker).unwrap();
                assert!(to_target > to_source, "{} -> {target}", u.id);
            }
        }
    }
}
