//! Speaker augmentation by feature-space conversion.
//!
//! Two converters share one interface: kNN frame matching against a target
//! speaker's frame pool, and an oracle that swaps the latent speaker factor
//! of a synthetic corpus. [`augment_corpus`] adds converted copies of the
//! train split; [`analyze_vc`] measures how conversion moves speaker and
//! accent similarity.

mod analysis;
mod knn;
mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use analysis::{analyze_vc, render_vc_table, AccentVcRow, VcAnalysisReport};
pub use knn::{build_matching_set, frame_distance, frame_norm, knn_convert, Distance, MatchingSet};
pub use oracle::oracle_convert;

use crate::corpus::{speakers_of, Corpus, SplitSpec};
use crate::error::{AidError, Result};
use crate::numeric::quantize;
use crate::rng::item_stream;
use crate::types::{Provenance, Utterance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VcConfig {
    pub k: usize,
    pub distance: Distance,
    /// Converted copies added per original train utterance.
    pub versions_per_utterance: usize,
    /// Random targets per source utterance in the analysis.
    pub targets_per_source_analysis: usize,
    /// Augmentation targets; `None` means the train speakers.
    pub target_pool: Option<BTreeSet<String>>,
    /// Whether the copies of one utterance go to distinct targets.
    pub distinct_targets: bool,
    pub seed: u64,
}

impl Default for VcConfig {
    fn default() -> Self {
        VcConfig {
            k: 4,
            distance: Distance::Cosine,
            versions_per_utterance: 2,
            targets_per_source_analysis: 4,
            target_pool: None,
            distinct_targets: true,
            seed: 0,
        }
    }
}

impl VcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(AidError::Config("k must be at least 1".into()));
        }
        if self.targets_per_source_analysis == 0 {
            return Err(AidError::Config(
                "targets_per_source_analysis must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Conversion engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Relabels the speaker and keeps the frames; a no-op reference point.
    Identity,
    Knn,
    Oracle,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Identity => "identity",
            Engine::Knn => "knn",
            Engine::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Engine::Identity),
            "knn" => Some(Engine::Knn),
            "oracle" => Some(Engine::Oracle),
            _ => None,
        }
    }

    /// Fails early when the engine cannot run on `corpus`.
    pub fn check_applicable(&self, corpus: &Corpus) -> Result<()> {
        if *self == Engine::Oracle && corpus.factors.is_none() {
            return Err(AidError::MissingFactors);
        }
        Ok(())
    }
}

/// Converter with matching sets built up front for every speaker it may target.
pub(crate) struct Converter<'a> {
    corpus: &'a Corpus,
    engine: Engine,
    cfg: &'a VcConfig,
    sets: BTreeMap<String, MatchingSet>,
}

impl<'a> Converter<'a> {
    pub(crate) fn new(
        corpus: &'a Corpus,
        engine: Engine,
        cfg: &'a VcConfig,
        targets: &BTreeSet<String>,
    ) -> Result<Self> {
        engine.check_applicable(corpus)?;
        let sets = if engine == Engine::Knn {
            targets
                .par_iter()
                .map(|s| Ok((s.clone(), build_matching_set(corpus, s)?)))
                .collect::<Result<BTreeMap<_, _>>>()?
        } else {
            BTreeMap::new()
        };
        Ok(Converter {
            corpus,
            engine,
            cfg,
            sets,
        })
    }

    pub(crate) fn convert(&self, source: &Utterance, target: &str, id: String) -> Result<Utterance> {
        match self.engine {
            Engine::Oracle => oracle_convert(source, target, self.corpus.factors.as_ref(), id),
            Engine::Identity | Engine::Knn => {
                let frames = source
                    .frames
                    .as_ref()
                    .ok_or_else(|| AidError::NoFrames(source.speaker.clone()))?;
                let frames = if self.engine == Engine::Knn {
                    let set = self
                        .sets
                        .get(target)
                        .ok_or_else(|| AidError::UnknownSpeaker(target.to_owned()))?;
                    let out = knn_convert(frames, set, self.cfg)?;
                    let q: Array2<f64> = out.view().mapv(quantize);
                    crate::types::FrameSequence::new(q)?
                } else {
                    frames.clone()
                };
                let mut u = Utterance::with_frames(id, target, source.accent.clone(), frames);
                u.provenance = Provenance::Converted {
                    source_id: source.id.clone(),
                    target_speaker: target.to_owned(),
                };
                Ok(u)
            }
        }
    }
}

/// Draw `n` targets for one source from `candidates` (already excluding the source speaker).
pub(crate) fn draw_targets<'c>(
    rng: &mut impl Rng,
    candidates: &'c [String],
    n: usize,
    distinct: bool,
) -> Result<Vec<&'c String>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if candidates.is_empty() || (distinct && candidates.len() < n) {
        return Err(AidError::Config(format!(
            "target pool offers {} speakers, {n} {} targets needed",
            candidates.len(),
            if distinct { "distinct" } else { "" }
        )));
    }
    Ok(if distinct {
        sample(rng, candidates.len(), n)
            .into_iter()
            .map(|i| &candidates[i])
            .collect()
    } else {
        (0..n)
            .map(|_| &candidates[rng.random_range(0..candidates.len())])
            .collect()
    })
}

/// Id of the `j`-th converted copy of `source_id`.
pub fn converted_id(source_id: &str, j: usize) -> String {
    format!("{source_id}~vc{j}")
}

/// Add `versions_per_utterance` converted copies of every original train utterance.
///
/// Copies go to the train split only. Targets are drawn per source utterance
/// from its own RNG stream, so results do not depend on scheduling; the drawn
/// target is recorded in each copy's provenance.
pub fn augment_corpus(
    corpus: &Corpus,
    split: &SplitSpec,
    cfg: &VcConfig,
    engine: Engine,
) -> Result<(Corpus, SplitSpec)> {
    cfg.validate()?;
    let test_speakers = speakers_of(corpus, &split.test);
    let originals: Vec<&Utterance> = split
        .train
        .iter()
        .map(|id| {
            corpus
                .get(id)
                .ok_or_else(|| AidError::DanglingReference { id: id.clone() })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|u| !u.is_converted())
        .collect();
    let pool: BTreeSet<String> = match &cfg.target_pool {
        Some(p) => p.clone(),
        None => originals.iter().map(|u| u.speaker.clone()).collect(),
    };
    if let Some(s) = pool.intersection(&test_speakers).next() {
        return Err(AidError::TargetPoolOverlapsTest(s.clone()));
    }
    let known: BTreeSet<&str> = corpus.labels().speakers().iter().map(String::as_str).collect();
    if let Some(s) = pool.iter().find(|s| !known.contains(s.as_str())) {
        return Err(AidError::UnknownSpeaker(s.clone()));
    }
    if cfg.versions_per_utterance == 0 || originals.is_empty() {
        return Ok((corpus.clone(), split.clone()));
    }
    engine.check_applicable(corpus)?;

    let converter = Converter::new(corpus, engine, cfg, &pool)?;
    let pool: Vec<String> = pool.into_iter().collect();
    let converted: Vec<Utterance> = originals
        .par_iter()
        .map(|u| {
            let mut rng = item_stream(cfg.seed, "augment", &u.id);
            let candidates: Vec<String> = pool.iter().filter(|s| **s != u.speaker).cloned().collect();
            let targets = draw_targets(&mut rng, &candidates, cfg.versions_per_utterance, cfg.distinct_targets)?;
            targets
                .into_iter()
                .enumerate()
                .map(|(j, t)| converter.convert(u, t, converted_id(&u.id, j)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut out_split = split.clone();
    for u in &converted {
        out_split.train.insert(u.id.clone());
        out_split.seen_speakers.insert(u.speaker.clone());
    }
    let out = corpus.extended(converted)?;
    Ok((out, out_split))
}
