use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{converted_id, draw_targets, Converter, Engine, VcConfig};
use crate::classifier::AidModel;
use crate::corpus::Corpus;
use crate::error::{AidError, Result};
use crate::metrics::{aecs, random_pair_aecs, MeanStd, SpeakerCentroids};
use crate::rng::item_stream;
use crate::types::{EmbeddingVector, Utterance};

/// Minimum number of random pairs behind the AECS chance baseline.
const MIN_BASELINE_PAIRS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccentVcRow {
    pub accent: String,
    pub n_conversions: usize,
    pub source_similarity: MeanStd,
    pub target_similarity: MeanStd,
    pub accent_accuracy: f64,
    pub aecs: MeanStd,
}

/// Speaker and accent effects of one conversion engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcAnalysisReport {
    pub engine: Engine,
    pub n_sources: usize,
    pub n_conversions: usize,
    /// Cosine to the source speaker's centroid (lower means the timbre moved).
    pub source_similarity: MeanStd,
    /// Cosine to the target speaker's centroid (higher is better).
    pub target_similarity: MeanStd,
    /// Fraction of conversions still classified as the source accent.
    pub accent_accuracy: f64,
    /// The model's accuracy on the unconverted sources.
    pub clean_accuracy: f64,
    /// Accent-embedding cosine between each source and its conversions.
    pub aecs: MeanStd,
    /// AECS between random pairs of source utterances.
    pub random_pair_aecs: MeanStd,
    pub per_accent: Vec<AccentVcRow>,
}

struct Conversion {
    accent: String,
    source_similarity: f64,
    target_similarity: f64,
    correct: bool,
    aecs: f64,
}

fn predictions(model: &AidModel, pooled: &[EmbeddingVector]) -> Result<Vec<usize>> {
    let dim = pooled[0].dim();
    let mut x = Array2::zeros((pooled.len(), dim));
    for (mut row, p) in x.rows_mut().into_iter().zip(pooled) {
        row.assign(&p.view());
    }
    model.predict(x.view())
}

/// Convert every source to `targets_per_source_analysis` random other speakers and score the results.
///
/// Targets are drawn from all corpus speakers except the source's own.
pub fn analyze_vc(
    corpus: &Corpus,
    sources: &BTreeSet<String>,
    engine: Engine,
    cfg: &VcConfig,
    model: &AidModel,
    centroids: &SpeakerCentroids,
) -> Result<VcAnalysisReport> {
    cfg.validate()?;
    if !model.is_trained() {
        return Err(AidError::Untrained);
    }
    let sources: Vec<&Utterance> = sources
        .iter()
        .map(|id| {
            corpus
                .get(id)
                .ok_or_else(|| AidError::DanglingReference { id: id.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    if sources.is_empty() {
        return Err(AidError::Empty("analysis sources"));
    }
    let labels = corpus.labels();
    let speakers: BTreeSet<String> = labels.speakers().iter().cloned().collect();
    let converter = Converter::new(corpus, engine, cfg, &speakers)?;
    let speakers: Vec<String> = speakers.into_iter().collect();

    let source_pooled = sources.iter().map(|u| u.pooled()).collect::<Result<Vec<_>>>()?;
    let source_pred = predictions(model, &source_pooled)?;
    let truth: Vec<usize> = sources
        .iter()
        .map(|u| labels.accent_id(&u.accent).expect("corpus labels are indexed"))
        .collect();
    let clean_correct = source_pred.iter().zip(&truth).filter(|(p, t)| p == t).count();
    let source_emb = source_pooled
        .iter()
        .map(|p| model.accent_embedding(p))
        .collect::<Result<Vec<_>>>()?;

    let per_source: Vec<Vec<Conversion>> = sources
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let mut rng = item_stream(cfg.seed, "analysis", &u.id);
            let candidates: Vec<String> = speakers.iter().filter(|s| **s != u.speaker).cloned().collect();
            let n = cfg.targets_per_source_analysis.min(candidates.len());
            let targets = draw_targets(&mut rng, &candidates, n, true)?;
            let converted = targets
                .iter()
                .enumerate()
                .map(|(j, t)| converter.convert(u, t, converted_id(&u.id, j))?.pooled())
                .collect::<Result<Vec<_>>>()?;
            if converted.is_empty() {
                return Ok(Vec::new());
            }
            let pred = predictions(model, &converted)?;
            targets
                .iter()
                .zip(&converted)
                .zip(pred)
                .map(|((t, pooled), p)| {
                    Ok(Conversion {
                        accent: u.accent.clone(),
                        source_similarity: centroids.similarity(pooled, &u.accent, &u.speaker)?,
                        target_similarity: centroids.similarity(pooled, &u.accent, t)?,
                        correct: p == truth[i],
                        aecs: aecs(&source_emb[i], &model.accent_embedding(pooled)?)?,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<&Conversion> = per_source.iter().flatten().collect();
    if all.is_empty() {
        return Err(AidError::Empty("no conversion targets available"));
    }

    let summarize = |rows: &[&Conversion]| -> Result<(MeanStd, MeanStd, f64, MeanStd)> {
        let src: Vec<f64> = rows.iter().map(|c| c.source_similarity).collect();
        let tgt: Vec<f64> = rows.iter().map(|c| c.target_similarity).collect();
        let ae: Vec<f64> = rows.iter().map(|c| c.aecs).collect();
        let acc = rows.iter().filter(|c| c.correct).count() as f64 / rows.len() as f64;
        Ok((MeanStd::of(&src)?, MeanStd::of(&tgt)?, acc, MeanStd::of(&ae)?))
    };
    let (source_similarity, target_similarity, accent_accuracy, aecs_all) = summarize(&all)?;

    let mut by_accent: BTreeMap<&str, Vec<&Conversion>> = BTreeMap::new();
    for c in &all {
        by_accent.entry(&c.accent).or_default().push(c);
    }
    let per_accent = by_accent
        .into_iter()
        .map(|(accent, rows)| {
            let (s, t, a, e) = summarize(&rows)?;
            Ok(AccentVcRow {
                accent: accent.to_owned(),
                n_conversions: rows.len(),
                source_similarity: s,
                target_similarity: t,
                accent_accuracy: a,
                aecs: e,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let baseline = if source_emb.len() >= 2 {
        random_pair_aecs(&source_emb, all.len().max(MIN_BASELINE_PAIRS), cfg.seed)?
    } else {
        MeanStd::of(&[1.0])?
    };
    Ok(VcAnalysisReport {
        engine,
        n_sources: sources.len(),
        n_conversions: all.len(),
        source_similarity,
        target_similarity,
        accent_accuracy,
        clean_accuracy: clean_correct as f64 / sources.len() as f64,
        aecs: aecs_all,
        random_pair_aecs: baseline,
        per_accent,
    })
}

/// Timbre / accent table, one row per engine.
pub fn render_vc_table(reports: &[VcAnalysisReport]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<10} | {:>13} | {:>13} | {:>9} | {:>11}",
        "engine", "source sim ↓", "target sim ↑", "acc ↑", "AECS ↑"
    )
    .unwrap();
    writeln!(out, "{}", "-".repeat(68)).unwrap();
    for r in reports {
        writeln!(
            out,
            "{:<10} | {:>13} | {:>13} | {:>9.2} | {:>11}",
            r.engine.as_str(),
            r.source_similarity.to_string(),
            r.target_similarity.to_string(),
            r.accent_accuracy,
            r.aecs.to_string()
        )
        .unwrap();
    }
    if let Some(r) = reports.first() {
        writeln!(
            out,
            "clean accuracy on sources {:.2}; random-pair AECS {}",
            r.clean_accuracy, r.random_pair_aecs
        )
        .unwrap();
    }
    out
}
