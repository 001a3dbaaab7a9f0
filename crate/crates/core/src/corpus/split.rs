use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{AidError, Result};
use crate::rng::substream;

/// Speaker-disjoint partition of a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: BTreeSet<String>,
    pub val: BTreeSet<String>,
    pub test: BTreeSet<String>,
    /// Speakers present in train.
    pub seen_speakers: BTreeSet<String>,
    /// Speakers present in test.
    pub unseen_speakers: BTreeSet<String>,
}

impl SplitSpec {
    /// Checks disjointness and accent coverage against `corpus`.
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        let speakers = |ids: &BTreeSet<String>| -> Result<BTreeSet<String>> {
            ids.iter()
                .map(|id| {
                    corpus
                        .get(id)
                        .map(|u| u.speaker.clone())
                        .ok_or_else(|| AidError::DanglingReference { id: id.clone() })
                })
                .collect()
        };
        let train = speakers(&self.train)?;
        let val = speakers(&self.val)?;
        let test = speakers(&self.test)?;
        if let Some(s) = test.intersection(&train).chain(test.intersection(&val)).next() {
            return Err(AidError::Config(format!("speaker `{s}` is in test and in train/val")));
        }
        if self.train.intersection(&self.test).next().is_some()
            || self.train.intersection(&self.val).next().is_some()
            || self.val.intersection(&self.test).next().is_some()
        {
            return Err(AidError::Config("utterance in more than one split".into()));
        }
        let accents = |ids: &BTreeSet<String>| -> BTreeSet<&str> {
            ids.iter()
                .filter_map(|id| corpus.get(id))
                .map(|u| u.accent.as_str())
                .collect()
        };
        let train_accents = accents(&self.train);
        if let Some(a) = accents(&self.test).difference(&train_accents).next() {
            return Err(AidError::Config(format!("test accent `{a}` missing from train")));
        }
        Ok(())
    }
}

/// Minimum speakers per accent: one each for train, val and test.
pub const MIN_SPEAKERS_PER_ACCENT: usize = 3;

/// Partition speakers per accent into train/val/test.
///
/// Only original utterances are assigned; converted utterances stay out of
/// every split.
pub fn split_speaker_disjoint(corpus: &Corpus, train_fraction: f64, val_fraction: f64, seed: u64) -> Result<SplitSpec> {
    let in_unit = |f: f64| f > 0.0 && f < 1.0;
    if !in_unit(train_fraction) || !in_unit(val_fraction) || train_fraction + val_fraction >= 1.0 {
        return Err(AidError::Config(format!(
            "split fractions {train_fraction}/{val_fraction} must lie in (0,1) and sum below 1"
        )));
    }
    let mut by_accent: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for accent in corpus.labels().accents() {
        by_accent.entry(accent.clone()).or_default();
    }
    for (speaker, accent) in corpus.speaker_accents() {
        by_accent.entry(accent).or_default().push(speaker);
    }

    let mut rng = substream(seed, "split");
    let mut role: BTreeMap<String, u8> = BTreeMap::new();
    for (accent, mut speakers) in by_accent {
        let n = speakers.len();
        if n < MIN_SPEAKERS_PER_ACCENT {
            return Err(AidError::TooFewSpeakers {
                accent,
                found: n,
                needed: MIN_SPEAKERS_PER_ACCENT,
            });
        }
        speakers.shuffle(&mut rng);
        let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 2);
        let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - n_train - 1);
        for (i, s) in speakers.into_iter().enumerate() {
            let r = if i < n_train {
                0
            } else if i < n_train + n_val {
                1
            } else {
                2
            };
            role.insert(s, r);
        }
    }

    let mut split = SplitSpec::default();
    for u in corpus.utterances().iter().filter(|u| !u.is_converted()) {
        match role.get(&u.speaker) {
            Some(0) => {
                split.train.insert(u.id.clone());
                split.seen_speakers.insert(u.speaker.clone());
            }
            Some(1) => {
                split.val.insert(u.id.clone());
            }
            Some(2) => {
                split.test.insert(u.id.clone());
                split.unseen_speakers.insert(u.speaker.clone());
            }
            _ => {}
        }
    }
    Ok(split)
}
