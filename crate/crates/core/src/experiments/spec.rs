use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::TrainingConfig;
use crate::corpus::{EmbeddingVariant, SynthConfig};
use crate::error::{AidError, Result};
use crate::metrics::SpeakerSpace;
use crate::vc::{Engine, VcConfig};

/// Where the corpus comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum CorpusSource {
    Synthetic {
        #[serde(default)]
        synth: SynthConfig,
    },
    /// A manifest + feature store pair.
    Ingest { manifest: PathBuf, features: PathBuf },
    /// A directory written by `gen-corpus` or `augment`.
    Dir { path: PathBuf },
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Synthetic {
            synth: SynthConfig::default(),
        }
    }
}

/// Augmentation applied to the train split before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Augmentation {
    #[default]
    None,
    Knn,
    Oracle,
}

impl Augmentation {
    pub fn engine(&self) -> Option<Engine> {
        match self {
            Augmentation::None => None,
            Augmentation::Knn => Some(Engine::Knn),
            Augmentation::Oracle => Some(Engine::Oracle),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Augmentation::None => "none",
            Augmentation::Knn => "knn",
            Augmentation::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.6, val: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    /// Engines to analyse on the test split; empty disables the analysis.
    pub engines: Vec<Engine>,
    pub space: SpeakerSpace,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            engines: Vec::new(),
            space: SpeakerSpace::AccentCentered,
        }
    }
}

/// One experiment, loadable from TOML. Unknown keys are rejected.
///
/// The top-level `seed` overrides the seeds of every nested section; stages
/// draw from named substreams of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: u64,
    /// Embedding variant of a synthetic corpus; overrides `corpus.synth.variant`.
    pub variant: Option<EmbeddingVariant>,
    pub augmentation: Augmentation,
    pub out: Option<PathBuf>,
    pub corpus: CorpusSource,
    pub split: SplitFractions,
    pub vc: VcConfig,
    pub training: TrainingConfig,
    pub analysis: AnalysisSpec,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "experiment".into(),
            seed: 0,
            variant: None,
            augmentation: Augmentation::None,
            out: None,
            corpus: CorpusSource::default(),
            split: SplitFractions::default(),
            vc: VcConfig::default(),
            training: TrainingConfig::default(),
            analysis: AnalysisSpec::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| AidError::Parse {
            path: origin.to_owned(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| AidError::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| AidError::Config(e.to_string()))
    }

    /// Copy with the top-level seed and variant pushed into every section.
    pub fn resolved(&self) -> Self {
        let mut s = self.clone();
        if let CorpusSource::Synthetic { synth } = &mut s.corpus {
            synth.seed = s.seed;
            if let Some(v) = s.variant {
                synth.variant = v;
            }
        }
        s.vc.seed = s.seed;
        s.training.seed = s.seed;
        s
    }

    /// Hex SHA-256 of the resolved spec's TOML. The output directory is
    /// excluded: where results land does not change what was run.
    pub fn hash(&self) -> Result<String> {
        let spec = ExperimentSpec {
            out: None,
            ..self.resolved()
        };
        Ok(hex_digest(spec.to_toml()?.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if let CorpusSource::Synthetic { synth } = &self.corpus {
            synth.validate()?;
        }
        self.training.validate()?;
        self.vc.validate()?;
        Ok(())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Git-style blob hash: SHA-256 over `blob <len>\0` followed by the content.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}
