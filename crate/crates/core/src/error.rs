use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AidError> = std::result::Result<T, E>;

/// Every failure the workbench can report.
///
/// Variants group into three families that map onto process exit codes:
/// configuration problems (2), data problems (3) and numeric failures (4).
#[derive(Debug, Error)]
pub enum AidError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero-norm vector has no direction")]
    ZeroNorm,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("probability vector sums to {sum}, not 1")]
    NotNormalized { sum: f64 },

    #[error("label id {id} out of range for {classes} classes")]
    LabelOutOfRange { id: usize, classes: usize },

    #[error("unknown speaker `{0}`")]
    UnknownSpeaker(String),

    #[error("speaker `{0}` has no frame-level utterances")]
    NoFrames(String),

    #[error("accent `{accent}` has {found} speakers, at least {needed} required")]
    TooFewSpeakers {
        accent: String,
        found: usize,
        needed: usize,
    },

    #[error("matching pool of {pool} frames is smaller than k = {k}")]
    PoolTooSmall { pool: usize, k: usize },

    #[error("corpus has no latent factor table; the oracle engine needs a synthetic corpus")]
    MissingFactors,

    #[error("target pool contains test speaker `{0}`")]
    TargetPoolOverlapsTest(String),

    #[error("model is not trained")]
    Untrained,

    #[error("forward state is stale: cached for parameter version {cached}, model is at {current}")]
    StaleForward { cached: u64, current: u64 },

    #[error("batch of {0} cannot be normalized in train mode")]
    BatchTooSmall(usize),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("malformed record in {path}: {reason}")]
    MalformedRecord { path: PathBuf, reason: String },

    #[error("manifest row `{id}` references a record that is not in the store")]
    DanglingReference { id: String },

    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<AidError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl AidError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AidError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        AidError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code for this error: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            AidError::Stage { source, .. } => source.exit_code(),
            AidError::Config(_)
            | AidError::Parse { .. }
            | AidError::TargetPoolOverlapsTest(_)
            | AidError::MissingFactors => 2,
            AidError::NanLoss { .. } | AidError::NonFinite(_) | AidError::ZeroNorm => 4,
            _ => 3,
        }
    }
}

/// Attach a stage name to the error side of a result.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
