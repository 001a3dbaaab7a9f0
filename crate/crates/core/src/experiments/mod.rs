//! Config-driven experiment runs.
//!
//! An [`ExperimentSpec`] names a corpus, an optional augmentation engine and
//! a training config; [`run_experiment`] executes corpus, split, augment,
//! train and evaluate, and [`run_matrix`] tabulates several specs side by side.

mod run;
mod spec;
mod table;

pub use run::{
    augmentation_gain, load_corpus, prepare, run_all, run_experiment, run_vc_analysis, AugmentationGain, Prepared,
    RunRecord, CHECKPOINT_FILE, RUN_RECORD_FILE, TEST_REPORT_FILE,
};
pub use spec::{blob_hash, AnalysisSpec, Augmentation, CorpusSource, ExperimentSpec, SplitFractions};
pub use table::{run_matrix, ComparisonRow, ComparisonTable};
