//! Feed-forward accent classifier with an adversarial speaker head.
//!
//! The trunk is three affine + batch-norm + ReLU blocks. The accent head is
//! trained with cross-entropy plus `lambda` times the KL divergence of the
//! speaker posterior from uniform; the speaker head is trained separately on
//! plain speaker cross-entropy with the trunk held fixed.

mod checkpoint;
mod loss;
mod model;
mod optim;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loss::{backward, kl_to_uniform, loss, LayerGrad, LossBreakdown, MainGrads, SpeakerHeadGrads};
pub use model::{
    Affine, AidModel, BatchNorm, ForwardCache, ForwardOutput, LayerCache, Mode, ModelShape, BN_EPS, TRUNK_WIDTHS,
};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{evaluate, new_model_for, summarize, train, EpochLog, LabelledSet, TrainingConfig, ValSummary};
