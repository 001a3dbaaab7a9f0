use std::collections::BTreeSet;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{backward, loss, LossBreakdown};
use super::model::{AidModel, Mode, ModelShape, TRUNK_WIDTHS};
use super::optim::{Optimizer, OptimizerKind};
use crate::corpus::{speakers_of, Corpus, SplitSpec};
use crate::error::{AidError, Result};
use crate::metrics::{confusion, EvalReport};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub lr_accent: f64,
    pub lr_speaker: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub batchnorm_momentum: f64,
    pub weight_init_scale: f64,
    pub optimizer: OptimizerKind,
    pub hidden: [usize; 3],
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 10,
            lr_accent: 1e-4,
            lr_speaker: 1e-5,
            lambda: 0.1,
            batch_size: 32,
            seed: 0,
            batchnorm_momentum: 0.1,
            weight_init_scale: 1.0,
            optimizer: OptimizerKind::Sgd,
            hidden: TRUNK_WIDTHS,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(AidError::Config("lambda must be finite and >= 0".into()));
        }
        for (name, lr) in [("lr_accent", self.lr_accent), ("lr_speaker", self.lr_speaker)] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(AidError::Config(format!("{name} must be positive")));
            }
        }
        if self.batch_size < 2 {
            return Err(AidError::Config("batch_size must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.batchnorm_momentum) {
            return Err(AidError::Config("batchnorm_momentum must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Pooled inputs with class ids, rows ordered by utterance id.
#[derive(Debug, Clone)]
pub struct LabelledSet {
    pub ids: Vec<String>,
    pub x: Array2<f64>,
    pub accents: Vec<usize>,
    pub speakers: Vec<usize>,
}

impl LabelledSet {
    pub fn from_ids(corpus: &Corpus, ids: &BTreeSet<String>) -> Result<Self> {
        let dim = corpus.dim().ok_or(AidError::Empty("corpus"))?;
        let labels = corpus.labels();
        let mut x = Array2::zeros((ids.len(), dim));
        let mut accents = Vec::with_capacity(ids.len());
        let mut speakers = Vec::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            let u = corpus
                .get(id)
                .ok_or_else(|| AidError::DanglingReference { id: id.clone() })?;
            x.row_mut(row).assign(&u.pooled()?.view());
            accents.push(labels.accent_id(&u.accent).expect("corpus labels are indexed"));
            speakers.push(labels.speaker_id(&u.speaker).expect("corpus labels are indexed"));
        }
        Ok(LabelledSet {
            ids: ids.iter().cloned().collect(),
            x,
            accents,
            speakers,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn select(&self, rows: &[usize]) -> (Array2<f64>, Vec<usize>, Vec<usize>) {
        (
            self.x.select(Axis(0), rows),
            rows.iter().map(|&r| self.accents[r]).collect(),
            rows.iter().map(|&r| self.speakers[r]).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValSummary {
    pub loss: LossBreakdown,
    pub accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub val: Option<ValSummary>,
}

/// Untrained model sized for `corpus`, initialized from the `init` substream.
pub fn new_model_for(corpus: &Corpus, cfg: &TrainingConfig) -> Result<AidModel> {
    let shape = ModelShape {
        input_dim: corpus.dim().ok_or(AidError::Empty("corpus"))?,
        hidden: cfg.hidden,
        n_accents: corpus.labels().n_accents(),
        n_speakers: corpus.labels().n_speakers(),
    };
    AidModel::new(
        shape,
        cfg.weight_init_scale,
        cfg.batchnorm_momentum,
        &mut substream(cfg.seed, "init"),
    )
}

/// Loss and accuracy of an eval-mode pass over `set`.
pub fn summarize(model: &AidModel, set: &LabelledSet, lambda: f64) -> Result<ValSummary> {
    let out = model.forward_eval(set.x.view())?;
    let l = loss(&out, &set.accents, Some(&set.speakers), lambda)?;
    let predicted = model.predict(set.x.view())?;
    let cm = confusion(&predicted, &set.accents, model.shape().n_accents)?;
    let m = crate::metrics::macro_metrics(&cm)?;
    Ok(ValSummary {
        loss: l,
        accuracy: m.accuracy,
        macro_f1: m.f1,
    })
}

/// Mini-batch training with simultaneous dual-rate updates.
///
/// Each batch updates trunk + accent head with `lr_accent` on the total loss
/// and the speaker head with `lr_speaker` on the speaker cross-entropy. A
/// trailing batch of one sample is skipped. The returned model is in eval
/// mode with running statistics recomputed over the whole train split.
pub fn train(
    mut model: AidModel,
    corpus: &Corpus,
    split: &SplitSpec,
    cfg: &TrainingConfig,
) -> Result<(AidModel, Vec<EpochLog>)> {
    cfg.validate()?;
    let train_set = LabelledSet::from_ids(corpus, &split.train)?;
    if train_set.is_empty() {
        return Err(AidError::Empty("train split"));
    }
    if cfg.epochs == 0 {
        model.mode = Mode::Eval;
        return Ok((model, Vec::new()));
    }
    let val_set = if split.val.is_empty() {
        None
    } else {
        Some(LabelledSet::from_ids(corpus, &split.val)?)
    };

    model.mode = Mode::Train;
    let mut opt_main = Optimizer::new(cfg.optimizer, cfg.lr_accent);
    let mut opt_speaker = Optimizer::new(cfg.optimizer, cfg.lr_speaker);
    let mut shuffle_rng = substream(cfg.seed, "shuffle");
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut batch_losses = Vec::new();
        for (batch, rows) in order.chunks(cfg.batch_size).enumerate() {
            if rows.len() < 2 {
                continue;
            }
            let (x, ya, ys) = train_set.select(rows);
            let cache = model.forward_train(x.view())?;
            let lb = loss(&cache.output, &ya, Some(&ys), cfg.lambda)?;
            if !lb.is_finite() {
                return Err(AidError::NanLoss { epoch, batch });
            }
            let (main, speaker) = backward(&model, &cache, &ya, &ys, cfg.lambda)?;
            model.update_running_stats(&cache);
            let (params, grads): (Vec<_>, Vec<_>) = model
                .main_params_mut()
                .into_iter()
                .map(|(_, p)| p)
                .zip(main.slices().into_iter().map(|(_, g)| g))
                .unzip();
            opt_main.step(params, grads);
            let (params, grads): (Vec<_>, Vec<_>) = model
                .speaker_params_mut()
                .into_iter()
                .map(|(_, p)| p)
                .zip(speaker.slices().into_iter().map(|(_, g)| g))
                .unzip();
            opt_speaker.step(params, grads);
            model.bump_version();
            batch_losses.push(lb);
        }
        let val = match &val_set {
            Some(v) => Some(summarize(&model, v, cfg.lambda)?),
            None => None,
        };
        log::debug!("epoch {epoch}: {:?}", LossBreakdown::mean(&batch_losses));
        logs.push(EpochLog {
            epoch,
            train: LossBreakdown::mean(&batch_losses),
            val,
        });
    }
    model.finalize_running_stats(train_set.x.view())?;
    model.mode = Mode::Eval;
    model.trained = true;
    Ok((model, logs))
}

/// Classification report on a set of utterance ids.
pub fn evaluate(model: &AidModel, corpus: &Corpus, ids: &BTreeSet<String>) -> Result<EvalReport> {
    let set = LabelledSet::from_ids(corpus, ids)?;
    if set.is_empty() {
        return Err(AidError::Empty("evaluation set"));
    }
    let predicted = model.predict(set.x.view())?;
    let cm = confusion(&predicted, &set.accents, model.shape().n_accents)?;
    EvalReport::new(corpus.labels().accents().to_vec(), cm, speakers_of(corpus, ids).len())
}
