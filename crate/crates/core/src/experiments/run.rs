use std::fs;
use std::path::Path;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{blob_hash, CorpusSource, ExperimentSpec};
use crate::classifier::{evaluate, new_model_for, train, AidModel, Checkpoint, EpochLog};
use crate::corpus::{
    encode_corpus, generate_synthetic, ingest, read_corpus_dir, split_speaker_disjoint, Corpus, SplitSpec,
};
use crate::error::{AidError, Result, StageContext};
use crate::io::atomic_write;
use crate::metrics::{render_eval_tsv, EvalReport, ReportHeader, SpeakerCentroids};
use crate::vc::{analyze_vc, augment_corpus, VcAnalysisReport};

pub const RUN_RECORD_FILE: &str = "run.json";
pub const CHECKPOINT_FILE: &str = "model.aidm";
pub const TEST_REPORT_FILE: &str = "test.tsv";

/// Everything one experiment produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub spec_hash: String,
    /// Blob hash of the corpus manifest + feature store the run consumed.
    pub input_hash: String,
    pub seed: u64,
    pub augmentation: String,
    pub n_train: usize,
    pub n_train_augmented: usize,
    pub logs: Vec<EpochLog>,
    pub val: Option<EvalReport>,
    pub test: EvalReport,
    pub vc_analysis: Vec<VcAnalysisReport>,
    pub duration_secs: f64,
}

impl RunRecord {
    /// The record minus wall-clock time, for reproducibility comparisons.
    pub fn without_timing(&self) -> RunRecord {
        RunRecord {
            duration_secs: 0.0,
            ..self.clone()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| AidError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| AidError::Parse {
            path: path.to_owned(),
            reason: e.to_string(),
        })
    }
}

/// Load or generate the corpus a spec names (seed and variant already resolved).
pub fn load_corpus(spec: &ExperimentSpec) -> Result<Corpus> {
    match &spec.resolved().corpus {
        CorpusSource::Synthetic { synth } => generate_synthetic(synth),
        CorpusSource::Ingest { manifest, features } => ingest(manifest, features),
        CorpusSource::Dir { path } => read_corpus_dir(path),
    }
}

/// Corpus, speaker-disjoint split and (optionally) augmented train split.
pub struct Prepared {
    pub corpus: Corpus,
    pub split: SplitSpec,
    pub input_hash: String,
    pub n_train: usize,
}

pub fn prepare(spec: &ExperimentSpec) -> Result<Prepared> {
    let spec = spec.resolved();
    spec.validate().stage("config")?;
    let corpus = load_corpus(&spec).stage("corpus")?;
    let (manifest, store) = encode_corpus(&corpus).stage("corpus")?;
    let mut blob = manifest.into_bytes();
    blob.extend_from_slice(&store);
    let input_hash = blob_hash(&blob);
    let split = split_speaker_disjoint(&corpus, spec.split.train, spec.split.val, spec.seed).stage("split")?;
    split.validate(&corpus).stage("split")?;
    let n_train = split.train.len();
    let (corpus, split) = match spec.augmentation.engine() {
        Some(engine) => augment_corpus(&corpus, &split, &spec.vc, engine).stage("augment")?,
        None => (corpus, split),
    };
    Ok(Prepared {
        corpus,
        split,
        input_hash,
        n_train,
    })
}

fn train_model(spec: &ExperimentSpec, prep: &Prepared) -> Result<(AidModel, Vec<EpochLog>)> {
    let model = new_model_for(&prep.corpus, &spec.training).stage("train")?;
    train(model, &prep.corpus, &prep.split, &spec.training).stage("train")
}

fn analyses(spec: &ExperimentSpec, prep: &Prepared, model: &AidModel) -> Result<Vec<VcAnalysisReport>> {
    if spec.analysis.engines.is_empty() {
        return Ok(Vec::new());
    }
    let centroids = SpeakerCentroids::from_corpus(&prep.corpus, spec.analysis.space).stage("analyze-vc")?;
    spec.analysis
        .engines
        .iter()
        .map(|&engine| {
            analyze_vc(&prep.corpus, &prep.split.test, engine, &spec.vc, model, &centroids).stage("analyze-vc")
        })
        .collect()
}

/// Corpus, optional augmentation, training and evaluation; persisted when `spec.out` is set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunRecord> {
    let started = Instant::now();
    let spec = spec.resolved();
    let prep = prepare(&spec)?;
    info!(
        "{}: {} train utterances ({} before augmentation)",
        spec.name,
        prep.split.train.len(),
        prep.n_train
    );
    let (model, logs) = train_model(&spec, &prep)?;
    let val = if prep.split.val.is_empty() {
        None
    } else {
        Some(evaluate(&model, &prep.corpus, &prep.split.val).stage("eval")?)
    };
    let test = evaluate(&model, &prep.corpus, &prep.split.test).stage("eval")?;
    let vc_analysis = analyses(&spec, &prep, &model)?;
    let record = RunRecord {
        name: spec.name.clone(),
        spec_hash: spec.hash()?,
        input_hash: prep.input_hash.clone(),
        seed: spec.seed,
        augmentation: spec.augmentation.as_str().to_owned(),
        n_train: prep.n_train,
        n_train_augmented: prep.split.train.len(),
        logs,
        val,
        test,
        vc_analysis,
        duration_secs: started.elapsed().as_secs_f64(),
    };
    if let Some(out) = &spec.out {
        persist(out, &spec, &record, &model, &prep).stage("persist")?;
    }
    Ok(record)
}

fn persist(out: &Path, spec: &ExperimentSpec, record: &RunRecord, model: &AidModel, prep: &Prepared) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| AidError::io(out, e))?;
    let json = serde_json::to_string_pretty(record).map_err(|e| AidError::Config(e.to_string()))?;
    atomic_write(&out.join(RUN_RECORD_FILE), json.as_bytes())?;
    let ckpt = Checkpoint {
        model: model.clone(),
        labels: prep.corpus.labels().clone(),
        config: spec.training.clone(),
    };
    ckpt.save(&out.join(CHECKPOINT_FILE))?;
    let header = ReportHeader::new(record.spec_hash.clone(), spec.seed);
    atomic_write(
        &out.join(TEST_REPORT_FILE),
        render_eval_tsv(&header, &record.test).as_bytes(),
    )?;
    atomic_write(&out.join("spec.toml"), spec.to_toml()?.as_bytes())
}

/// Train per the spec, then analyse the configured engines on the test split.
pub fn run_vc_analysis(spec: &ExperimentSpec) -> Result<Vec<VcAnalysisReport>> {
    let spec = spec.resolved();
    if spec.analysis.engines.is_empty() {
        return Err(AidError::Config("analysis.engines is empty".into()));
    }
    let prep = prepare(&spec)?;
    for engine in &spec.analysis.engines {
        engine.check_applicable(&prep.corpus).stage("analyze-vc")?;
    }
    let (model, _) = train_model(&spec, &prep)?;
    analyses(&spec, &prep, &model)
}

/// Run independent specs concurrently; records come back in input order.
pub fn run_all(specs: &[ExperimentSpec]) -> Result<Vec<RunRecord>> {
    specs.par_iter().map(run_experiment).collect()
}

/// Mean unseen-speaker accuracy with and without augmentation over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationGain {
    pub seeds: Vec<u64>,
    pub without: Vec<f64>,
    pub with: Vec<f64>,
    pub mean_without: f64,
    pub mean_with: f64,
}

impl AugmentationGain {
    pub fn gain(&self) -> f64 {
        self.mean_with - self.mean_without
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Compare `base` with augmentation off and with `augmented.augmentation`, per seed.
pub fn augmentation_gain(base: &ExperimentSpec, augmented: &ExperimentSpec, seeds: &[u64]) -> Result<AugmentationGain> {
    if seeds.is_empty() {
        return Err(AidError::Config("at least one seed required".into()));
    }
    let specs: Vec<ExperimentSpec> = seeds
        .iter()
        .flat_map(|&seed| {
            [
                ExperimentSpec {
                    seed,
                    out: None,
                    ..base.clone()
                },
                ExperimentSpec {
                    seed,
                    out: None,
                    ..augmented.clone()
                },
            ]
        })
        .collect();
    let records = run_all(&specs)?;
    let without: Vec<f64> = records.iter().step_by(2).map(|r| r.test.accuracy()).collect();
    let with: Vec<f64> = records.iter().skip(1).step_by(2).map(|r| r.test.accuracy()).collect();
    Ok(AugmentationGain {
        seeds: seeds.to_vec(),
        mean_without: mean(&without),
        mean_with: mean(&with),
        without,
        with,
    })
}
