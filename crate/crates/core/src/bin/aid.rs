//! `aid`: command-line front end for every pipeline stage.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Deserialize;

use aid_core::classifier::{evaluate, new_model_for, train, Checkpoint, TrainingConfig};
use aid_core::corpus::{
    generate_synthetic, ingest, read_corpus_dir, split_speaker_disjoint, write_corpus_dir, EmbeddingVariant, SplitSpec,
    SynthConfig,
};
use aid_core::error::{AidError, Result};
use aid_core::experiments::{blob_hash, run_experiment, run_matrix, run_vc_analysis, ExperimentSpec};
use aid_core::io::atomic_write;
use aid_core::metrics::{render_eval_table, render_eval_tsv, ReportHeader};
use aid_core::vc::{augment_corpus, render_vc_table, Distance, Engine, VcConfig};

const SPLIT_FILE: &str = "split.json";

#[derive(Parser)]
#[command(
    name = "aid",
    version,
    about = "Accent identification with voice-conversion augmentation"
)]
struct Cli {
    /// Top-level seed; overrides seeds in config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (file or directory, depending on the command).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML config for the command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Raw,
    LidLike,
    Wnta64Like,
}

impl From<Variant> for EmbeddingVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Raw => EmbeddingVariant::Raw,
            Variant::LidLike => EmbeddingVariant::LidLike,
            Variant::Wnta64Like => EmbeddingVariant::Wnta64Like,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Identity,
    Knn,
    Oracle,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Identity => Engine::Identity,
            EngineArg::Knn => Engine::Knn,
            EngineArg::Oracle => Engine::Oracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceArg {
    Cosine,
    Euclidean,
}

#[derive(Clone, Copy, ValueEnum)]
enum Subset {
    Val,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus directory (config: generator TOML).
    GenCorpus {
        #[arg(long, value_enum)]
        variant: Option<Variant>,
    },
    /// Validate a manifest + feature store and write it as a corpus directory.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Speaker-disjoint train/val/test split of a corpus, written as JSON.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 0.6)]
        train: f64,
        #[arg(long, default_value_t = 0.2)]
        val: f64,
    },
    /// Add converted copies of the train split; writes a corpus dir with its split.
    Augment {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long, value_enum, default_value = "knn")]
        engine: EngineArg,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        versions: Option<usize>,
        #[arg(long, value_enum)]
        distance: Option<DistanceArg>,
    },
    /// Train a classifier (config: training TOML); writes a checkpoint.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
    },
    /// Evaluate a checkpoint on the val or test split.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        subset: Subset,
    },
    /// Conversion analysis over the test split (config: experiment TOML).
    AnalyzeVc {
        #[arg(long, value_enum)]
        engine: Vec<EngineArg>,
    },
    /// Run one experiment (config: experiment TOML).
    Run,
    /// Run a list of experiments (config: TOML with `[[experiments]]`).
    RunMatrix,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    experiments: Vec<ExperimentSpec>,
}

fn read_toml<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|e| AidError::io(path, e))?;
    toml::from_str(&text).map_err(|e| AidError::Parse {
        path: path.to_owned(),
        reason: e.to_string(),
    })
}

fn read_split(path: &Path) -> Result<SplitSpec> {
    let text = fs::read_to_string(path).map_err(|e| AidError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AidError::Parse {
        path: path.to_owned(),
        reason: e.to_string(),
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| AidError::Config(e.to_string()))?;
    atomic_write(path, json.as_bytes())
}

fn require_out(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| AidError::Config("--out is required for this command".into()))
}

fn experiment(cli: &Cli) -> Result<ExperimentSpec> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| AidError::Config("--config is required for this command".into()))?;
    let mut spec = ExperimentSpec::load(path)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(out) = &cli.out {
        spec.out = Some(out.clone());
    }
    Ok(spec)
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenCorpus { variant } => {
            let mut cfg: SynthConfig = read_toml(cli.config.as_deref())?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(v) = variant {
                cfg.variant = (*v).into();
            }
            let corpus = generate_synthetic(&cfg)?;
            let out = require_out(cli)?;
            write_corpus_dir(&corpus, out)?;
            println!(
                "{} utterances, {} speakers -> {}",
                corpus.len(),
                corpus.labels().n_speakers(),
                out.display()
            );
        }
        Command::Ingest { manifest, features } => {
            let corpus = ingest(manifest, features)?;
            let out = require_out(cli)?;
            write_corpus_dir(&corpus, out)?;
            println!("{} utterances ingested -> {}", corpus.len(), out.display());
        }
        Command::Split { corpus, train, val } => {
            let c = read_corpus_dir(corpus)?;
            let split = split_speaker_disjoint(&c, *train, *val, cli.seed.unwrap_or(0))?;
            let out = require_out(cli)?;
            write_json(out, &split)?;
            println!(
                "train {} / val {} / test {} utterances -> {}",
                split.train.len(),
                split.val.len(),
                split.test.len(),
                out.display()
            );
        }
        Command::Augment {
            corpus,
            split,
            engine,
            k,
            versions,
            distance,
        } => {
            let mut cfg: VcConfig = read_toml(cli.config.as_deref())?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(k) = k {
                cfg.k = *k;
            }
            if let Some(v) = versions {
                cfg.versions_per_utterance = *v;
            }
            if let Some(d) = distance {
                cfg.distance = match d {
                    DistanceArg::Cosine => Distance::Cosine,
                    DistanceArg::Euclidean => Distance::Euclidean,
                };
            }
            let c = read_corpus_dir(corpus)?;
            let s = read_split(split)?;
            let (out_corpus, out_split) = augment_corpus(&c, &s, &cfg, (*engine).into())?;
            let out = require_out(cli)?;
            write_corpus_dir(&out_corpus, out)?;
            write_json(&out.join(SPLIT_FILE), &out_split)?;
            println!(
                "{} converted utterances added; train split {} -> {}",
                out_corpus.len() - c.len(),
                s.train.len(),
                out_split.train.len()
            );
        }
        Command::Train { corpus, split } => {
            let mut cfg: TrainingConfig = read_toml(cli.config.as_deref())?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let c = read_corpus_dir(corpus)?;
            let s = read_split(split)?;
            s.validate(&c)?;
            let model = new_model_for(&c, &cfg)?;
            let (model, logs) = train(model, &c, &s, &cfg)?;
            for log in &logs {
                info!("epoch {}: train loss {:.4}", log.epoch, log.train.total);
            }
            let out = require_out(cli)?;
            Checkpoint {
                model,
                labels: c.labels().clone(),
                config: cfg,
            }
            .save(out)?;
            if let Some(last) = logs.last() {
                println!("final train loss {:.4}", last.train.total);
            }
            println!("checkpoint -> {}", out.display());
        }
        Command::Eval {
            corpus,
            split,
            model,
            subset,
        } => {
            let c = read_corpus_dir(corpus)?;
            let s = read_split(split)?;
            let ckpt = Checkpoint::load(model)?;
            if ckpt.labels != *c.labels() {
                return Err(AidError::Config("checkpoint labels do not match the corpus".into()));
            }
            let ids: &BTreeSet<String> = match subset {
                Subset::Val => &s.val,
                Subset::Test => &s.test,
            };
            let report = evaluate(&ckpt.model, &c, ids)?;
            let header = ReportHeader::new(
                blob_hash(&fs::read(model).map_err(|e| AidError::io(model, e))?),
                ckpt.config.seed,
            );
            print!("{}", render_eval_table(&header, &report));
            if let Some(out) = &cli.out {
                atomic_write(out, render_eval_tsv(&header, &report).as_bytes())?;
            }
        }
        Command::AnalyzeVc { engine } => {
            let mut spec = experiment(cli)?;
            if !engine.is_empty() {
                spec.analysis.engines = engine.iter().map(|&e| e.into()).collect();
            }
            let reports = run_vc_analysis(&spec)?;
            print!("{}", render_vc_table(&reports));
            if let Some(out) = &cli.out {
                write_json(out, &reports)?;
            }
        }
        Command::Run => {
            let spec = experiment(cli)?;
            let record = run_experiment(&spec)?;
            let header = ReportHeader::new(record.spec_hash.clone(), record.seed);
            print!("{}", render_eval_table(&header, &record.test));
            if !record.vc_analysis.is_empty() {
                print!("{}", render_vc_table(&record.vc_analysis));
            }
        }
        Command::RunMatrix => {
            let path = cli
                .config
                .as_deref()
                .ok_or_else(|| AidError::Config("--config is required for run-matrix".into()))?;
            let mut matrix: MatrixFile = read_toml(Some(path))?;
            if let Some(seed) = cli.seed {
                matrix.experiments.iter_mut().for_each(|s| s.seed = seed);
            }
            if let Some(out) = &cli.out {
                for s in &mut matrix.experiments {
                    s.out = Some(out.join(&s.name));
                }
            }
            let (_, table) = run_matrix(&matrix.experiments)?;
            print!("{}", table.render_table());
            if let Some(out) = &cli.out {
                atomic_write(&out.join("comparison.tsv"), table.render_tsv().as_bytes())?;
                atomic_write(&out.join("comparison.txt"), table.render_table().as_bytes())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
