//! End-to-end experiment runs on small synthetic corpora.

use aid_core::classifier::{OptimizerKind, TrainingConfig};
use aid_core::corpus::SynthConfig;
use aid_core::experiments::{
    run_experiment, run_matrix, run_vc_analysis, AnalysisSpec, Augmentation, CorpusSource, ExperimentSpec, RunRecord,
    RUN_RECORD_FILE,
};
use aid_core::metrics::SpeakerSpace;
use aid_core::vc::Engine;

/// Pooled-embedding cosine rounds frames through f32.
const SIMILARITY_TOL: f64 = 1e-9;

fn small_spec(name: &str, synth: SynthConfig, epochs: usize) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        corpus: CorpusSource::Synthetic { synth },
        training: TrainingConfig {
            epochs,
            lr_accent: 1e-3,
            lr_speaker: 1e-3,
            optimizer: OptimizerKind::adam(),
            ..TrainingConfig::default()
        },
        ..ExperimentSpec::default()
    }
}

fn small_corpus() -> SynthConfig {
    SynthConfig {
        n_accents: 4,
        speakers_per_accent: 5,
        utterances_per_speaker: 6,
        frame_dim: 8,
        frames_min: 2,
        frames_max: 6,
        ..SynthConfig::default()
    }
}

#[test]
fn separable_corpus_without_augmentation_is_accurate() {
    let synth = SynthConfig {
        n_accents: 6,
        speakers_per_accent: 5,
        utterances_per_speaker: 10,
        noise_scale: 0.1,
        ..SynthConfig::default()
    };
    let record = run_experiment(&small_spec("separable", synth, 10)).unwrap();
    assert!(record.test.accuracy() >= 0.9, "accuracy {}", record.test.accuracy());
    assert_eq!(record.n_train, record.n_train_augmented);
}

#[test]
fn persisted_record_matches_the_returned_one() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        out: Some(dir.path().to_owned()),
        ..small_spec("persist", small_corpus(), 2)
    };
    let record = run_experiment(&spec).unwrap();
    let back = RunRecord::load(&dir.path().join(RUN_RECORD_FILE)).unwrap();
    assert_eq!(back, record);
}

#[test]
fn matrix_of_six_specs_gives_six_rows_in_order() {
    let mut specs = Vec::new();
    for aug in [Augmentation::None, Augmentation::Knn, Augmentation::Oracle] {
        for lambda in [0.0, 0.1] {
            let mut spec = small_spec(&format!("{}-{lambda}", aug.as_str()), small_corpus(), 2);
            spec.augmentation = aug;
            spec.training.lambda = lambda;
            specs.push(spec);
        }
    }
    // Reverse so the order is not alphabetical by accident.
    specs.reverse();
    let (records, table) = run_matrix(&specs).unwrap();
    assert_eq!(records.len(), 6);
    assert_eq!(table.rows.len(), 6);
    for ((spec, record), row) in specs.iter().zip(&records).zip(&table.rows) {
        assert_eq!(row.name, spec.name);
        assert_eq!(record.name, spec.name);
        let m = &record.test.metrics;
        assert_eq!(
            [row.precision, row.recall, row.f1, row.accuracy],
            [m.precision, m.recall, m.f1, m.accuracy]
        );
    }
    assert_eq!(records[5].n_train, records[5].n_train_augmented);
    assert_eq!(records[0].n_train_augmented, 3 * records[0].n_train);
}

#[test]
fn single_spec_gives_single_row() {
    let (_, table) = run_matrix(&[small_spec("only", small_corpus(), 1)]).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.render_tsv().lines().count(), 2);
    assert!(run_matrix(&[]).is_err());
}

#[test]
fn identity_conversion_keeps_source_and_accuracy() {
    let spec = ExperimentSpec {
        analysis: AnalysisSpec {
            engines: vec![Engine::Identity],
            ..AnalysisSpec::default()
        },
        ..small_spec(
            "identity",
            SynthConfig {
                noise_scale: 0.05,
                ..small_corpus()
            },
            3,
        )
    };
    let r = &run_vc_analysis(&spec).unwrap()[0];
    assert!(
        r.source_similarity.mean > 0.95,
        "source similarity {}",
        r.source_similarity
    );
    assert_eq!(r.accent_accuracy, r.clean_accuracy);
    assert!(r.aecs.mean > 1.0 - SIMILARITY_TOL);
}

#[test]
fn noise_free_oracle_reaches_the_target_exactly() {
    // With no accent or noise component every frame of a speaker is the same
    // vector, so the converted utterance is the target's centroid.
    let spec = ExperimentSpec {
        analysis: AnalysisSpec {
            engines: vec![Engine::Oracle],
            space: SpeakerSpace::Raw,
        },
        ..small_spec(
            "oracle-exact",
            SynthConfig {
                accent_scale: 0.0,
                noise_scale: 0.0,
                ..small_corpus()
            },
            1,
        )
    };
    let r = &run_vc_analysis(&spec).unwrap()[0];
    assert!(
        (r.target_similarity.mean - 1.0).abs() < SIMILARITY_TOL,
        "target similarity {}",
        r.target_similarity
    );
}

#[test]
fn oracle_bounds_knn_target_similarity() {
    let spec = ExperimentSpec {
        analysis: AnalysisSpec {
            engines: vec![Engine::Oracle, Engine::Knn],
            ..AnalysisSpec::default()
        },
        ..small_spec("oracle-vs-knn", small_corpus(), 3)
    };
    let reports = run_vc_analysis(&spec).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].engine, Engine::Oracle);
    assert!(reports[0].target_similarity.mean >= reports[1].target_similarity.mean);
}
