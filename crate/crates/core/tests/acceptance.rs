//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Every tolerance and size is a named constant below. Oracles are written
//! independently of the library code they check.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aid_core::classifier::{
    backward, kl_to_uniform, loss, AidModel, Checkpoint, ModelShape, OptimizerKind, TrainingConfig,
};
use aid_core::corpus::{
    encode_corpus, generate_synthetic, read_corpus_dir, speakers_of, split_speaker_disjoint, write_corpus_dir,
    EmbeddingVariant, SynthConfig,
};
use aid_core::experiments::{
    augmentation_gain, run_experiment, run_vc_analysis, Augmentation, CorpusSource, ExperimentSpec, CHECKPOINT_FILE,
};
use aid_core::metrics::{confusion, macro_metrics, ConfusionMatrix};
use aid_core::types::FrameSequence;
use aid_core::vc::{augment_corpus, knn_convert, Distance, Engine, MatchingSet, VcConfig};
use aid_core::AidError;

// Criterion 1
const GRAD_MODELS: usize = 20;
const GRAD_BATCH: usize = 4;
const GRAD_REL_TOL: f64 = 1e-4;
/// Central-difference step.
const GRAD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so near-zero gradients are
/// compared on an absolute scale.
const GRAD_REL_FLOOR: f64 = 1e-6;
const GRAD_BUDGET: Duration = Duration::from_secs(10);
// Criterion 2
const KL_SIMPLEXES: usize = 10_000;
const KL_TOL: f64 = 1e-9;
const KL_BUDGET: Duration = Duration::from_secs(5);
/// ln 13 to 17 significant digits (mpmath); ln 2 comes from `std::f64::consts`.
const LN_13: f64 = 2.564_949_357_461_536_7;
/// The published six-decimal values.
#[allow(clippy::approx_constant)]
const KL_ONE_HOT_PUBLISHED: [(usize, f64); 2] = [(2, 0.693147), (13, 2.564949)];
const PUBLISHED_ROUNDING: f64 = 5e-7;
// Criterion 3
const KNN_INSTANCES: usize = 200;
const KNN_BUDGET: Duration = Duration::from_secs(30);
// Criterion 4
const METRIC_MATRICES: usize = 1_000;
const METRIC_TOL: f64 = 1e-12;
const WORKED_F1: f64 = 0.6970;
const WORKED_F1_ROUNDING: f64 = 5e-5;
// Criterion 5
const SPLIT_CORPORA: usize = 100;
// Criterion 6
const CONVERSION_MIN_CONVERSIONS: usize = 500;
const CONVERSION_BUDGET: Duration = Duration::from_secs(120);
// Criteria 7 and 9
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const GAIN_BUDGET: Duration = Duration::from_secs(600);

fn report(criterion: u8, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    // Written to the raw stderr handle so the line shows without --nocapture.
    let _ = writeln!(
        std::io::stderr(),
        "acceptance criterion {criterion} [{verdict}] {name}: {detail}"
    );
}

/// Trains quickly enough for multi-seed runs at desk scale; see README.
fn desk_training(epochs: usize) -> TrainingConfig {
    TrainingConfig {
        epochs,
        lr_accent: 1e-3,
        lr_speaker: 1e-3,
        optimizer: OptimizerKind::adam(),
        ..TrainingConfig::default()
    }
}

// ---------------------------------------------------------------- 1

fn total_loss(model: &AidModel, x: &Array2<f64>, ya: &[usize], ys: &[usize], lambda: f64) -> f64 {
    let cache = model.forward_train(x.view()).unwrap();
    loss(&cache.output, ya, Some(ys), lambda).unwrap().total
}

fn speaker_loss(model: &AidModel, x: &Array2<f64>, ya: &[usize], ys: &[usize]) -> f64 {
    let cache = model.forward_train(x.view()).unwrap();
    loss(&cache.output, ya, Some(ys), 0.0).unwrap().speaker_ce
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_REL_FLOOR)
}

/// Central difference of `f` with respect to slot `slot`, element `i`.
fn central_diff(model: &AidModel, slot: usize, i: usize, speaker: bool, f: &dyn Fn(&AidModel) -> f64) -> f64 {
    let mut plus = model.clone();
    let mut minus = model.clone();
    {
        let mut p = if speaker {
            plus.speaker_params_mut()
        } else {
            plus.main_params_mut()
        };
        p[slot].1[i] += GRAD_STEP;
        let mut m = if speaker {
            minus.speaker_params_mut()
        } else {
            minus.main_params_mut()
        };
        m[slot].1[i] -= GRAD_STEP;
    }
    (f(&plus) - f(&minus)) / (2.0 * GRAD_STEP)
}

#[test]
fn criterion_1_gradient_oracle() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut worst_at = String::new();
    for m in 0..GRAD_MODELS {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + m as u64);
        let input_dim = rng.random_range(2..=8);
        let shape = ModelShape {
            input_dim,
            hidden: [
                rng.random_range(3..=6),
                rng.random_range(3..=6),
                rng.random_range(2..=5),
            ],
            n_accents: 3,
            n_speakers: 3,
        };
        let mut model = AidModel::new(shape, 1.0, 0.1, &mut rng).unwrap();
        // Move batch norm away from the identity so gamma/beta gradients are generic.
        for bn in &mut model.norms {
            bn.gamma.mapv_inplace(|_| rng.random_range(0.5..1.5));
            bn.beta.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let x = Array2::from_shape_fn((GRAD_BATCH, input_dim), |_| rng.random_range(-2.0..2.0));
        let ya: Vec<usize> = (0..GRAD_BATCH).map(|_| rng.random_range(0..3)).collect();
        let ys: Vec<usize> = (0..GRAD_BATCH).map(|_| rng.random_range(0..3)).collect();
        let lambda = rng.random_range(0.05..1.0);

        let cache = model.forward_train(x.view()).unwrap();
        let (main, speaker) = backward(&model, &cache, &ya, &ys, lambda).unwrap();

        let f_total = |mm: &AidModel| total_loss(mm, &x, &ya, &ys, lambda);
        for (slot, (name, grad)) in main.slices().into_iter().enumerate() {
            for (i, &g) in grad.iter().enumerate() {
                let e = rel_err(g, central_diff(&model, slot, i, false, &f_total));
                checked += 1;
                if e > worst {
                    worst = e;
                    worst_at = format!("model {m} {name}[{i}] analytic {g:e}");
                }
            }
        }
        let f_speaker = |mm: &AidModel| speaker_loss(mm, &x, &ya, &ys);
        for (slot, (name, grad)) in speaker.slices().into_iter().enumerate() {
            for (i, &g) in grad.iter().enumerate() {
                let e = rel_err(g, central_diff(&model, slot, i, true, &f_speaker));
                checked += 1;
                if e > worst {
                    worst = e;
                    worst_at = format!("model {m} {name}[{i}]");
                }
            }
        }
    }
    let elapsed = started.elapsed();
    let pass = worst <= GRAD_REL_TOL && elapsed < GRAD_BUDGET;
    report(
        1,
        "gradient oracle",
        pass,
        &format!("{checked} parameters, worst relative error {worst:.2e} at {worst_at}, {elapsed:.2?}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 2

/// Independent oracle: sum p ln p - ln(1/C), skipping zeros.
fn kl_oracle(p: &[f64]) -> f64 {
    let c = p.len() as f64;
    let neg_entropy: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum();
    neg_entropy + c.ln()
}

#[test]
fn criterion_2_kl_invariants() {
    let started = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for c in [2usize, 3, 13, 50] {
        let u = vec![1.0 / c as f64; c];
        let v = kl_to_uniform(&u).unwrap();
        if v.abs() > KL_TOL {
            ok = false;
            notes.push(format!("uniform C={c} gives {v}"));
        }
    }
    for (c, published) in KL_ONE_HOT_PUBLISHED {
        let mut p = vec![0.0; c];
        p[c / 2] = 1.0;
        let v = kl_to_uniform(&p).unwrap();
        let exact = if c == 2 { std::f64::consts::LN_2 } else { LN_13 };
        if (v - exact).abs() > KL_TOL || (v - published).abs() > PUBLISHED_ROUNDING {
            ok = false;
            notes.push(format!("one-hot C={c} gives {v}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..KL_SIMPLEXES {
        let c = rng.random_range(2..=20);
        // Exponential draws give a uniform point on the simplex; sometimes zero a coordinate.
        let mut p: Vec<f64> = (0..c).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        if rng.random_bool(0.2) {
            p[rng.random_range(0..c)] = 0.0;
        }
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        let v = kl_to_uniform(&p).unwrap();
        if v < 0.0 {
            ok = false;
            notes.push(format!("negative KL {v}"));
        }
        worst = worst.max((v - kl_oracle(&p).max(0.0)).abs());
    }
    ok &= worst <= KL_TOL;
    let elapsed = started.elapsed();
    ok &= elapsed < KL_BUDGET;
    report(
        2,
        "KL invariants",
        ok,
        &format!(
            "{KL_SIMPLEXES} simplexes, worst oracle gap {worst:.1e}, {elapsed:.2?} {}",
            notes.join("; ")
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 3

/// O(T*N) scan with a full sort by (distance, row).
fn knn_brute(src: &Array2<f64>, pool: &Array2<f64>, k: usize, distance: Distance) -> Array2<f64> {
    let norm = |r: &[f64]| {
        let mut s = 0.0;
        for v in r {
            s += v * v;
        }
        s.sqrt()
    };
    let mut out = Array2::zeros(src.raw_dim());
    for t in 0..src.nrows() {
        let q = src.row(t).to_vec();
        let qn = norm(&q);
        let mut all: Vec<(f64, usize)> = Vec::new();
        for i in 0..pool.nrows() {
            let r = pool.row(i).to_vec();
            let d = match distance {
                Distance::Euclidean => {
                    let mut s = 0.0;
                    for j in 0..q.len() {
                        s += (q[j] - r[j]) * (q[j] - r[j]);
                    }
                    s
                }
                Distance::Cosine => {
                    let rn = norm(&r);
                    if qn == 0.0 || rn == 0.0 {
                        1.0
                    } else {
                        let mut dot = 0.0;
                        for j in 0..q.len() {
                            dot += q[j] * r[j];
                        }
                        1.0 - dot / (qn * rn)
                    }
                }
            };
            all.push((d, i));
        }
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, i) in &all[..k] {
            for j in 0..q.len() {
                out[[t, j]] += pool[[i, j]];
            }
        }
        for j in 0..q.len() {
            out[[t, j]] /= k as f64;
        }
    }
    out
}

#[test]
fn criterion_3_knn_brute_force_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for inst in 0..KNN_INSTANCES {
        let t = rng.random_range(1..=50);
        let n = rng.random_range(1..=500);
        let d = rng.random_range(1..=16);
        // Small integer grids force many exact distance ties.
        let coarse = inst % 3 == 0;
        let draw = |rng: &mut ChaCha8Rng| {
            if coarse {
                rng.random_range(-2i32..=2) as f64
            } else {
                rng.random_range(-1.0..1.0)
            }
        };
        let src = Array2::from_shape_fn((t, d), |_| draw(&mut rng));
        let pool = Array2::from_shape_fn((n, d), |_| draw(&mut rng));
        let k = match inst % 3 {
            0 => 1,
            1 => 4.min(n),
            _ => n,
        };
        let distance = if rng.random_bool(0.5) {
            Distance::Cosine
        } else {
            Distance::Euclidean
        };
        let cfg = VcConfig {
            k,
            distance,
            ..VcConfig::default()
        };
        let got = knn_convert(
            &FrameSequence::new(src.clone()).unwrap(),
            &MatchingSet::new("t", pool.clone()).unwrap(),
            &cfg,
        )
        .unwrap();
        let want = knn_brute(&src, &pool, k, distance);
        let same = got
            .view()
            .iter()
            .zip(want.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            mismatches += 1;
        }
    }
    let elapsed = started.elapsed();
    let pass = mismatches == 0 && elapsed < KNN_BUDGET;
    report(
        3,
        "kNN brute-force equivalence",
        pass,
        &format!("{KNN_INSTANCES} instances, {mismatches} not bit-identical, {elapsed:.2?}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 4

/// Brute-force evaluator straight from (truth, prediction) pairs.
fn brute_metrics(pairs: &[(usize, usize)], n: usize) -> [f64; 4] {
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for c in 0..n {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count() as f64;
        let pred = pairs.iter().filter(|&&(_, p)| p == c).count() as f64;
        let actual = pairs.iter().filter(|&&(t, _)| t == c).count() as f64;
        let prec = if pred > 0.0 { tp / pred } else { 0.0 };
        let rec = if actual > 0.0 { tp / actual } else { 0.0 };
        let f1 = if prec + rec > 0.0 {
            2.0 * prec * rec / (prec + rec)
        } else {
            0.0
        };
        p_sum += prec;
        r_sum += rec;
        f_sum += f1;
    }
    let acc = pairs.iter().filter(|&&(t, p)| t == p).count() as f64 / pairs.len() as f64;
    [p_sum / n as f64, r_sum / n as f64, f_sum / n as f64, acc]
}

#[test]
fn criterion_4_metric_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..METRIC_MATRICES {
        let n = rng.random_range(1..=13);
        let len = rng.random_range(1..=200);
        let pairs: Vec<(usize, usize)> = (0..len)
            .map(|_| {
                let t = rng.random_range(0..n);
                let p = if rng.random_bool(0.5) {
                    t
                } else {
                    rng.random_range(0..n)
                };
                (t, p)
            })
            .collect();
        let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let m = macro_metrics(&confusion(&pred, &truth, n).unwrap()).unwrap();
        let want = brute_metrics(&pairs, n);
        for (got, want) in [m.precision, m.recall, m.f1, m.accuracy].into_iter().zip(want) {
            worst = worst.max((got - want).abs());
        }
    }
    let worked = macro_metrics(&ConfusionMatrix::from_rows(&[vec![8, 2], vec![4, 6]]).unwrap()).unwrap();
    // Hand computation: F1_0 = 2(2/3)(4/5)/(2/3+4/5) = 8/11, F1_1 = 2/3, mean = 23/33.
    let exact_f1 = 23.0 / 33.0;
    let pass = worst <= METRIC_TOL
        && (worked.f1 - exact_f1).abs() <= METRIC_TOL
        && (worked.f1 - WORKED_F1).abs() < WORKED_F1_ROUNDING
        && (worked.accuracy - 0.7).abs() <= METRIC_TOL;
    report(
        4,
        "metric oracle",
        pass,
        &format!(
            "{METRIC_MATRICES} matrices, worst gap {worst:.1e}; worked example macro F1 {:.4}, accuracy {:.2}",
            worked.f1, worked.accuracy
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_speaker_disjointness() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0;
    let mut rejected = 0;
    for i in 0..SPLIT_CORPORA {
        let cfg = SynthConfig {
            n_accents: rng.random_range(2..=6),
            speakers_per_accent: rng.random_range(3..=8),
            utterances_per_speaker: rng.random_range(1..=4),
            frame_dim: 3,
            frames_min: 1,
            frames_max: 3,
            seed: i as u64,
            ..SynthConfig::default()
        };
        let corpus = generate_synthetic(&cfg).unwrap();
        let tf = rng.random_range(0.3..0.7);
        let vf = rng.random_range(0.05..(0.95 - tf));
        let split = split_speaker_disjoint(&corpus, tf, vf, rng.random()).unwrap();
        let train = speakers_of(&corpus, &split.train);
        let val = speakers_of(&corpus, &split.val);
        let test = speakers_of(&corpus, &split.test);
        if train.intersection(&test).next().is_some() || val.intersection(&test).next().is_some() {
            violations += 1;
        }
        // A pool containing one test speaker must be refused.
        let mut pool: BTreeSet<String> = train.clone();
        pool.insert(test.iter().next().unwrap().clone());
        let vc = VcConfig {
            target_pool: Some(pool),
            ..VcConfig::default()
        };
        if matches!(
            augment_corpus(&corpus, &split, &vc, Engine::Oracle),
            Err(AidError::TargetPoolOverlapsTest(_))
        ) {
            rejected += 1;
        }
    }
    let pass = violations == 0 && rejected == SPLIT_CORPORA;
    report(
        5,
        "speaker disjointness",
        pass,
        &format!("{SPLIT_CORPORA} corpora: {violations} overlapping splits, {rejected} overlapping pools rejected"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_6_conversion_direction() {
    let started = Instant::now();
    let beta = 1.0;
    let spec = ExperimentSpec {
        name: "conversion-direction".into(),
        seed: 6,
        corpus: CorpusSource::Synthetic {
            synth: SynthConfig {
                n_accents: 6,
                speakers_per_accent: 5,
                utterances_per_speaker: 25,
                speaker_scale: beta,
                noise_scale: 0.1 * beta,
                entanglement: 0.0,
                ..SynthConfig::default()
            },
        },
        training: desk_training(15),
        analysis: aid_core::experiments::AnalysisSpec {
            engines: vec![Engine::Oracle],
            ..Default::default()
        },
        ..ExperimentSpec::default()
    };
    let reports = run_vc_analysis(&spec).unwrap();
    let r = &reports[0];
    let elapsed = started.elapsed();
    let pass = r.n_conversions >= CONVERSION_MIN_CONVERSIONS
        && r.target_similarity.mean > r.source_similarity.mean
        && r.aecs.mean > r.random_pair_aecs.mean
        && elapsed < CONVERSION_BUDGET;
    report(
        6,
        "oracle conversion direction",
        pass,
        &format!(
            "{} conversions: source sim {}, target sim {}, AECS {} vs random-pair {}, accent acc {:.2}, {elapsed:.2?}",
            r.n_conversions, r.source_similarity, r.target_similarity, r.aecs, r.random_pair_aecs, r.accent_accuracy
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 7

fn gain_spec(variant: EmbeddingVariant) -> ExperimentSpec {
    ExperimentSpec {
        name: format!("gain-{}", variant.as_str()),
        variant: Some(variant),
        corpus: CorpusSource::Synthetic {
            synth: SynthConfig {
                n_accents: 13,
                // With 0.6/0.2 fractions: 3 train, 1 val, 1 test speaker per accent.
                speakers_per_accent: 5,
                entanglement: 0.7,
                ..SynthConfig::default()
            },
        },
        training: desk_training(30),
        ..ExperimentSpec::default()
    }
}

#[test]
fn criterion_7_augmentation_gain() {
    let started = Instant::now();
    let mut gains = Vec::new();
    let mut detail = Vec::new();
    let mut max_train_speakers = 0;
    for variant in [EmbeddingVariant::Raw, EmbeddingVariant::Wnta64Like] {
        let base = gain_spec(variant);
        let corpus = generate_synthetic(match &base.resolved().corpus {
            CorpusSource::Synthetic { synth } => synth,
            _ => unreachable!(),
        })
        .unwrap();
        let split = split_speaker_disjoint(&corpus, base.split.train, base.split.val, base.seed).unwrap();
        for accent in corpus.labels().accents() {
            let n = speakers_of(&corpus, &split.train)
                .iter()
                .filter(|s| s.starts_with(accent.as_str()))
                .count();
            max_train_speakers = max_train_speakers.max(n);
        }
        let aug = ExperimentSpec {
            augmentation: Augmentation::Oracle,
            vc: VcConfig {
                versions_per_utterance: 2,
                ..VcConfig::default()
            },
            ..base.clone()
        };
        let g = augmentation_gain(&base, &aug, &SEEDS).unwrap();
        detail.push(format!(
            "{}: {:.4} -> {:.4} (gain {:+.4})",
            variant.as_str(),
            g.mean_without,
            g.mean_with,
            g.gain()
        ));
        gains.push(g);
    }
    let elapsed = started.elapsed();
    let pass = gains[0].mean_with > gains[0].mean_without
        && gains[1].gain() <= gains[0].gain()
        && max_train_speakers <= 3
        && elapsed < GAIN_BUDGET;
    report(
        7,
        "augmentation gain, smaller for the WNTA64-like variant",
        pass,
        &format!(
            "{} seeds, <= {max_train_speakers} train speakers/accent; {}; {elapsed:.2?}",
            SEEDS.len(),
            detail.join("; ")
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_8_determinism_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        name: "determinism".into(),
        seed: 8,
        augmentation: Augmentation::Knn,
        corpus: CorpusSource::Synthetic {
            synth: SynthConfig {
                n_accents: 4,
                speakers_per_accent: 4,
                utterances_per_speaker: 5,
                frame_dim: 8,
                ..SynthConfig::default()
            },
        },
        training: desk_training(5),
        analysis: aid_core::experiments::AnalysisSpec {
            engines: vec![Engine::Oracle, Engine::Knn],
            ..Default::default()
        },
        out: Some(dir.path().join("a")),
        ..ExperimentSpec::default()
    };
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&ExperimentSpec {
        out: Some(dir.path().join("b")),
        ..spec.clone()
    })
    .unwrap();
    let records_equal = a.without_timing() == b.without_timing();
    let ckpt_a = std::fs::read(dir.path().join("a").join(CHECKPOINT_FILE)).unwrap();
    let ckpt_b = std::fs::read(dir.path().join("b").join(CHECKPOINT_FILE)).unwrap();

    // Corpus: write -> read -> write.
    let corpus = generate_synthetic(&SynthConfig {
        n_accents: 3,
        speakers_per_accent: 3,
        utterances_per_speaker: 3,
        frame_dim: 5,
        ..SynthConfig::default()
    })
    .unwrap();
    write_corpus_dir(&corpus, &dir.path().join("c1")).unwrap();
    let back = read_corpus_dir(&dir.path().join("c1")).unwrap();
    write_corpus_dir(&back, &dir.path().join("c2")).unwrap();
    let mut corpus_identical = back == corpus;
    for f in ["manifest.tsv", "features.aidf", "factors.aidf", "factors.toml"] {
        corpus_identical &= std::fs::read(dir.path().join("c1").join(f)).unwrap()
            == std::fs::read(dir.path().join("c2").join(f)).unwrap();
    }
    corpus_identical &= encode_corpus(&back).unwrap() == encode_corpus(&corpus).unwrap();

    // Checkpoint: read -> write.
    let loaded = Checkpoint::load(&dir.path().join("a").join(CHECKPOINT_FILE)).unwrap();
    let ckpt_identical = loaded.to_bytes().unwrap() == ckpt_a;

    let pass = records_equal && ckpt_a == ckpt_b && corpus_identical && ckpt_identical;
    report(
        8,
        "determinism and byte-identical round trips",
        pass,
        &format!(
            "rerun metrics identical: {records_equal}, rerun checkpoints identical: {}, corpus round trip: {corpus_identical}, checkpoint round trip: {ckpt_identical}",
            ckpt_a == ckpt_b
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_9_adversarial_effect() {
    let mean_val_kl = |lambda: f64| -> f64 {
        let mut total = 0.0;
        for &seed in &SEEDS {
            let spec = ExperimentSpec {
                name: format!("lambda-{lambda}"),
                seed,
                corpus: CorpusSource::Synthetic {
                    synth: SynthConfig {
                        n_accents: 6,
                        speakers_per_accent: 5,
                        utterances_per_speaker: 12,
                        entanglement: 0.7,
                        ..SynthConfig::default()
                    },
                },
                training: TrainingConfig {
                    lambda,
                    ..desk_training(20)
                },
                ..ExperimentSpec::default()
            };
            let record = run_experiment(&spec).unwrap();
            total += record.logs.last().unwrap().val.as_ref().unwrap().loss.kl_term;
        }
        total / SEEDS.len() as f64
    };
    let with = mean_val_kl(0.1);
    let without = mean_val_kl(0.0);
    let pass = with < without;
    report(
        9,
        "adversarial effect on validation KL",
        pass,
        &format!(
            "{} seeds: mean val KL {with:.4} (lambda 0.1) vs {without:.4} (lambda 0)",
            SEEDS.len()
        ),
    );
    assert!(pass);
}
