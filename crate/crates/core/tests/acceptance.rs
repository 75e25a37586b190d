//! Acceptance suite: one test per criterion. Each prints a PASS line
//! with its measured values (visible with `-- --nocapture`); a failed
//! assertion marks the criterion red.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use multicam_core::eval::{
    run_experiment, score, EvalVariant, ExperimentConfig, ExperimentReport,
};
use multicam_core::eval::report::{render_per_class_csv, render_summary_csv};
use multicam_core::features::{
    FeatureTable, FeatureWindowPair, WindowSeq, HIGH_STEPS, LOW_STEPS, LOW_STRIDE, STEP_DIM,
};
use multicam_core::ingest::{bundle_session, DetectionStream, SessionBundle};
use multicam_core::model::{
    class_encode, BBox, CameraId, DetectionClass, HandId, LabelTimeline, ToolState, N_CLASSES,
};
use multicam_core::naive::{classify_session_naive, CameraSelection};
use multicam_core::neural::{
    gradient_check, predict_session, train, BatchItem, ClassifierParams, OptimizerKind,
    TrainConfig, Variant,
};
use multicam_core::sim::{derive_seed, generate_batch, ScenarioConfig};

// ---------------------------------------------------------------------
// Shared occluded-noisy benchmark (criteria 4 and 5). Sized for a small
// desktop CPU; the wall-clock bound is asserted, not targeted.
// ---------------------------------------------------------------------

const BENCH_SESSIONS: usize = 20;
const BENCH_FRAMES: usize = 1500;
const BENCH_FOLDS: usize = 4;
const BENCH_SEED: u64 = 2024;
const BENCH_TRAIN: TrainConfig = TrainConfig {
    epochs: 25,
    learning_rate: 1e-3,
    dropout_p: 0.3,
    batch_size: 16,
    seed: 1,
    optimizer: OptimizerKind::Adam,
    samples_per_video_per_epoch: 96,
    class_weights: None,
};

struct Bench {
    report: ExperimentReport,
    wall_s: f64,
}

static BENCH: OnceLock<Bench> = OnceLock::new();

fn bench() -> &'static Bench {
    BENCH.get_or_init(|| {
        let start = Instant::now();
        let mut cfg = ScenarioConfig::preset("occluded-noisy").unwrap();
        cfg.n_frames = BENCH_FRAMES;
        cfg.seed = BENCH_SEED;
        let sessions: Vec<SessionBundle> = generate_batch(&cfg, BENCH_SESSIONS)
            .into_iter()
            .map(|s| s.bundle)
            .collect();
        let report = run_experiment(
            &sessions,
            &ExperimentConfig {
                k_folds: BENCH_FOLDS,
                seed: 7,
                variants: EvalVariant::ALL.to_vec(),
                train: Some(BENCH_TRAIN),
            },
        )
        .expect("benchmark experiment runs");
        Bench {
            report,
            wall_s: start.elapsed().as_secs_f64(),
        }
    })
}

fn mean_accuracy(report: &ExperimentReport, variant: EvalVariant) -> f64 {
    report.outcome(variant).expect("variant evaluated").mean.accuracy
}

// ---------------------------------------------------------------------
// Criterion 1: rule-based fusion equals an independent brute-force
// restatement of the rules on every hand-frame of 50 randomized
// sessions of >= 1000 frames, in under 30 s.
// ---------------------------------------------------------------------

/// Independent oracle: flatten the per-camera max / cross-camera max /
/// tie-break rules into one lexicographic argmax over every candidate
/// detection (probability descending, top view before close-up,
/// earlier state first), with memory fallback.
fn oracle_classify(bundle: &SessionBundle, cameras: CameraSelection) -> LabelTimeline {
    let mut labels: [Vec<ToolState>; 4] = Default::default();
    let mut memory = [ToolState::Empty; 4];
    for frame in 0..bundle.n_frames {
        for hand in HandId::ALL {
            let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
            for camera in CameraId::ALL {
                if !cameras.includes(camera) {
                    continue;
                }
                for r in bundle.stream(camera).frame_records(frame) {
                    if r.cls.hand == hand {
                        candidates.push((r.p, camera.index(), r.cls.state.index()));
                    }
                }
            }
            candidates.sort_by(|a, b| {
                b.0.total_cmp(&a.0)
                    .then(a.1.cmp(&b.1))
                    .then(a.2.cmp(&b.2))
            });
            let state = candidates
                .first()
                .map(|c| ToolState::ALL[c.2])
                .unwrap_or(memory[hand.index()]);
            memory[hand.index()] = state;
            labels[hand.index()].push(state);
        }
    }
    LabelTimeline::from_labels(labels).unwrap()
}

/// Dense random stream with quantized probabilities so exact ties occur.
fn random_tie_stream(camera: CameraId, n_frames: usize, rng: &mut ChaCha8Rng) -> DetectionStream {
    let mut records = Vec::new();
    for frame in 0..n_frames {
        for _ in 0..rng.gen_range(0..6) {
            let hand = HandId::ALL[rng.gen_range(0..4)];
            let state = ToolState::ALL[rng.gen_range(0..5)];
            let p = rng.gen_range(1..=10) as f64 / 10.0;
            records.push(multicam_core::model::DetectionRecord {
                camera,
                frame,
                cls: DetectionClass::new(hand, state),
                p,
                bbox: BBox::new(0.5, 0.5, 0.1, 0.1),
            });
        }
    }
    DetectionStream::new(camera, records)
}

#[test]
fn criterion_1_naive_fusion_matches_brute_force_oracle() {
    let start = Instant::now();
    let mut sessions: Vec<SessionBundle> = Vec::new();

    let mut cfg = ScenarioConfig::preset("occluded-noisy").unwrap();
    cfg.n_frames = 1000;
    cfg.seed = 41;
    sessions.extend(generate_batch(&cfg, 40).into_iter().map(|s| s.bundle));

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..10 {
        let top = random_tie_stream(CameraId::TopView, 1000, &mut rng);
        let close = random_tie_stream(CameraId::CloseUp, 1000, &mut rng);
        sessions.push(bundle_session(format!("tie{i}"), top, close, None).unwrap());
    }
    assert_eq!(sessions.len(), 50);

    let mut hand_frames = 0usize;
    for (i, session) in sessions.iter().enumerate() {
        let selections = [CameraSelection::Both, CameraSelection::Top, CameraSelection::Close];
        // Every session checks both-camera fusion; a third of them also
        // check the single-camera rules.
        let n_sel = if i % 3 == 0 { 3 } else { 1 };
        for &cameras in &selections[..n_sel] {
            let fast = classify_session_naive(session, cameras);
            let oracle = oracle_classify(session, cameras);
            assert!(session.n_frames >= 1000);
            for hand in HandId::ALL {
                for f in 0..session.n_frames {
                    assert_eq!(
                        fast.label(hand, f),
                        oracle.label(hand, f),
                        "session {} camera set {:?} hand {} frame {f}",
                        session.session_id,
                        cameras,
                        hand.code()
                    );
                }
            }
            hand_frames += 4 * session.n_frames;
        }
    }
    let wall = start.elapsed().as_secs_f64();
    assert!(wall < 30.0, "criterion 1 took {wall:.1} s, bound is 30 s");
    println!(
        "ACCEPTANCE 1 PASS: naive fusion matches the brute-force oracle on all \
         {hand_frames} hand-frames of 50 sessions in {wall:.1} s"
    );
}

// ---------------------------------------------------------------------
// Criterion 2: analytic gradients of the full dual-LSTM model match
// central finite differences (eps = 1e-4) to < 1e-4 relative error over
// >= 200 sampled coordinates, in under 2 min.
// ---------------------------------------------------------------------

fn random_window(rng: &mut ChaCha8Rng) -> FeatureWindowPair {
    let rows = |n: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..STEP_DIM).map(|_| rng.gen::<f64>()).collect())
            .collect()
    };
    FeatureWindowPair {
        high: WindowSeq::from_steps(&rows(HIGH_STEPS, rng)).unwrap(),
        low: WindowSeq::from_steps(&rows(LOW_STEPS, rng)).unwrap(),
    }
}

#[test]
fn criterion_2_gradients_match_finite_differences() {
    let start = Instant::now();
    let params = ClassifierParams::init(Variant::Mcc, 314);
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    let wins: Vec<FeatureWindowPair> = (0..4).map(|_| random_window(&mut rng)).collect();
    let labels = [
        ToolState::Empty,
        ToolState::NeedleHolder,
        ToolState::Scissors,
        ToolState::MosquitoForceps,
    ];
    let batch: Vec<BatchItem<'_>> = wins
        .iter()
        .zip(labels)
        .map(|(w, l)| BatchItem::from_window(w, l))
        .collect();
    // 25 coordinates per tensor x 10 tensors = 250 >= 200, and every
    // parameter tensor is covered.
    let coords_per_tensor = 25;
    let n_tensors = params.tensors().len();
    let max_err = gradient_check(&params, &batch, 1e-4, coords_per_tensor, 1618).unwrap();
    let wall = start.elapsed().as_secs_f64();
    assert!(
        max_err < 1e-4,
        "max relative gradient error {max_err:.3e} exceeds 1e-4"
    );
    assert!(wall < 120.0, "criterion 2 took {wall:.1} s, bound is 2 min");
    println!(
        "ACCEPTANCE 2 PASS: max relative gradient error {max_err:.3e} over {} \
         coordinates ({n_tensors} tensors) in {wall:.1} s",
        coords_per_tensor * n_tensors
    );
}

// ---------------------------------------------------------------------
// Criterion 3: on the fullvis-clean preset the rule-based fusion is
// exact (accuracy 1.0) and a 200-epoch MCC reaches >= 0.99.
// ---------------------------------------------------------------------

#[test]
fn criterion_3_noise_free_sufficiency() {
    let mut cfg = ScenarioConfig::preset("fullvis-clean").unwrap();
    cfg.n_frames = 1000;
    cfg.seed = 77;
    let train_sessions: Vec<SessionBundle> = generate_batch(&cfg, 4)
        .into_iter()
        .map(|s| s.bundle)
        .collect();
    let mut eval_cfg = cfg.clone();
    eval_cfg.seed = derive_seed(cfg.seed, 1_000_000);
    let eval_sessions: Vec<SessionBundle> = generate_batch(&eval_cfg, 2)
        .into_iter()
        .map(|s| s.bundle)
        .collect();

    // Rule-based fusion is information-theoretically exact here.
    let mut naive_correct = 0u64;
    let mut naive_total = 0u64;
    for s in train_sessions.iter().chain(&eval_sessions) {
        let truth = s.truth.as_ref().unwrap();
        let pred = classify_session_naive(s, CameraSelection::Both);
        for hand in HandId::ALL {
            for f in 0..s.n_frames {
                naive_total += 1;
                naive_correct += u64::from(truth.label(hand, f) == pred.label(hand, f));
            }
        }
    }
    assert_eq!(
        naive_correct, naive_total,
        "both-camera naive fusion must be exact on noise-free data"
    );

    let tc = TrainConfig {
        epochs: 200,
        learning_rate: 1e-3,
        dropout_p: 0.3,
        batch_size: 16,
        seed: 5,
        optimizer: OptimizerKind::Adam,
        samples_per_video_per_epoch: 32,
        class_weights: None,
    };
    let outcome = train(&train_sessions, Variant::Mcc, &tc).unwrap();
    let first_loss = outcome.loss_history[0];
    let last_loss = *outcome.loss_history.last().unwrap();
    assert!(
        last_loss < 0.5 * first_loss,
        "training loss {first_loss:.4} -> {last_loss:.4} did not halve"
    );

    let mut correct = 0u64;
    let mut total = 0u64;
    for s in &eval_sessions {
        let truth = s.truth.as_ref().unwrap();
        let pred = predict_session(&outcome.params, s);
        for hand in HandId::ALL {
            for f in 0..s.n_frames {
                total += 1;
                correct += u64::from(truth.label(hand, f) == pred.label(hand, f));
            }
        }
    }
    let acc = correct as f64 / total as f64;
    assert!(
        acc >= 0.99,
        "trained MCC accuracy {acc:.4} below 0.99 on noise-free data"
    );
    println!(
        "ACCEPTANCE 3 PASS: naive fusion accuracy 1.0000 exactly; trained MCC \
         accuracy {acc:.4} (loss {first_loss:.3} -> {last_loss:.3})"
    );
}

// ---------------------------------------------------------------------
// Criterion 4: on the occluded-noisy benchmark the accuracy ordering is
// MCC >= BothNaive >= max(TopNaive, CloseNaive), each gap >= -0.005,
// within 30 min.
// ---------------------------------------------------------------------

#[test]
fn criterion_4_fusion_value_under_occlusion() {
    let b = bench();
    let mcc = mean_accuracy(&b.report, EvalVariant::Mcc);
    let both = mean_accuracy(&b.report, EvalVariant::BothNaive);
    let top = mean_accuracy(&b.report, EvalVariant::TopNaive);
    let close = mean_accuracy(&b.report, EvalVariant::CloseNaive);
    let single_best = top.max(close);
    assert!(
        b.wall_s < 1800.0,
        "benchmark took {:.0} s, bound is 30 min",
        b.wall_s
    );
    assert!(
        mcc >= both - 0.005,
        "MCC {mcc:.4} below BothNaive {both:.4} beyond tolerance"
    );
    assert!(
        both >= single_best - 0.005,
        "BothNaive {both:.4} below best single camera {single_best:.4} beyond tolerance"
    );
    println!(
        "ACCEPTANCE 4 PASS: accuracy ordering MCC {mcc:.4} >= BothNaive {both:.4} >= \
         max(Top {top:.4}, Close {close:.4}) on {BENCH_SESSIONS} sessions, \
         {BENCH_FOLDS}-fold CV, benchmark wall {:.0} s",
        b.wall_s
    );
}

// ---------------------------------------------------------------------
// Criterion 5: same benchmark, MCC >= max(HighOnly, LowOnly) - 0.005.
// ---------------------------------------------------------------------

#[test]
fn criterion_5_dual_timescale_value() {
    let b = bench();
    let mcc = mean_accuracy(&b.report, EvalVariant::Mcc);
    let high = mean_accuracy(&b.report, EvalVariant::HighFps);
    let low = mean_accuracy(&b.report, EvalVariant::LowFps);
    assert!(
        mcc >= high.max(low) - 0.005,
        "MCC {mcc:.4} below best single timescale (high {high:.4}, low {low:.4})"
    );
    println!(
        "ACCEPTANCE 5 PASS: MCC {mcc:.4} >= max(HighFps {high:.4}, LowFps {low:.4}) - 0.005"
    );
}

// ---------------------------------------------------------------------
// Criterion 6: the metric suite equals a brute-force confusion-count
// oracle exactly on 100 random pairs; weighted and macro F1 coincide on
// an equal-occurrence case; the occurrence thresholds drop exactly the
// right classes.
// ---------------------------------------------------------------------

fn random_timeline(n_frames: usize, rng: &mut ChaCha8Rng) -> LabelTimeline {
    let labels = std::array::from_fn(|_| {
        (0..n_frames)
            .map(|_| ToolState::ALL[rng.gen_range(0..5)])
            .collect()
    });
    LabelTimeline::from_labels(labels).unwrap()
}

/// Independent metric computation: per-class TP and marginal counts via
/// direct loops over hand-frames, then the shared formulas.
#[allow(clippy::needless_range_loop)]
fn oracle_metrics(truth: &LabelTimeline, pred: &LabelTimeline) -> multicam_core::eval::MetricsReport {
    let n = truth.n_frames();
    let mut tp = [0u64; N_CLASSES];
    let mut occ = [0u64; N_CLASSES];
    let mut predicted = [0u64; N_CLASSES];
    let mut correct = 0u64;
    for hand in HandId::ALL {
        for f in 0..n {
            let t = class_encode(hand, truth.label(hand, f));
            let p = class_encode(hand, pred.label(hand, f));
            occ[t] += 1;
            predicted[p] += 1;
            if t == p {
                tp[t] += 1;
                correct += 1;
            }
        }
    }
    let mut per_class = Vec::new();
    for c in 0..N_CLASSES {
        let precision = if predicted[c] == 0 {
            0.0
        } else {
            tp[c] as f64 / predicted[c] as f64
        };
        let recall = if occ[c] == 0 {
            0.0
        } else {
            tp[c] as f64 / occ[c] as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let (hand, state) = multicam_core::model::class_decode(c).unwrap();
        per_class.push(multicam_core::eval::ClassMetrics {
            class: DetectionClass::new(hand, state).code(),
            occurrence: occ[c],
            precision,
            recall,
            f1,
        });
    }
    let total: u64 = occ.iter().sum();
    let f1_weighted = if total == 0 {
        0.0
    } else {
        per_class
            .iter()
            .map(|c| c.f1 * c.occurrence as f64)
            .sum::<f64>()
            / total as f64
    };
    let macro_over = |min_occ: u64| {
        let kept: Vec<f64> = per_class
            .iter()
            .filter(|c| c.occurrence >= min_occ)
            .map(|c| c.f1)
            .collect();
        if kept.is_empty() {
            0.0
        } else {
            kept.iter().sum::<f64>() / kept.len() as f64
        }
    };
    multicam_core::eval::MetricsReport {
        accuracy: if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        },
        f1_weighted,
        f1_macro: macro_over(0),
        f1_macro_min100: macro_over(100),
        f1_macro_min200: macro_over(200),
        per_class,
    }
}

#[test]
fn criterion_6_metric_suite_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for case in 0..100 {
        let n = rng.gen_range(20..200);
        let truth = random_timeline(n, &mut rng);
        // Mix of near-copies and independent predictions.
        let pred = if case % 2 == 0 {
            random_timeline(n, &mut rng)
        } else {
            let mut p = truth.clone();
            for _ in 0..n / 4 {
                let hand = HandId::ALL[rng.gen_range(0..4)];
                let f = rng.gen_range(0..n);
                p.set_label(hand, f, ToolState::ALL[rng.gen_range(0..5)]);
            }
            p
        };
        let ours = score(&truth, &pred).unwrap();
        let oracle = oracle_metrics(&truth, &pred);
        assert_eq!(ours.accuracy, oracle.accuracy, "case {case}");
        assert_eq!(ours.f1_weighted, oracle.f1_weighted, "case {case}");
        assert_eq!(ours.f1_macro, oracle.f1_macro, "case {case}");
        assert_eq!(ours.f1_macro_min100, oracle.f1_macro_min100, "case {case}");
        assert_eq!(ours.f1_macro_min200, oracle.f1_macro_min200, "case {case}");
        for (a, b) in ours.per_class.iter().zip(&oracle.per_class) {
            assert_eq!(a.occurrence, b.occurrence, "case {case} class {}", a.class);
            assert_eq!(a.precision, b.precision, "case {case} class {}", a.class);
            assert_eq!(a.recall, b.recall, "case {case} class {}", a.class);
            assert_eq!(a.f1, b.f1, "case {case} class {}", a.class);
        }
    }

    // Equal occurrence: every one of the 20 classes appears exactly 40
    // times, so the weighted mean collapses onto the macro mean.
    let k = 40;
    let cycle = |offset: usize| -> Vec<ToolState> {
        (0..5 * k)
            .map(|i| ToolState::ALL[((i / k) + offset) % 5])
            .collect()
    };
    let truth = LabelTimeline::from_labels(std::array::from_fn(&cycle)).unwrap();
    let mut shifted: [Vec<ToolState>; 4] = std::array::from_fn(cycle);
    for labels in shifted.iter_mut() {
        labels.rotate_right(7);
    }
    let pred = LabelTimeline::from_labels(shifted).unwrap();
    let report = score(&truth, &pred).unwrap();
    assert!(
        report.per_class.iter().all(|c| c.occurrence == k as u64),
        "equal-occurrence construction is balanced"
    );
    assert!(
        (report.f1_weighted - report.f1_macro).abs() < 1e-12,
        "weighted {} != macro {}",
        report.f1_weighted,
        report.f1_macro
    );

    // Threshold semantics: occurrences 250 / 150 / 50 within one hand.
    use ToolState::*;
    let mut sr = vec![NeedleHolder; 250];
    sr.extend(vec![Forceps; 150]);
    sr.extend(vec![Scissors; 50]);
    let rest = vec![Empty; 450];
    let truth = LabelTimeline::from_labels([sr, rest.clone(), rest.clone(), rest]).unwrap();
    let report = score(&truth, &truth).unwrap();
    let kept = |min_occ: u64| -> Vec<&str> {
        report
            .per_class
            .iter()
            .filter(|c| c.occurrence >= min_occ)
            .map(|c| c.class.as_str())
            .collect()
    };
    assert_eq!(kept(100), vec!["SRN", "SRF", "SLE", "ARE", "ALE"]);
    assert_eq!(kept(200), vec!["SRN", "SLE", "ARE", "ALE"]);
    assert_eq!(report.f1_macro_min100, 1.0);
    assert_eq!(report.f1_macro_min200, 1.0);
    // SRS (50 occurrences) still counts toward the plain macro.
    assert!((report.f1_macro - 6.0 / 20.0).abs() < 1e-12);

    println!(
        "ACCEPTANCE 6 PASS: metric suite equals the brute-force oracle exactly on \
         100 random pairs; weighted == macro on the balanced case; thresholds drop \
         exactly the sub-100/200 classes"
    );
}

// ---------------------------------------------------------------------
// Criterion 7: window shapes are (30 x 50) and (120 x 50) for every t
// including boundaries, and both windows end on frame t.
// ---------------------------------------------------------------------

#[test]
fn criterion_7_window_shape_invariants() {
    let mut cfg = ScenarioConfig::preset("occluded-noisy").unwrap();
    cfg.n_frames = 1400;
    cfg.seed = 7;
    let session = generate_batch(&cfg, 1).remove(0);
    let table = FeatureTable::build(&session.bundle);

    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let mut ts: Vec<usize> = vec![0, 1, 28, 29, 30, 1189, 1190, 1191, 1399];
    ts.extend((0..300).map(|_| rng.gen_range(0..1400)));

    let zero = vec![0.0; STEP_DIM];
    for &t in &ts {
        for hand in HandId::ALL {
            let pair = table.window_pair(hand, t).unwrap();
            assert_eq!(pair.high.steps(), HIGH_STEPS);
            assert_eq!(pair.low.steps(), LOW_STEPS);
            for i in 0..HIGH_STEPS {
                assert_eq!(pair.high.step(i).len(), STEP_DIM);
                let frame = t as isize - (HIGH_STEPS - 1 - i) as isize;
                if frame < 0 {
                    assert_eq!(pair.high.step(i), zero.as_slice());
                } else {
                    assert_eq!(pair.high.step(i), table.row(hand, frame as usize));
                }
            }
            for i in 0..LOW_STEPS {
                assert_eq!(pair.low.step(i).len(), STEP_DIM);
                let frame = t as isize - ((LOW_STEPS - 1 - i) * LOW_STRIDE) as isize;
                if frame < 0 {
                    assert_eq!(pair.low.step(i), zero.as_slice());
                } else {
                    assert_eq!(pair.low.step(i), table.row(hand, frame as usize));
                }
            }
            assert_eq!(pair.high.step(HIGH_STEPS - 1), pair.low.step(LOW_STEPS - 1));
        }
    }
    assert!(table.window_pair(HandId::SurgeonRight, 1400).is_err());
    println!(
        "ACCEPTANCE 7 PASS: window shapes ({HIGH_STEPS} x {STEP_DIM}) and \
         ({LOW_STEPS} x {STEP_DIM}) with aligned final steps over {} sampled frames",
        ts.len() * 4
    );
}

// ---------------------------------------------------------------------
// Criterion 8: the whole pipeline (simulate -> train -> evaluate) is
// byte-deterministic given a fixed seed.
// ---------------------------------------------------------------------

#[test]
fn criterion_8_end_to_end_determinism() {
    fn full_run() -> (String, String, String) {
        let mut cfg = ScenarioConfig::preset("occluded-noisy").unwrap();
        cfg.n_frames = 400;
        cfg.seed = 88;
        let sessions: Vec<SessionBundle> = generate_batch(&cfg, 4)
            .into_iter()
            .map(|s| s.bundle)
            .collect();
        let report = run_experiment(
            &sessions,
            &ExperimentConfig {
                k_folds: 2,
                seed: 21,
                variants: vec![EvalVariant::BothNaive, EvalVariant::Mcc],
                train: Some(TrainConfig {
                    epochs: 3,
                    learning_rate: 1e-3,
                    dropout_p: 0.3,
                    batch_size: 16,
                    seed: 2,
                    optimizer: OptimizerKind::Adam,
                    samples_per_video_per_epoch: 16,
                    class_weights: None,
                }),
            },
        )
        .unwrap();
        (
            report.to_json(),
            render_summary_csv(&report, true).unwrap(),
            render_per_class_csv(&report).unwrap(),
        )
    }
    let (json_a, summary_a, per_class_a) = full_run();
    let (json_b, summary_b, per_class_b) = full_run();
    assert_eq!(json_a, json_b, "report JSON differs between runs");
    assert_eq!(summary_a, summary_b, "summary CSV differs between runs");
    assert_eq!(per_class_a, per_class_b, "per-class CSV differs between runs");
    println!(
        "ACCEPTANCE 8 PASS: simulate -> train -> evaluate reproduced byte-identical \
         reports ({} bytes of JSON) across two runs",
        json_a.len()
    );
}
