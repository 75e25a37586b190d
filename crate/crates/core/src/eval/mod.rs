//! Metric suite, cross-validation protocol and experiment runner.
//!
//! Scoring counts hand-frames: every frame contributes one decision per
//! hand, attributed to the (hand, state) class of the ground truth, so
//! the 20x20 confusion matrix is block-diagonal over hands. Undefined
//! precision/recall/F1 (zero denominator) report as 0.

pub mod report;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::ingest::SessionBundle;
use crate::model::{class_decode, DetectionClass, HandId, LabelTimeline, N_CLASSES};
use crate::naive::{classify_session_naive, CameraSelection};
use crate::neural::{predict_with_table, train, TrainConfig, Variant};
use crate::sim::derive_seed;

/// Hand-frame confusion counts over the 20 (hand, state) classes; rows
/// are truth, columns are predictions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<u64>, // N_CLASSES x N_CLASSES row-major
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        ConfusionMatrix {
            counts: vec![0; N_CLASSES * N_CLASSES],
        }
    }

    pub fn record(&mut self, truth: DetectionClass, pred: DetectionClass) {
        self.counts[truth.id() * N_CLASSES + pred.id()] += 1;
    }

    pub fn count(&self, truth_id: usize, pred_id: usize) -> u64 {
        self.counts[truth_id * N_CLASSES + pred_id]
    }

    /// Accumulate every hand-frame of a (truth, prediction) pair.
    pub fn add_timelines(&mut self, truth: &LabelTimeline, pred: &LabelTimeline) -> Result<()> {
        if truth.n_frames() != pred.n_frames() {
            return Err(Error::domain(format!(
                "timeline length mismatch: truth {} vs prediction {}",
                truth.n_frames(),
                pred.n_frames()
            )));
        }
        for hand in HandId::ALL {
            for f in 0..truth.n_frames() {
                self.record(
                    DetectionClass::new(hand, truth.label(hand, f)),
                    DetectionClass::new(hand, pred.label(hand, f)),
                );
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..N_CLASSES).map(|c| self.count(c, c)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-class precision/recall/F1 plus the ground-truth occurrence count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub occurrence: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// The full metric suite for one evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub f1_weighted: f64,
    pub f1_macro: f64,
    pub f1_macro_min100: f64,
    pub f1_macro_min200: f64,
    pub per_class: Vec<ClassMetrics>,
}

/// Derive the metric suite from pooled confusion counts.
pub fn report_from_confusion(cm: &ConfusionMatrix) -> MetricsReport {
    let mut per_class = Vec::with_capacity(N_CLASSES);
    for c in 0..N_CLASSES {
        let tp = cm.count(c, c) as f64;
        let occurrence: u64 = (0..N_CLASSES).map(|p| cm.count(c, p)).sum();
        let predicted: u64 = (0..N_CLASSES).map(|t| cm.count(t, c)).sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if occurrence == 0 { 0.0 } else { tp / occurrence as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let (hand, state) = class_decode(c).expect("class id in range");
        per_class.push(ClassMetrics {
            class: DetectionClass::new(hand, state).code(),
            occurrence,
            precision,
            recall,
            f1,
        });
    }

    let total_occ: u64 = per_class.iter().map(|c| c.occurrence).sum();
    let f1_weighted = if total_occ == 0 {
        0.0
    } else {
        per_class
            .iter()
            .map(|c| c.f1 * c.occurrence as f64)
            .sum::<f64>()
            / total_occ as f64
    };
    let macro_over = |min_occ: u64| -> f64 {
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

    MetricsReport {
        accuracy: cm.accuracy(),
        f1_weighted,
        f1_macro: macro_over(0),
        f1_macro_min100: macro_over(100),
        f1_macro_min200: macro_over(200),
        per_class,
    }
}

/// Score a prediction against the ground truth of one session.
pub fn score(truth: &LabelTimeline, pred: &LabelTimeline) -> Result<MetricsReport> {
    let mut cm = ConfusionMatrix::new();
    cm.add_timelines(truth, pred)?;
    Ok(report_from_confusion(&cm))
}

/// Field-wise mean of fold reports. Aggregate scores and per-class
/// metrics are averaged; occurrences are summed so the per-class rows
/// show the total test-set frame counts.
pub fn mean_report(reports: &[MetricsReport]) -> MetricsReport {
    assert!(!reports.is_empty(), "mean of zero reports");
    let n = reports.len() as f64;
    let per_class = (0..N_CLASSES)
        .map(|c| ClassMetrics {
            class: reports[0].per_class[c].class.clone(),
            occurrence: reports.iter().map(|r| r.per_class[c].occurrence).sum(),
            precision: reports.iter().map(|r| r.per_class[c].precision).sum::<f64>() / n,
            recall: reports.iter().map(|r| r.per_class[c].recall).sum::<f64>() / n,
            f1: reports.iter().map(|r| r.per_class[c].f1).sum::<f64>() / n,
        })
        .collect();
    MetricsReport {
        accuracy: reports.iter().map(|r| r.accuracy).sum::<f64>() / n,
        f1_weighted: reports.iter().map(|r| r.f1_weighted).sum::<f64>() / n,
        f1_macro: reports.iter().map(|r| r.f1_macro).sum::<f64>() / n,
        f1_macro_min100: reports.iter().map(|r| r.f1_macro_min100).sum::<f64>() / n,
        f1_macro_min200: reports.iter().map(|r| r.f1_macro_min200).sum::<f64>() / n,
        per_class,
    }
}

/// One cross-validation fold: whole sessions are held out, never
/// individual frames.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Split session ids into `k` disjoint test partitions covering all
/// sessions. Deterministic given the seed.
pub fn make_folds(session_ids: &[String], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::domain(format!(
            "{k}-fold split defines no held-out data; need k >= 2"
        )));
    }
    if k > session_ids.len() {
        return Err(Error::domain(format!(
            "cannot make {k} folds from {} sessions",
            session_ids.len()
        )));
    }
    let mut shuffled: Vec<String> = session_ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let base = shuffled.len() / k;
    let extra = shuffled.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut cursor = 0usize;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        let test: Vec<String> = shuffled[cursor..cursor + size].to_vec();
        let train: Vec<String> = shuffled[..cursor]
            .iter()
            .chain(&shuffled[cursor + size..])
            .cloned()
            .collect();
        folds.push(Fold { train, test });
        cursor += size;
    }
    Ok(folds)
}

/// The six systems an experiment can evaluate, in canonical report
/// column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EvalVariant {
    TopNaive,
    CloseNaive,
    BothNaive,
    LowFps,
    HighFps,
    Mcc,
}

impl EvalVariant {
    pub const ALL: [EvalVariant; 6] = [
        EvalVariant::TopNaive,
        EvalVariant::CloseNaive,
        EvalVariant::BothNaive,
        EvalVariant::LowFps,
        EvalVariant::HighFps,
        EvalVariant::Mcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EvalVariant::TopNaive => "top-naive",
            EvalVariant::CloseNaive => "close-naive",
            EvalVariant::BothNaive => "both-naive",
            EvalVariant::LowFps => "low-fps",
            EvalVariant::HighFps => "high-fps",
            EvalVariant::Mcc => "mcc",
        }
    }

    /// Column label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            EvalVariant::TopNaive => "Top naive",
            EvalVariant::CloseNaive => "Close naive",
            EvalVariant::BothNaive => "Both naive",
            EvalVariant::LowFps => "Low fps",
            EvalVariant::HighFps => "High fps",
            EvalVariant::Mcc => "MCC",
        }
    }

    pub fn parse(s: &str) -> Result<EvalVariant> {
        Self::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown evaluation variant `{s}`")))
    }

    pub fn neural(self) -> Option<Variant> {
        match self {
            EvalVariant::HighFps => Some(Variant::HighOnly),
            EvalVariant::LowFps => Some(Variant::LowOnly),
            EvalVariant::Mcc => Some(Variant::Mcc),
            _ => None,
        }
    }

    pub fn cameras(self) -> Option<CameraSelection> {
        match self {
            EvalVariant::TopNaive => Some(CameraSelection::Top),
            EvalVariant::CloseNaive => Some(CameraSelection::Close),
            EvalVariant::BothNaive => Some(CameraSelection::Both),
            _ => None,
        }
    }
}

/// Cross-validated experiment description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub k_folds: usize,
    pub seed: u64,
    pub variants: Vec<EvalVariant>,
    /// Training recipe for the trainable variants; may be `None` when
    /// only rule-based variants are evaluated.
    pub train: Option<TrainConfig>,
}

/// Metrics of one variant across folds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub per_fold: Vec<MetricsReport>,
    pub mean: MetricsReport,
}

/// Everything an experiment produced, serializable as the report JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub k_folds: usize,
    pub folds: Vec<Fold>,
    pub variants: Vec<String>,
    pub results: BTreeMap<String, VariantOutcome>,
}

impl ExperimentReport {
    pub fn outcome(&self, variant: EvalVariant) -> Option<&VariantOutcome> {
        self.results.get(variant.name())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Run the cross-validated comparison: for each fold, train the
/// requested trainable variants on the training sessions, evaluate
/// every variant on the held-out sessions (pooling hand-frames within
/// a fold), then average the fold metrics.
pub fn run_experiment(
    sessions: &[SessionBundle],
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if cfg.variants.is_empty() {
        return Err(Error::domain("no variants requested"));
    }
    // Canonical column order regardless of request order; training
    // seeds derive from positions in this list, so results do not
    // depend on how the request was spelled.
    let ordered_variants: Vec<EvalVariant> = EvalVariant::ALL
        .iter()
        .copied()
        .filter(|v| cfg.variants.contains(v))
        .collect();
    let needs_training: Vec<Variant> =
        ordered_variants.iter().filter_map(|v| v.neural()).collect();
    let train_template = match (&cfg.train, needs_training.is_empty()) {
        (Some(tc), _) => Some(tc.clone()),
        (None, true) => None,
        (None, false) => {
            return Err(Error::domain(
                "trainable variant requested but no training configuration given",
            ))
        }
    };
    for s in sessions {
        if s.truth.is_none() {
            return Err(Error::domain(format!(
                "session `{}` has no ground-truth labels",
                s.session_id
            )));
        }
    }
    let ids: Vec<String> = sessions.iter().map(|s| s.session_id.clone()).collect();
    {
        let mut unique = ids.clone();
        unique.sort();
        unique.dedup();
        if unique.len() != ids.len() {
            return Err(Error::domain("duplicate session ids in dataset"));
        }
    }
    let by_id: BTreeMap<&str, &SessionBundle> = sessions
        .iter()
        .map(|s| (s.session_id.as_str(), s))
        .collect();
    let folds = make_folds(&ids, cfg.k_folds, cfg.seed)?;

    let mut per_variant_folds: BTreeMap<EvalVariant, Vec<MetricsReport>> = BTreeMap::new();
    for (fold_idx, fold) in folds.iter().enumerate() {
        let train_sessions: Vec<&SessionBundle> =
            fold.train.iter().map(|id| by_id[id.as_str()]).collect();
        let test_sessions: Vec<&SessionBundle> =
            fold.test.iter().map(|id| by_id[id.as_str()]).collect();

        let mut trained = BTreeMap::new();
        if let Some(template) = &train_template {
            for (vi, &variant) in needs_training.iter().enumerate() {
                let mut tc = template.clone();
                tc.seed = derive_seed(
                    cfg.seed.wrapping_add(template.seed),
                    (fold_idx * 8 + vi) as u64,
                );
                let outcome = train(train_sessions.iter().copied(), variant, &tc)?;
                trained.insert(variant, outcome.params);
            }
        }

        let test_tables: Vec<Option<FeatureTable>> = if needs_training.is_empty() {
            test_sessions.iter().map(|_| None).collect()
        } else {
            test_sessions
                .iter()
                .map(|s| Some(FeatureTable::build(s)))
                .collect()
        };

        for &variant in &ordered_variants {
            let mut cm = ConfusionMatrix::new();
            for (s, table) in test_sessions.iter().zip(&test_tables) {
                let truth = s.truth.as_ref().expect("validated above");
                let pred = match (variant.cameras(), variant.neural()) {
                    (Some(cameras), _) => classify_session_naive(s, cameras),
                    (None, Some(nv)) => {
                        let params = &trained[&nv];
                        predict_with_table(params, table.as_ref().expect("table built"))
                    }
                    (None, None) => unreachable!("variant is naive or neural"),
                };
                cm.add_timelines(truth, &pred)?;
            }
            per_variant_folds
                .entry(variant)
                .or_default()
                .push(report_from_confusion(&cm));
        }
    }

    let mut results = BTreeMap::new();
    for (variant, per_fold) in per_variant_folds {
        let mean = mean_report(&per_fold);
        results.insert(
            variant.name().to_string(),
            VariantOutcome { per_fold, mean },
        );
    }
    Ok(ExperimentReport {
        seed: cfg.seed,
        k_folds: cfg.k_folds,
        folds,
        variants: ordered_variants.iter().map(|v| v.name().to_string()).collect(),
        results,
    })
}
