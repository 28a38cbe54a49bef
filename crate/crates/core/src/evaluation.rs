//! Stratified cross-validation and confusion-derived metrics.
//!
//! Sampling is applied inside each training fold only; test partitions are
//! never visible to a sampler or learner, which rules out the
//! resample-then-split leakage failure by construction. Per-fold metrics
//! are averaged over the folds where they are defined.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::forest::{ForestKind, ForestModel};
use crate::rng;
use crate::samplers::{self, SamplerConfig};

/// One train/test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// A full k-fold partition; shared across methods so every method sees the
/// same train/test splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    folds: Vec<Fold>,
    n_folds: usize,
    seed: u64,
}

impl FoldPlan {
    pub fn folds(&self) -> &[Fold] {
        &self.folds
    }

    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stable identity of the partition, for the same-partition guarantee
    /// in benchmark reports.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        let mut absorb = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        };
        absorb(self.n_folds as u64);
        for fold in &self.folds {
            absorb(u64::MAX); // fold delimiter
            for &i in &fold.test {
                absorb(i as u64);
            }
        }
        format!("{h:016x}")
    }
}

/// Stratified k-fold assignment: per class, indices are shuffled by seed and
/// dealt round-robin into folds, so per-class test counts differ by at most
/// one across folds.
pub fn stratified_kfold(labels: &[Label], n_folds: usize, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    if n_folds < 2 {
        return Err(Error::InvalidInput("n_folds must be >= 2".into()));
    }
    if n_folds > n {
        return Err(Error::InvalidInput(format!(
            "n_folds = {n_folds} exceeds {n} rows"
        )));
    }
    if !labels.iter().any(|l| l.is_positive()) || labels.iter().all(|l| l.is_positive()) {
        return Err(Error::InvalidInput(
            "stratification requires both classes present".into(),
        ));
    }

    let mut test_sets: Vec<Vec<usize>> = vec![Vec::new(); n_folds];
    for (class_id, class) in [Label::Positive, Label::Negative].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        let mut r = rng::stream(seed, "stratify", class_id as u64);
        members.shuffle(&mut r);
        for (j, &idx) in members.iter().enumerate() {
            test_sets[j % n_folds].push(idx);
        }
    }

    let folds = test_sets
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect();
    Ok(FoldPlan {
        folds,
        n_folds,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

/// Metrics of one fold. Each value is `None` when its denominator is zero
/// (e.g. sensitivity in a fold with no positive test rows).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub confusion: Confusion,
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub gmean: Option<f64>,
    pub roc_auc: Option<f64>,
}

/// Rank-based ROC-AUC (Mann-Whitney): probability a random positive outranks
/// a random negative, ties counted half.
fn rank_auc(truth: &[Label], scores: &[f64]) -> Option<f64> {
    let p = truth.iter().filter(|l| l.is_positive()).count();
    let n = truth.len() - p;
    if p == 0 || n == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the average rank.
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if truth[idx].is_positive() {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (p * (p + 1)) as f64 / 2.0;
    Some(u / (p as f64 * n as f64))
}

pub fn compute_metrics(
    truth: &[Label],
    predicted: &[Label],
    scores: &[f64],
) -> Result<FoldMetrics> {
    if truth.is_empty() || truth.len() != predicted.len() || truth.len() != scores.len() {
        return Err(Error::InvalidInput(format!(
            "metric inputs must be equal non-zero lengths ({}, {}, {})",
            truth.len(),
            predicted.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite score".into()));
    }

    let mut c = Confusion {
        tp: 0,
        fn_: 0,
        tn: 0,
        fp: 0,
    };
    for (t, p) in truth.iter().zip(predicted) {
        match (t.is_positive(), p.is_positive()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fp += 1,
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    let sensitivity = ratio(c.tp, c.tp + c.fn_);
    let specificity = ratio(c.tn, c.tn + c.fp);
    let gmean = match (sensitivity, specificity) {
        (Some(s), Some(p)) => Some((s * p).sqrt()),
        _ => None,
    };
    Ok(FoldMetrics {
        confusion: c,
        accuracy: ratio(c.tp + c.tn, truth.len()),
        sensitivity,
        specificity,
        gmean,
        roc_auc: rank_auc(truth, scores),
    })
}

/// Per-metric means over the folds where the metric is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub gmean: Option<f64>,
    pub roc_auc: Option<f64>,
    /// How many folds defined each metric, in the field order above.
    pub defined: [usize; 5],
}

impl MeanMetrics {
    pub fn from_folds(folds: &[FoldMetrics]) -> MeanMetrics {
        fn mean(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
            let defined: Vec<f64> = values.flatten().collect();
            if defined.is_empty() {
                (None, 0)
            } else {
                (
                    Some(defined.iter().sum::<f64>() / defined.len() as f64),
                    defined.len(),
                )
            }
        }
        let (accuracy, d0) = mean(folds.iter().map(|f| f.accuracy));
        let (sensitivity, d1) = mean(folds.iter().map(|f| f.sensitivity));
        let (specificity, d2) = mean(folds.iter().map(|f| f.specificity));
        let (gmean, d3) = mean(folds.iter().map(|f| f.gmean));
        let (roc_auc, d4) = mean(folds.iter().map(|f| f.roc_auc));
        MeanMetrics {
            accuracy,
            sensitivity,
            specificity,
            gmean,
            roc_auc,
            defined: [d0, d1, d2, d3, d4],
        }
    }
}

/// Cross-validated result of one (dataset, method) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub dataset_id: String,
    pub method_id: String,
    pub per_fold: Vec<FoldMetrics>,
    pub mean: MeanMetrics,
    pub chosen_alpha: Option<f64>,
    /// True when the alpha was picked by grid search on the reported folds
    /// (an optimistically biased protocol; consumers can discount it).
    pub grid_selected: bool,
    pub plan_hash: String,
}

/// Which resampling transform to apply to each training fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerId {
    None,
    Rus,
    Smote,
    Nc,
    Enn,
    Tomek,
    SmoteEnn,
    SmoteTomek,
    SmoteRusNc,
}

impl std::fmt::Display for SamplerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl SamplerId {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerId::None => "none",
            SamplerId::Rus => "rus",
            SamplerId::Smote => "smote",
            SamplerId::Nc => "nc",
            SamplerId::Enn => "enn",
            SamplerId::Tomek => "tomek",
            SamplerId::SmoteEnn => "smote-enn",
            SamplerId::SmoteTomek => "smote-tomek",
            SamplerId::SmoteRusNc => "smote-rus-nc",
        }
    }
}

/// The learner paired with every sampler: a plain random forest, kept
/// constant to isolate the sampler effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub n_trees: usize,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec { n_trees: 100 }
    }
}

fn apply_sampler(
    id: SamplerId,
    train: &LabeledDataset,
    config: &SamplerConfig,
) -> Result<LabeledDataset> {
    Ok(match id {
        SamplerId::None => train.clone(),
        // The standalone RUS baseline balances to parity, as does the RUS
        // stage inside BRF; config.alpha_rus steers SMOTE-RUS-NC only.
        SamplerId::Rus => samplers::rus(train, 1.0, config.seed)?.data,
        SamplerId::Smote => {
            samplers::smote(train, config.alpha_smote, config.k_smote, config.seed)?.data
        }
        SamplerId::Nc => samplers::nc(train, config.k_nc)?.data,
        SamplerId::Enn => samplers::enn(train, 3)?.data,
        SamplerId::Tomek => samplers::tomek(train)?.data,
        SamplerId::SmoteEnn => samplers::smote_enn(train, config)?.data,
        SamplerId::SmoteTomek => samplers::smote_tomek(train, config)?.data,
        SamplerId::SmoteRusNc => samplers::smote_rus_nc(train, config)?.data,
    })
}

fn run_folds<F>(data: &LabeledDataset, plan: &FoldPlan, per_fold: F) -> Result<Vec<FoldMetrics>>
where
    F: Fn(usize, &LabeledDataset) -> Result<ForestModel> + Sync,
{
    plan.folds()
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            debug_assert!(fold.train.iter().all(|i| !fold.test.contains(i)));
            let train = data.subset(&fold.train)?;
            let model = per_fold(f, &train)?;
            let test = data.subset(&fold.test)?;
            let scores = model.predict_score(test.values())?;
            let preds = model.predict(test.values())?;
            compute_metrics(test.labels(), &preds, &scores)
        })
        .collect()
}

/// Resample each training fold with `sampler`, train a plain forest on the
/// resampled data, and score the untouched test fold.
pub fn evaluate_sampler(
    data: &LabeledDataset,
    dataset_id: &str,
    sampler: SamplerId,
    config: &SamplerConfig,
    learner: &LearnerSpec,
    plan: &FoldPlan,
) -> Result<CvReport> {
    config.validate()?;
    let per_fold = run_folds(data, plan, |f, train| {
        let cfg = config.with_seed(rng::derive(config.seed, "fold-sampler", f as u64));
        let resampled = apply_sampler(sampler, train, &cfg)?;
        ForestModel::train(
            &resampled,
            ForestKind::PlainRf,
            learner.n_trees,
            &cfg,
            rng::derive(config.seed, "fold-learner", f as u64),
        )
    })?;
    Ok(CvReport {
        dataset_id: dataset_id.to_string(),
        method_id: sampler.as_str().to_string(),
        mean: MeanMetrics::from_folds(&per_fold),
        per_fold,
        chosen_alpha: None,
        grid_selected: false,
        plan_hash: plan.hash(),
    })
}

/// Train one of the ensemble models directly on each raw training fold
/// (their balancing is internal, per bootstrap).
pub fn evaluate_ensemble(
    data: &LabeledDataset,
    dataset_id: &str,
    kind: ForestKind,
    n_trees: usize,
    config: &SamplerConfig,
    plan: &FoldPlan,
) -> Result<CvReport> {
    config.validate()?;
    let per_fold = run_folds(data, plan, |f, train| {
        ForestModel::train(
            train,
            kind,
            n_trees,
            config,
            rng::derive(config.seed, "fold-model", f as u64),
        )
    })?;
    Ok(CvReport {
        dataset_id: dataset_id.to_string(),
        method_id: kind.to_string(),
        mean: MeanMetrics::from_folds(&per_fold),
        per_fold,
        chosen_alpha: None,
        grid_selected: false,
        plan_hash: plan.hash(),
    })
}

/// Evaluate SMOTE-RUS-NC once per grid value and keep the alpha maximizing
/// mean g-mean (first value wins ties). An empty grid falls back to the
/// 0.5 default.
pub fn evaluate_with_alpha_grid(
    data: &LabeledDataset,
    dataset_id: &str,
    config: &SamplerConfig,
    grid: &[f64],
    learner: &LearnerSpec,
    plan: &FoldPlan,
) -> Result<CvReport> {
    let fallback = [0.5];
    let grid = if grid.is_empty() { &fallback[..] } else { grid };
    let mut best: Option<(f64, f64, CvReport)> = None;
    for &alpha in grid {
        let cfg = SamplerConfig {
            alpha_rus: alpha,
            ..config.clone()
        };
        let report =
            evaluate_sampler(data, dataset_id, SamplerId::SmoteRusNc, &cfg, learner, plan)?;
        let score = report.mean.gmean.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().map_or(true, |(s, _, _)| score > *s) {
            best = Some((score, alpha, report));
        }
    }
    let (_, alpha, mut report) = best.expect("grid is non-empty");
    report.chosen_alpha = Some(alpha);
    report.grid_selected = grid.len() > 1;
    Ok(report)
}
