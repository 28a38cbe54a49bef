//! CART decision trees and bagged forests.
//!
//! Three ensemble kinds share one training loop: a plain random forest, a
//! balanced random forest (RUS to parity inside each bootstrap), and the
//! SRN-BRF variant (SMOTE-RUS-NC inside each bootstrap). Each tree's RNG
//! streams derive solely from `(seed, tree index)`, so parallel and serial
//! training produce identical models.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng;
use crate::samplers::{self, ResampleSummary, SamplerConfig};

const MIN_SAMPLES_SPLIT: usize = 2;
const MAX_BOOTSTRAP_REDRAWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        pos: u32,
        neg: u32,
    },
}

/// How many candidate features each node draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureRule {
    /// ceil(sqrt(d)) features, drawn fresh per node.
    Sqrt,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForestKind {
    PlainRf,
    Brf,
    SrnBrf,
}

impl std::fmt::Display for ForestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ForestKind::PlainRf => write!(f, "rf"),
            ForestKind::Brf => write!(f, "brf"),
            ForestKind::SrnBrf => write!(f, "srn-brf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    weighted_gini: f64,
}

fn gini(pos: usize, neg: usize) -> f64 {
    let total = (pos + neg) as f64;
    if total == 0.0 {
        return 0.0;
    }
    let p = pos as f64 / total;
    let q = neg as f64 / total;
    1.0 - p * p - q * q
}

impl DecisionTree {
    /// Greedy CART with Gini impurity. Grows until pure, until fewer than
    /// two rows remain, or until no candidate split reduces impurity; no
    /// depth cap. Split ties break to (lower feature index, lower threshold).
    pub fn train(data: &LabeledDataset, rule: FeatureRule, seed: u64) -> DecisionTree {
        let mut rng = rng::stream(seed, "grow", 0);
        let d = data.n_features();
        let m = match rule {
            FeatureRule::Sqrt => (d as f64).sqrt().ceil() as usize,
            FeatureRule::All => d,
        };
        let mut nodes: Vec<TreeNode> = Vec::new();
        // Worklist of (row set, slot to patch). Children are pushed right
        // first so the left child is processed (and numbered) first;
        // the RNG is consumed in deterministic preorder.
        let all_rows: Vec<u32> = (0..data.n_rows() as u32).collect();
        let mut stack: Vec<(Vec<u32>, Option<(usize, bool)>)> = vec![(all_rows, None)];
        let mut scratch: Vec<(f64, bool)> = Vec::new();

        while let Some((rows, patch)) = stack.pop() {
            let pos = rows
                .iter()
                .filter(|&&i| data.label(i as usize).is_positive())
                .count();
            let neg = rows.len() - pos;
            let node_idx = nodes.len();
            if let Some((parent, is_right)) = patch {
                if let TreeNode::Split { left, right, .. } = &mut nodes[parent] {
                    if is_right {
                        *right = node_idx;
                    } else {
                        *left = node_idx;
                    }
                }
            }

            let parent_gini = gini(pos, neg);
            let splittable = pos > 0 && neg > 0 && rows.len() >= MIN_SAMPLES_SPLIT;
            let choice = if splittable {
                let mut candidates =
                    rand::seq::index::sample(&mut rng, d, m.min(d)).into_vec();
                candidates.sort_unstable();
                best_split(data, &rows, &candidates, parent_gini, &mut scratch)
            } else {
                None
            };

            match choice {
                Some(split) => {
                    let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
                    for &i in &rows {
                        if data.row(i as usize)[split.feature] <= split.threshold {
                            left_rows.push(i);
                        } else {
                            right_rows.push(i);
                        }
                    }
                    debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());
                    nodes.push(TreeNode::Split {
                        feature: split.feature,
                        threshold: split.threshold,
                        left: 0,
                        right: 0,
                    });
                    stack.push((right_rows, Some((node_idx, true))));
                    stack.push((left_rows, Some((node_idx, false))));
                }
                None => {
                    nodes.push(TreeNode::Leaf {
                        pos: pos as u32,
                        neg: neg as u32,
                    });
                }
            }
        }
        DecisionTree { nodes }
    }

    /// Leaf counts for one row.
    fn leaf(&self, row: &[f64]) -> (u32, u32) {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { pos, neg } => return (*pos, *neg),
            }
        }
    }

    /// This tree's vote for one row. A leaf tie goes to the positive
    /// (minority) class.
    pub fn predict_row(&self, row: &[f64]) -> Label {
        let (pos, neg) = self.leaf(row);
        if pos >= neg {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Scan candidate features for the impurity-minimizing midpoint threshold.
fn best_split(
    data: &LabeledDataset,
    rows: &[u32],
    candidates: &[usize],
    parent_gini: f64,
    scratch: &mut Vec<(f64, bool)>,
) -> Option<SplitChoice> {
    let total = rows.len();
    let total_pos = rows
        .iter()
        .filter(|&&i| data.label(i as usize).is_positive())
        .count();
    let mut best: Option<SplitChoice> = None;

    for &feature in candidates {
        scratch.clear();
        scratch.extend(rows.iter().map(|&i| {
            (
                data.row(i as usize)[feature],
                data.label(i as usize).is_positive(),
            )
        }));
        scratch.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut left_pos = 0usize;
        for i in 0..total - 1 {
            if scratch[i].1 {
                left_pos += 1;
            }
            let (v, next) = (scratch[i].0, scratch[i + 1].0);
            if v == next {
                continue;
            }
            let left_n = i + 1;
            let right_n = total - left_n;
            let right_pos = total_pos - left_pos;
            let wg = (left_n as f64 * gini(left_pos, left_n - left_pos)
                + right_n as f64 * gini(right_pos, right_n - right_pos))
                / total as f64;
            if best.as_ref().map_or(true, |b| wg < b.weighted_gini) {
                let mut threshold = v + (next - v) / 2.0;
                // Midpoint of adjacent floats can round up to the right
                // value; fall back to the left value so `x <= threshold`
                // matches the scan counts.
                if threshold >= next {
                    threshold = v;
                }
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    weighted_gini: wg,
                });
            }
        }
    }
    best.filter(|b| b.weighted_gini < parent_gini)
}

/// Per-tree training provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeAudit {
    /// Rows in the training set the tree actually saw (post-balancing).
    pub n_train_rows: usize,
    /// Whether the stratified bootstrap fallback fired.
    pub stratified_fallback: bool,
    /// Balancing bookkeeping for brf / srn-brf trees.
    pub resample: Option<ResampleSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<DecisionTree>,
    kind: ForestKind,
    n_features: usize,
    config: SamplerConfig,
    seed: u64,
    audits: Vec<TreeAudit>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: ForestModel,
}

const MODEL_FORMAT: &str = "srn-forest";
const MODEL_VERSION: u32 = 1;

impl ForestModel {
    /// Train `n_trees` CART trees on balanced bootstraps.
    ///
    /// Per tree `t`, streams derive from `(seed, t)`: a size-n bootstrap with
    /// replacement, then (brf) RUS at alpha = 1 or (srn-brf) the full
    /// SMOTE-RUS-NC pipeline, then sqrt-feature CART growth. A bootstrap
    /// missing a class is redrawn up to ten times before a stratified
    /// per-class bootstrap is used instead.
    pub fn train(
        data: &LabeledDataset,
        kind: ForestKind,
        n_trees: usize,
        config: &SamplerConfig,
        seed: u64,
    ) -> Result<ForestModel> {
        if n_trees == 0 {
            return Err(Error::InvalidInput("n_trees must be >= 1".into()));
        }
        config.validate()?;
        let (pos, neg) = data.count_labels();
        let single_class = pos == 0 || neg == 0;
        if single_class && kind != ForestKind::PlainRf {
            return Err(Error::InvalidInput(
                "balanced forests require both classes in the training data".into(),
            ));
        }

        let results: Result<Vec<(DecisionTree, TreeAudit)>> = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let t64 = t as u64;
                let mut boot_rng = rng::stream(seed, "bootstrap", t64);
                let n = data.n_rows();
                let mut indices: Vec<usize> = Vec::with_capacity(n);
                let mut fallback = false;
                if single_class {
                    indices.extend((0..n).map(|_| boot_rng.gen_range(0..n)));
                } else {
                    let mut ok = false;
                    for _ in 0..=MAX_BOOTSTRAP_REDRAWS {
                        indices.clear();
                        indices.extend((0..n).map(|_| boot_rng.gen_range(0..n)));
                        let has_pos = indices.iter().any(|&i| data.label(i).is_positive());
                        let has_neg = indices.iter().any(|&i| !data.label(i).is_positive());
                        if has_pos && has_neg {
                            ok = true;
                            break;
                        }
                    }
                    if !ok {
                        // Stratified fallback: bootstrap each class onto its
                        // own count, preserving the class ratio exactly.
                        fallback = true;
                        indices.clear();
                        for class in [Label::Positive, Label::Negative] {
                            let members: Vec<usize> = (0..n)
                                .filter(|&i| data.label(i) == class)
                                .collect();
                            indices.extend(
                                (0..members.len())
                                    .map(|_| members[boot_rng.gen_range(0..members.len())]),
                            );
                        }
                    }
                }
                let bootstrap = data.subset(&indices)?;

                let sampler_seed = rng::derive(seed, "sampler", t64);
                let (train_data, resample) = match kind {
                    ForestKind::PlainRf => (bootstrap, None),
                    ForestKind::Brf => {
                        let out = samplers::rus(&bootstrap, 1.0, sampler_seed)?;
                        (out.data.clone(), Some(out.summary()))
                    }
                    ForestKind::SrnBrf => {
                        let cfg = config.with_seed(sampler_seed);
                        let out = samplers::smote_rus_nc(&bootstrap, &cfg)?;
                        (out.data.clone(), Some(out.summary()))
                    }
                };

                let tree = DecisionTree::train(
                    &train_data,
                    FeatureRule::Sqrt,
                    rng::derive(seed, "tree", t64),
                );
                let audit = TreeAudit {
                    n_train_rows: train_data.n_rows(),
                    stratified_fallback: fallback,
                    resample,
                };
                Ok((tree, audit))
            })
            .collect();

        let (trees, audits): (Vec<_>, Vec<_>) = results?.into_iter().unzip();
        Ok(ForestModel {
            trees,
            kind,
            n_features: data.n_features(),
            config: config.clone(),
            seed,
            audits,
        })
    }

    pub fn kind(&self) -> ForestKind {
        self.kind
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn audits(&self) -> &[TreeAudit] {
        &self.audits
    }

    fn check_rows(&self, values: &[f64]) -> Result<usize> {
        if self.n_features == 0 || values.len() % self.n_features != 0 {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: values.len() % self.n_features.max(1),
            });
        }
        Ok(values.len() / self.n_features)
    }

    /// Fraction of trees voting positive, per row.
    pub fn predict_score(&self, values: &[f64]) -> Result<Vec<f64>> {
        let n = self.check_rows(values)?;
        let scores = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = &values[i * self.n_features..(i + 1) * self.n_features];
                let votes = self
                    .trees
                    .iter()
                    .filter(|t| t.predict_row(row).is_positive())
                    .count();
                votes as f64 / self.trees.len() as f64
            })
            .collect();
        Ok(scores)
    }

    /// Majority vote across trees; a forest tie goes to positive.
    pub fn predict(&self, values: &[f64]) -> Result<Vec<Label>> {
        Ok(self
            .predict_score(values)?
            .into_iter()
            .map(|s| {
                if s >= 0.5 {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let wrapper = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer(BufWriter::new(file), &wrapper)
            .map_err(|e| Error::InvalidInput(format!("model serialization failed: {e}")))
    }

    pub fn load(path: &Path) -> Result<ForestModel> {
        let file = File::open(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let wrapper: ModelFile = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::InvalidInput(format!("model deserialization failed: {e}")))?;
        if wrapper.format != MODEL_FORMAT || wrapper.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model file: format {:?} version {}",
                wrapper.format, wrapper.version
            )));
        }
        Ok(wrapper.model)
    }
}
