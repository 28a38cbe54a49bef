//! Resampling transforms for imbalanced binary data.
//!
//! Undersampling: RUS, ENN, NC (neighborhood cleaning), Tomek-link removal.
//! Oversampling: SMOTE. Composites: SMOTE-ENN, SMOTE-Tomek, and the
//! three-stage SMOTE-RUS-NC pipeline (NC cleaning, partial RUS, SMOTE to
//! parity).
//!
//! All samplers are pure functions of `(data, config)`. No sampler ever
//! removes an original minority row. Removal decisions for the neighbor-based
//! cleaners are made against the original data and applied at once (batch,
//! no cascading).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassStats, Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::neighbors::NeighborIndex;
use crate::rng;

/// Tunables of the resampling pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// RUS sampling ratio in (0, 1]: minority count over post-RUS majority count.
    pub alpha_rus: f64,
    /// Target minority count after SMOTE, as a fraction of the majority count.
    pub alpha_smote: f64,
    /// Neighborhood size for NC cleaning (odd).
    pub k_nc: usize,
    /// Neighbor pool size for SMOTE interpolation.
    pub k_smote: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            alpha_rus: 0.5,
            alpha_smote: 1.0,
            k_nc: 3,
            k_smote: 5,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_rus > 0.0 && self.alpha_rus <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha_rus must be in (0, 1], got {}",
                self.alpha_rus
            )));
        }
        if !(self.alpha_smote > 0.0) {
            return Err(Error::InvalidInput(format!(
                "alpha_smote must be > 0, got {}",
                self.alpha_smote
            )));
        }
        if self.k_nc == 0 || self.k_smote == 0 {
            return Err(Error::InvalidInput("k_nc and k_smote must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> SamplerConfig {
        SamplerConfig { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Nc,
    Rus,
    Smote,
    Enn,
    Tomek,
}

/// Class counts after one pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: Stage,
    pub stats: ClassStats,
}

/// Provenance of one synthetic row: indices into the outcome's data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    pub row: usize,
    pub source: usize,
    pub neighbor: usize,
}

/// Result of a resampling transform.
#[derive(Debug, Clone)]
pub struct ResampleOutcome {
    pub data: LabeledDataset,
    pub removed_majority: usize,
    pub synthesized_minority: usize,
    pub stage_counts: Vec<StageCount>,
    /// Source pairs of every synthetic row, for segment-membership audits.
    pub synthetics: Vec<SyntheticOrigin>,
}

/// Stage bookkeeping without the data, for per-tree audits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResampleSummary {
    pub removed_majority: usize,
    pub synthesized_minority: usize,
    pub stage_counts: Vec<StageCount>,
}

impl ResampleOutcome {
    fn passthrough(data: &LabeledDataset, stage: Stage) -> ResampleOutcome {
        ResampleOutcome {
            stage_counts: vec![stage_count(data, stage)],
            data: data.clone(),
            removed_majority: 0,
            synthesized_minority: 0,
            synthetics: Vec::new(),
        }
    }

    pub fn summary(&self) -> ResampleSummary {
        ResampleSummary {
            removed_majority: self.removed_majority,
            synthesized_minority: self.synthesized_minority,
            stage_counts: self.stage_counts.clone(),
        }
    }
}

fn stage_count(data: &LabeledDataset, stage: Stage) -> StageCount {
    let (pos, neg) = data.count_labels();
    StageCount {
        stage,
        stats: ClassStats::new(pos, neg),
    }
}

fn require_two_classes(data: &LabeledDataset) -> Result<(usize, usize)> {
    let (pos, neg) = data.count_labels();
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput(
            "resampling requires both classes present".into(),
        ));
    }
    Ok((pos, neg))
}

/// Drop the rows in `removed` (a sorted, deduplicated index list), keeping
/// survivors in original order.
fn drop_rows(data: &LabeledDataset, removed: &[usize]) -> Result<LabeledDataset> {
    let mut keep = Vec::with_capacity(data.n_rows() - removed.len());
    let mut r = 0;
    for i in 0..data.n_rows() {
        if r < removed.len() && removed[r] == i {
            r += 1;
        } else {
            keep.push(i);
        }
    }
    data.subset(&keep)
}

/// Random undersampling of the majority class.
///
/// Keeps `clamp(floor(n_min / alpha_rus), n_min, n_maj)` majority rows,
/// chosen uniformly without replacement; survivors stay in original order
/// and minority rows are untouched.
pub fn rus(data: &LabeledDataset, alpha_rus: f64, seed: u64) -> Result<ResampleOutcome> {
    if !(alpha_rus > 0.0 && alpha_rus <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha_rus must be in (0, 1], got {alpha_rus}"
        )));
    }
    let (n_min, n_maj) = require_two_classes(data)?;
    let target = (n_min as f64 / alpha_rus).floor() as usize;
    // Clamping absorbs degenerate ratios; the lower bound cannot exceed n_maj.
    let keep_maj = target.min(n_maj).max(n_min.min(n_maj));
    if keep_maj == n_maj {
        return Ok(ResampleOutcome::passthrough(data, Stage::Rus));
    }

    let majority_rows: Vec<usize> = (0..data.n_rows())
        .filter(|&i| !data.label(i).is_positive())
        .collect();
    let mut r = rng::stream(seed, "rus", 0);
    let mut picked = rand::seq::index::sample(&mut r, majority_rows.len(), keep_maj).into_vec();
    picked.sort_unstable();
    let mut removed: Vec<usize> = Vec::with_capacity(n_maj - keep_maj);
    let mut p = 0;
    for (local, &row) in majority_rows.iter().enumerate() {
        if p < picked.len() && picked[p] == local {
            p += 1;
        } else {
            removed.push(row);
        }
    }

    let out = drop_rows(data, &removed)?;
    Ok(ResampleOutcome {
        stage_counts: vec![stage_count(&out, Stage::Rus)],
        data: out,
        removed_majority: removed.len(),
        synthesized_minority: 0,
        synthetics: Vec::new(),
    })
}

/// SMOTE oversampling by segment interpolation between a minority row and
/// one of its `k_smote` nearest minority neighbors.
///
/// The post-sampling minority count is `round(alpha_smote * n_maj)`, clamped
/// to at least the current minority count. Synthetic rows are appended after
/// all originals. A lone minority row falls back to duplication.
pub fn smote(
    data: &LabeledDataset,
    alpha_smote: f64,
    k_smote: usize,
    seed: u64,
) -> Result<ResampleOutcome> {
    if !(alpha_smote > 0.0) {
        return Err(Error::InvalidInput(format!(
            "alpha_smote must be > 0, got {alpha_smote}"
        )));
    }
    if k_smote == 0 {
        return Err(Error::InvalidInput("k_smote must be >= 1".into()));
    }
    let (n_min, n_maj) = require_two_classes(data)?;
    let target = ((alpha_smote * n_maj as f64).round() as usize).max(n_min);
    let g = target - n_min;
    if g == 0 {
        return Ok(ResampleOutcome::passthrough(data, Stage::Smote));
    }

    let minority_rows: Vec<usize> = (0..data.n_rows())
        .filter(|&i| data.label(i).is_positive())
        .collect();
    let d = data.n_features();
    let mut r = rng::stream(seed, "smote", 0);
    let mut values = Vec::with_capacity(g * d);
    let mut synthetics = Vec::with_capacity(g);

    if n_min == 1 {
        // Degenerate fallback: random oversampling of the lone minority row.
        log::warn!("SMOTE fallback: single minority row duplicated {g} times");
        let src = minority_rows[0];
        for t in 0..g {
            values.extend_from_slice(data.row(src));
            synthetics.push(SyntheticOrigin {
                row: data.n_rows() + t,
                source: src,
                neighbor: src,
            });
        }
    } else {
        let k_eff = k_smote.min(n_min - 1);
        let buf: Vec<f64> = minority_rows
            .iter()
            .flat_map(|&i| data.row(i).iter().copied())
            .collect();
        let index = NeighborIndex::new(&buf, d)?;
        let neighbor_lists: Vec<Vec<usize>> = (0..n_min)
            .map(|i| {
                index
                    .knn(&buf[i * d..(i + 1) * d], k_eff, Some(i))
                    .map(|nb| nb.into_iter().map(|(j, _)| j).collect())
            })
            .collect::<Result<_>>()?;

        for t in 0..g {
            let src_local = r.gen_range(0..n_min);
            let nb_local = neighbor_lists[src_local][r.gen_range(0..k_eff)];
            let u: f64 = r.gen();
            let src = data.row(minority_rows[src_local]);
            let nb = data.row(minority_rows[nb_local]);
            for j in 0..d {
                values.push(src[j] + u * (nb[j] - src[j]));
            }
            synthetics.push(SyntheticOrigin {
                row: data.n_rows() + t,
                source: minority_rows[src_local],
                neighbor: minority_rows[nb_local],
            });
        }
    }

    let labels = vec![Label::Positive; g];
    let out = data.append(&values, &labels);
    Ok(ResampleOutcome {
        stage_counts: vec![stage_count(&out, Stage::Smote)],
        data: out,
        removed_majority: 0,
        synthesized_minority: g,
        synthetics,
    })
}

/// Edited-nearest-neighbor cleaning, restricted to majority rows: a majority
/// row whose k-NN vote (self excluded, on the original data) disagrees with
/// its label is removed.
pub fn enn(data: &LabeledDataset, k: usize) -> Result<ResampleOutcome> {
    require_two_classes(data)?;
    if k > data.n_rows() - 1 {
        return Err(Error::KTooLarge {
            k,
            eligible: data.n_rows() - 1,
        });
    }
    let index = NeighborIndex::from_dataset(data);
    let mut removed = Vec::new();
    for i in 0..data.n_rows() {
        if !data.label(i).is_positive() && index.label_vote(data.labels(), i, k)?.is_positive() {
            removed.push(i);
        }
    }
    let out = drop_rows(data, &removed)?;
    Ok(ResampleOutcome {
        stage_counts: vec![stage_count(&out, Stage::Enn)],
        data: out,
        removed_majority: removed.len(),
        synthesized_minority: 0,
        synthetics: Vec::new(),
    })
}

/// Neighborhood cleaning rule. Two batch rules on the original data:
/// (a) a misclassified majority row is removed; (b) for a misclassified
/// minority row, its majority neighbors are removed.
pub fn nc(data: &LabeledDataset, k_nc: usize) -> Result<ResampleOutcome> {
    require_two_classes(data)?;
    if k_nc > data.n_rows() - 1 {
        return Err(Error::KTooLarge {
            k: k_nc,
            eligible: data.n_rows() - 1,
        });
    }
    let index = NeighborIndex::from_dataset(data);
    let mut marked = vec![false; data.n_rows()];
    for i in 0..data.n_rows() {
        let vote = index.label_vote(data.labels(), i, k_nc)?;
        if vote == data.label(i) {
            continue;
        }
        if data.label(i).is_positive() {
            // Rule (b): remove the majority rows among this row's neighbors.
            for (j, _) in index.knn(data.row(i), k_nc, Some(i))? {
                if !data.label(j).is_positive() {
                    marked[j] = true;
                }
            }
        } else {
            // Rule (a).
            marked[i] = true;
        }
    }
    let removed: Vec<usize> = (0..data.n_rows()).filter(|&i| marked[i]).collect();
    let out = drop_rows(data, &removed)?;
    Ok(ResampleOutcome {
        stage_counts: vec![stage_count(&out, Stage::Nc)],
        data: out,
        removed_majority: removed.len(),
        synthesized_minority: 0,
        synthetics: Vec::new(),
    })
}

/// Tomek-link removal: for every cross-class pair of mutual 1-NNs found on
/// the original data, the majority member is removed.
pub fn tomek(data: &LabeledDataset) -> Result<ResampleOutcome> {
    require_two_classes(data)?;
    if data.n_rows() < 2 {
        return Err(Error::InvalidInput("tomek requires n >= 2".into()));
    }
    let index = NeighborIndex::from_dataset(data);
    let nn: Vec<usize> = (0..data.n_rows())
        .map(|i| Ok(index.knn(data.row(i), 1, Some(i))?[0].0))
        .collect::<Result<_>>()?;
    let mut marked = vec![false; data.n_rows()];
    for i in 0..data.n_rows() {
        let j = nn[i];
        if j > i && nn[j] == i && data.label(i) != data.label(j) {
            let majority_member = if data.label(i).is_positive() { j } else { i };
            marked[majority_member] = true;
        }
    }
    let removed: Vec<usize> = (0..data.n_rows()).filter(|&i| marked[i]).collect();
    let out = drop_rows(data, &removed)?;
    Ok(ResampleOutcome {
        stage_counts: vec![stage_count(&out, Stage::Tomek)],
        data: out,
        removed_majority: removed.len(),
        synthesized_minority: 0,
        synthetics: Vec::new(),
    })
}

/// Remap synthetic provenance through a cleaning stage. Minority rows are
/// never removed by the cleaners, so every referenced row survives.
fn remap_synthetics(
    synthetics: &[SyntheticOrigin],
    n_before: usize,
    removed: &[usize],
) -> Vec<SyntheticOrigin> {
    let mut new_index = vec![usize::MAX; n_before];
    let mut r = 0;
    let mut next = 0;
    for i in 0..n_before {
        if r < removed.len() && removed[r] == i {
            r += 1;
        } else {
            new_index[i] = next;
            next += 1;
        }
    }
    synthetics
        .iter()
        .map(|s| SyntheticOrigin {
            row: new_index[s.row],
            source: new_index[s.source],
            neighbor: new_index[s.neighbor],
        })
        .collect()
}

fn smote_then_clean(
    data: &LabeledDataset,
    config: &SamplerConfig,
    clean: impl Fn(&LabeledDataset) -> Result<ResampleOutcome>,
) -> Result<ResampleOutcome> {
    config.validate()?;
    let s = smote(data, 1.0, config.k_smote, config.seed)?;
    let cleaned = clean(&s.data)?;
    // Recover which rows the cleaner dropped to remap synthetic provenance.
    let removed: Vec<usize> = {
        let mut removed = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < s.data.n_rows() {
            if j < cleaned.data.n_rows()
                && s.data.row(i) == cleaned.data.row(j)
                && s.data.label(i) == cleaned.data.label(j)
            {
                j += 1;
            } else {
                removed.push(i);
            }
            i += 1;
        }
        removed
    };
    let mut stage_counts = s.stage_counts;
    stage_counts.extend(cleaned.stage_counts.iter().copied());
    Ok(ResampleOutcome {
        synthetics: remap_synthetics(&s.synthetics, s.data.n_rows(), &removed),
        data: cleaned.data,
        removed_majority: cleaned.removed_majority,
        synthesized_minority: s.synthesized_minority,
        stage_counts,
    })
}

/// SMOTE to parity, then Tomek-link cleaning of the augmented data.
pub fn smote_tomek(data: &LabeledDataset, config: &SamplerConfig) -> Result<ResampleOutcome> {
    smote_then_clean(data, config, tomek)
}

/// SMOTE to parity, then ENN (k = 3) cleaning of the augmented data.
pub fn smote_enn(data: &LabeledDataset, config: &SamplerConfig) -> Result<ResampleOutcome> {
    smote_then_clean(data, config, |d| enn(d, 3))
}

/// The three-stage hybrid pipeline:
///
/// 1. NC cleaning with `k_nc`.
/// 2. Early stop if the cleaned majority no longer outnumbers the minority.
/// 3. Partial RUS at `alpha_rus` (clamped to the cleaned majority count).
/// 4. SMOTE up to the post-RUS majority count (`alpha_smote` = 1 relative to
///    the post-RUS majority).
pub fn smote_rus_nc(data: &LabeledDataset, config: &SamplerConfig) -> Result<ResampleOutcome> {
    config.validate()?;
    let nc_out = nc(data, config.k_nc)?;
    let (n_min, n_nc_maj) = nc_out.data.count_labels();
    if n_nc_maj <= n_min {
        // Already balanced or minority-dominant: no RUS, no SMOTE.
        return Ok(nc_out);
    }
    let rus_out = rus(&nc_out.data, config.alpha_rus, config.seed)?;
    let smote_out = smote(
        &rus_out.data,
        config.alpha_smote,
        config.k_smote,
        config.seed,
    )?;

    let mut stage_counts = nc_out.stage_counts;
    stage_counts.extend(rus_out.stage_counts.iter().copied());
    stage_counts.extend(smote_out.stage_counts.iter().copied());
    Ok(ResampleOutcome {
        data: smote_out.data,
        removed_majority: nc_out.removed_majority + rus_out.removed_majority,
        synthesized_minority: smote_out.synthesized_minority,
        stage_counts,
        synthetics: smote_out.synthetics,
    })
}

/// All multiples of `step` in (0, 1] usable as `alpha_rus` given the
/// minority and post-NC majority counts, i.e. those with
/// `n_min / alpha < n_nc_maj`, ascending. Empty when no value qualifies.
pub fn alpha_grid(n_min: usize, n_nc_maj: usize, step: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    if n_min == 0 || step <= 0.0 {
        return grid;
    }
    let mut i = 1;
    loop {
        let alpha = i as f64 * step;
        if alpha > 1.0 + 1e-12 {
            break;
        }
        if n_min as f64 / alpha < n_nc_maj as f64 {
            grid.push(alpha);
        }
        i += 1;
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blob(
        rng: &mut impl Rng,
        n: usize,
        d: usize,
        center: f64,
        spread: f64,
        label: Label,
    ) -> (Vec<Vec<f64>>, Vec<Label>) {
        let rows = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| center + rng.gen_range(-spread..spread))
                    .collect()
            })
            .collect();
        (rows, vec![label; n])
    }

    fn two_blobs(
        seed: u64,
        n_pos: usize,
        n_neg: usize,
        d: usize,
        sep: f64,
        spread: f64,
    ) -> LabeledDataset {
        let mut rng = crate::rng::stream(seed, "sampler-test-blob", 0);
        let (mut rows, mut labels) = blob(&mut rng, n_pos, d, 0.0, spread, Label::Positive);
        let (r2, l2) = blob(&mut rng, n_neg, d, sep, spread, Label::Negative);
        rows.extend(r2);
        labels.extend(l2);
        LabeledDataset::from_rows(rows, labels).unwrap()
    }

    fn random_dataset(seed: u64, n: usize, d: usize, p_pos: f64) -> LabeledDataset {
        let mut rng = crate::rng::stream(seed, "sampler-test-rand", 0);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut labels: Vec<Label> = (0..n)
            .map(|_| {
                if rng.gen_bool(p_pos) {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect();
        // Guarantee both classes.
        labels[0] = Label::Positive;
        labels[1] = Label::Negative;
        LabeledDataset::from_rows(rows, labels).unwrap()
    }

    // ---- RUS ----

    #[test]
    fn rus_alpha_one_balances() {
        let ds = two_blobs(1, 100, 10_000, 3, 10.0, 1.0);
        let out = rus(&ds, 1.0, 7).unwrap();
        assert_eq!(out.removed_majority, 9_900);
        let (pos, neg) = out.data.count_labels();
        assert_eq!((pos, neg), (100, 100));
    }

    #[test]
    fn rus_alpha_half_keeps_double() {
        let ds = two_blobs(2, 100, 10_000, 3, 10.0, 1.0);
        let out = rus(&ds, 0.5, 7).unwrap();
        let (_, neg) = out.data.count_labels();
        assert_eq!(neg, 200);
    }

    #[test]
    fn rus_clamps_to_current_majority() {
        let ds = two_blobs(3, 100, 150, 3, 10.0, 1.0);
        let out = rus(&ds, 0.5, 7).unwrap();
        assert_eq!(out.removed_majority, 0);
        assert_eq!(out.data, ds);
    }

    #[test]
    fn rus_survivors_keep_original_order() {
        let ds = random_dataset(4, 60, 2, 0.2);
        let out = rus(&ds, 1.0, 11).unwrap();
        // Every output row must appear in the input in the same relative order.
        let mut cursor = 0;
        for i in 0..out.data.n_rows() {
            let mut found = false;
            while cursor < ds.n_rows() {
                if ds.row(cursor) == out.data.row(i) && ds.label(cursor) == out.data.label(i) {
                    found = true;
                    cursor += 1;
                    break;
                }
                cursor += 1;
            }
            assert!(found, "row {i} out of order");
        }
    }

    #[test]
    fn rus_size_contract_randomized() {
        for trial in 0..200 {
            let n_pos = 2 + (trial % 17);
            let n_neg = 3 + (trial * 7) % 120;
            let ds = random_sized(trial as u64, n_pos, n_neg);
            let alpha = [0.1, 0.25, 0.5, 0.75, 1.0][trial % 5];
            let out = rus(&ds, alpha, trial as u64).unwrap();
            let (pos, neg) = out.data.count_labels();
            let target = (n_pos as f64 / alpha).floor() as usize;
            let want = target.min(n_neg).max(n_pos.min(n_neg));
            assert_eq!(pos, n_pos);
            assert_eq!(neg, want);
        }
    }

    fn random_sized(seed: u64, n_pos: usize, n_neg: usize) -> LabeledDataset {
        let mut rng = crate::rng::stream(seed, "sampler-test-sized", 0);
        let n = n_pos + n_neg;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut labels = vec![Label::Positive; n_pos];
        labels.extend(vec![Label::Negative; n_neg]);
        LabeledDataset::from_rows(rows, labels).unwrap()
    }

    // ---- SMOTE ----

    #[test]
    fn smote_balanced_input_is_identity() {
        let ds = two_blobs(5, 50, 50, 2, 6.0, 1.0);
        let out = smote(&ds, 1.0, 5, 3).unwrap();
        assert_eq!(out.data, ds);
        assert_eq!(out.synthesized_minority, 0);
    }

    #[test]
    fn smote_two_point_synthetics_are_collinear() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![4.0, 2.0],
            vec![10.0, 10.0],
            vec![11.0, 10.0],
        ];
        let labels = vec![
            Label::Positive,
            Label::Positive,
            Label::Negative,
            Label::Negative,
        ];
        // G = 50 requires target 52 minority; alpha_smote = 26 with 2 majority.
        let ds = LabeledDataset::from_rows(rows, labels).unwrap();
        let out = smote(&ds, 26.0, 5, 9).unwrap();
        assert_eq!(out.synthesized_minority, 50);
        let p = [0.0, 0.0];
        let q = [4.0, 2.0];
        for s in &out.synthetics {
            let row = out.data.row(s.row);
            // Residual distance from the p-q segment.
            let t = ((row[0] - p[0]) * (q[0] - p[0]) + (row[1] - p[1]) * (q[1] - p[1]))
                / ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2));
            let t = t.clamp(0.0, 1.0);
            let proj = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
            let resid = ((row[0] - proj[0]).powi(2) + (row[1] - proj[1]).powi(2)).sqrt();
            assert!(resid < 1e-9, "synthetic off segment: {resid}");
        }
    }

    /// Replay the documented sampling procedure with the same stream and
    /// check the synthetic rows match exactly.
    #[test]
    fn smote_matches_rng_replay() {
        let ds = two_blobs(6, 20, 100, 4, 8.0, 1.0);
        let seed = 31;
        let out = smote(&ds, 1.0, 5, seed).unwrap();
        assert_eq!(out.synthesized_minority, 80);

        let minority: Vec<usize> = (0..ds.n_rows())
            .filter(|&i| ds.label(i).is_positive())
            .collect();
        let d = ds.n_features();
        let buf: Vec<f64> = minority
            .iter()
            .flat_map(|&i| ds.row(i).iter().copied())
            .collect();
        let index = NeighborIndex::new(&buf, d).unwrap();
        let lists: Vec<Vec<usize>> = (0..20)
            .map(|i| {
                index
                    .knn(&buf[i * d..(i + 1) * d], 5, Some(i))
                    .unwrap()
                    .into_iter()
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        let mut r = crate::rng::stream(seed, "smote", 0);
        for (t, s) in out.synthetics.iter().enumerate() {
            let src_local = r.gen_range(0..20usize);
            let nb_local = lists[src_local][r.gen_range(0..5usize)];
            let u: f64 = r.gen();
            assert_eq!(s.source, minority[src_local]);
            assert_eq!(s.neighbor, minority[nb_local]);
            assert_eq!(s.row, ds.n_rows() + t);
            let src = ds.row(minority[src_local]);
            let nb = ds.row(minority[nb_local]);
            let got = out.data.row(s.row);
            for j in 0..d {
                assert_eq!(got[j], src[j] + u * (nb[j] - src[j]));
            }
        }
    }

    #[test]
    fn smote_lone_minority_duplicates() {
        let rows = vec![vec![1.0, 1.0], vec![5.0, 5.0], vec![6.0, 5.0], vec![7.0, 5.0]];
        let labels = vec![
            Label::Positive,
            Label::Negative,
            Label::Negative,
            Label::Negative,
        ];
        let ds = LabeledDataset::from_rows(rows, labels).unwrap();
        let out = smote(&ds, 1.0, 5, 0).unwrap();
        assert_eq!(out.synthesized_minority, 2);
        for s in &out.synthetics {
            assert_eq!(out.data.row(s.row), ds.row(0));
        }
    }

    // ---- ENN ----

    #[test]
    fn enn_keeps_interior_majority_removes_surrounded() {
        // A majority point deep inside the majority cluster stays; a lone
        // majority point surrounded by three minority points goes.
        let rows = vec![
            vec![0.0],
            vec![0.1],
            vec![0.2],
            vec![0.15],
            vec![10.0],
            vec![10.1],
            vec![10.2],
            vec![10.3],
        ];
        let labels = vec![
            Label::Positive,
            Label::Positive,
            Label::Positive,
            Label::Negative, // surrounded by minority
            Label::Negative,
            Label::Negative,
            Label::Negative,
            Label::Negative,
        ];
        let ds = LabeledDataset::from_rows(rows, labels).unwrap();
        let out = enn(&ds, 3).unwrap();
        assert_eq!(out.removed_majority, 1);
        let (_, neg) = out.data.count_labels();
        assert_eq!(neg, 4);
    }

    #[test]
    fn enn_k_too_large_is_error() {
        let ds = two_blobs(8, 3, 3, 2, 5.0, 0.5);
        assert!(matches!(enn(&ds, 6), Err(Error::KTooLarge { .. })));
    }

    /// Independent ENN reference: brute-force vote per majority row.
    fn enn_oracle(ds: &LabeledDataset, k: usize) -> Vec<usize> {
        let mut removed = Vec::new();
        for i in 0..ds.n_rows() {
            if ds.label(i).is_positive() {
                continue;
            }
            let mut dists: Vec<(f64, usize)> = (0..ds.n_rows())
                .filter(|&j| j != i)
                .map(|j| {
                    let dist: f64 = ds
                        .row(i)
                        .iter()
                        .zip(ds.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (dist, j)
                })
                .collect();
            dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let pos = dists[..k]
                .iter()
                .filter(|(_, j)| ds.label(*j).is_positive())
                .count();
            if pos * 2 > k {
                removed.push(i);
            }
        }
        removed
    }

    #[test]
    fn enn_matches_oracle_on_random_data() {
        for trial in 0..20 {
            let ds = random_dataset(100 + trial, 150, 4, 0.3);
            let out = enn(&ds, 3).unwrap();
            let want = enn_oracle(&ds, 3);
            assert_eq!(out.removed_majority, want.len(), "trial {trial}");
            let expect = {
                let keep: Vec<usize> = (0..ds.n_rows()).filter(|i| !want.contains(i)).collect();
                ds.subset(&keep).unwrap()
            };
            assert_eq!(out.data, expect, "trial {trial}");
        }
    }

    // ---- NC ----

    #[test]
    fn nc_identity_when_neighbors_agree() {
        let ds = two_blobs(9, 20, 20, 2, 10.0, 0.5);
        let out = nc(&ds, 3).unwrap();
        assert_eq!(out.data, ds);
        assert_eq!(out.removed_majority, 0);
    }

    #[test]
    fn nc_rule_b_removes_neighbors_of_misclassified_minority() {
        let rows = vec![
            vec![0.0],
            vec![0.1],
            vec![0.2],
            vec![0.3],
            vec![10.0],
            vec![11.0],
            vec![12.0],
        ];
        let labels = vec![
            Label::Positive,
            Label::Negative,
            Label::Negative,
            Label::Negative,
            Label::Negative,
            Label::Negative,
            Label::Negative,
        ];
        let ds = LabeledDataset::from_rows(rows, labels).unwrap();
        let out = nc(&ds, 3).unwrap();
        // The minority at 0 is outvoted by {0.1, 0.2, 0.3}; those three are
        // removed; the distant cluster stays.
        assert_eq!(out.removed_majority, 3);
        let survivors: Vec<f64> = (0..out.data.n_rows())
            .map(|i| out.data.row(i)[0])
            .collect();
        assert_eq!(survivors, vec![0.0, 10.0, 11.0, 12.0]);
    }

    /// Independently coded NC reference.
    fn nc_oracle(ds: &LabeledDataset, k: usize) -> Vec<usize> {
        let n = ds.n_rows();
        let knn_of = |i: usize| -> Vec<usize> {
            let mut dists: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dist: f64 = ds
                        .row(i)
                        .iter()
                        .zip(ds.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (dist, j)
                })
                .collect();
            dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            dists[..k].iter().map(|&(_, j)| j).collect()
        };
        let mut marked = vec![false; n];
        for i in 0..n {
            let nb = knn_of(i);
            let pos = nb.iter().filter(|&&j| ds.label(j).is_positive()).count();
            let vote = if pos * 2 > k { Label::Positive } else { Label::Negative };
            if vote == ds.label(i) {
                continue;
            }
            if ds.label(i).is_positive() {
                for j in nb {
                    if !ds.label(j).is_positive() {
                        marked[j] = true;
                    }
                }
            } else {
                marked[i] = true;
            }
        }
        (0..n).filter(|&i| marked[i]).collect()
    }

    #[test]
    fn nc_matches_oracle_on_random_data() {
        for trial in 0..20 {
            let ds = random_dataset(200 + trial, 150, 4, 0.25);
            let out = nc(&ds, 3).unwrap();
            let want = nc_oracle(&ds, 3);
            let expect = {
                let keep: Vec<usize> = (0..ds.n_rows()).filter(|i| !want.contains(i)).collect();
                ds.subset(&keep).unwrap()
            };
            assert_eq!(out.data, expect, "trial {trial}");
        }
    }

    // ---- Tomek ----

    #[test]
    fn tomek_no_links_in_separated_clusters() {
        let ds = two_blobs(10, 15, 15, 2, 20.0, 0.5);
        let out = tomek(&ds).unwrap();
        assert_eq!(out.removed_majority, 0);
    }

    #[test]
    fn tomek_forced_pair_removes_majority() {
        let rows = vec![vec![0.0], vec![1.0]];
        let labels = vec![Label::Positive, Label::Negative];
        let ds = LabeledDataset::from_rows(rows, labels).unwrap();
        let out = tomek(&ds).unwrap();
        assert_eq!(out.removed_majority, 1);
        assert_eq!(out.data.label(0), Label::Positive);
    }

    /// Brute-force mutual-1-NN link finder.
    fn tomek_oracle(ds: &LabeledDataset) -> Vec<usize> {
        let n = ds.n_rows();
        let nn_of = |i: usize| -> usize {
            let mut best = (f64::INFINITY, usize::MAX);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let dist: f64 = ds
                    .row(i)
                    .iter()
                    .zip(ds.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if dist < best.0 || (dist == best.0 && j < best.1) {
                    best = (dist, j);
                }
            }
            best.1
        };
        let nn: Vec<usize> = (0..n).map(nn_of).collect();
        let mut marked = vec![false; n];
        for i in 0..n {
            let j = nn[i];
            if nn[j] == i && ds.label(i) != ds.label(j) {
                if ds.label(i).is_positive() {
                    marked[j] = true;
                } else {
                    marked[i] = true;
                }
            }
        }
        (0..n).filter(|&i| marked[i]).collect()
    }

    #[test]
    fn tomek_matches_oracle_on_random_data() {
        for trial in 0..20 {
            let ds = random_dataset(300 + trial, 150, 3, 0.3);
            let out = tomek(&ds).unwrap();
            let want = tomek_oracle(&ds);
            assert_eq!(out.removed_majority, want.len(), "trial {trial}");
        }
    }

    // ---- composites ----

    #[test]
    fn composites_identity_on_balanced_separated_data() {
        let ds = two_blobs(11, 30, 30, 2, 15.0, 0.5);
        let cfg = SamplerConfig::default();
        assert_eq!(smote_tomek(&ds, &cfg).unwrap().data, ds);
        assert_eq!(smote_enn(&ds, &cfg).unwrap().data, ds);
    }

    #[test]
    fn composite_equals_manual_chain() {
        let ds = two_blobs(12, 20, 200, 3, 1.5, 1.0);
        let cfg = SamplerConfig {
            seed: 77,
            ..SamplerConfig::default()
        };
        let direct = smote_tomek(&ds, &cfg).unwrap();
        let chained = {
            let s = smote(&ds, 1.0, cfg.k_smote, cfg.seed).unwrap();
            tomek(&s.data).unwrap()
        };
        assert_eq!(direct.data, chained.data);

        let direct = smote_enn(&ds, &cfg).unwrap();
        let chained = {
            let s = smote(&ds, 1.0, cfg.k_smote, cfg.seed).unwrap();
            enn(&s.data, 3).unwrap()
        };
        assert_eq!(direct.data, chained.data);
        assert_eq!(
            direct.data.n_rows(),
            ds.n_rows() + direct.synthesized_minority - direct.removed_majority
        );
    }

    // ---- SMOTE-RUS-NC ----

    #[test]
    fn pipeline_arithmetic_on_clean_blobs() {
        // NC removes nothing on well-separated blobs: N_min 100, N_maj 900,
        // alpha 0.5 -> majority 200 after RUS, minority 200 after SMOTE.
        let ds = two_blobs(13, 100, 900, 3, 20.0, 0.5);
        let cfg = SamplerConfig {
            alpha_rus: 0.5,
            seed: 5,
            ..SamplerConfig::default()
        };
        let out = smote_rus_nc(&ds, &cfg).unwrap();
        let (pos, neg) = out.data.count_labels();
        assert_eq!((pos, neg), (200, 200));
        assert_eq!(out.data.n_rows(), 400);
        assert_eq!(out.stage_counts.len(), 3);
        assert_eq!(out.stage_counts[0].stage, Stage::Nc);
        assert_eq!(out.stage_counts[1].stage, Stage::Rus);
        assert_eq!(out.stage_counts[2].stage, Stage::Smote);
    }

    #[test]
    fn pipeline_early_stop_when_nc_balances() {
        // 20 minority in a tight cluster, 6 majority noise points inside it,
        // 19 majority far away. NC removes the interior noise, leaving the
        // majority at 19 <= 20: stages 3-4 must not run.
        let mut rng = crate::rng::stream(14, "early-stop", 0);
        let mut rows: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
            .collect();
        let mut labels = vec![Label::Positive; 20];
        for _ in 0..6 {
            rows.push(vec![rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)]);
            labels.push(Label::Negative);
        }
        for _ in 0..19 {
            rows.push(vec![30.0 + rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]);
            labels.push(Label::Negative);
        }
        let ds = LabeledDataset::from_rows(rows, labels).unwrap();
        let nc_only = nc(&ds, 3).unwrap();
        let (n_min, n_nc_maj) = nc_only.data.count_labels();
        assert!(n_nc_maj <= n_min, "construction: NC must balance");

        let out = smote_rus_nc(&ds, &SamplerConfig::default()).unwrap();
        assert_eq!(out.data, nc_only.data);
        assert_eq!(out.stage_counts.len(), 1);
        assert_eq!(out.synthesized_minority, 0);
    }

    #[test]
    fn pipeline_reaches_exact_parity_on_blobs() {
        let ds = two_blobs(15, 30, 900, 2, 2.0, 1.0);
        let cfg = SamplerConfig {
            seed: 99,
            ..SamplerConfig::default()
        };
        let out = smote_rus_nc(&ds, &cfg).unwrap();
        let stats = out.data.class_stats().unwrap();
        assert_eq!(stats.rho, 1.0);
        // Segment membership of every synthetic.
        for s in &out.synthetics {
            let row = out.data.row(s.row);
            let a = out.data.row(s.source);
            let b = out.data.row(s.neighbor);
            assert!(segment_residual(row, a, b) < 1e-9);
        }
        // Stage counts chain consistently.
        let after_nc = out.stage_counts[0].stats;
        let after_rus = out.stage_counts[1].stats;
        let after_smote = out.stage_counts[2].stats;
        assert_eq!(after_nc.n_min, 30);
        assert_eq!(after_rus.n_min, 30);
        assert_eq!(after_smote.n_maj, after_rus.n_maj);
        assert_eq!(after_smote.n_min, after_smote.n_maj);
    }

    pub(crate) fn segment_residual(x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let mut ab2 = 0.0;
        let mut t_num = 0.0;
        for j in 0..x.len() {
            ab2 += (b[j] - a[j]).powi(2);
            t_num += (x[j] - a[j]) * (b[j] - a[j]);
        }
        let t = if ab2 > 0.0 { (t_num / ab2).clamp(0.0, 1.0) } else { 0.0 };
        let mut resid = 0.0;
        for j in 0..x.len() {
            let p = a[j] + t * (b[j] - a[j]);
            resid += (x[j] - p).powi(2);
        }
        resid.sqrt()
    }

    #[test]
    fn no_sampler_removes_original_minority() {
        let cfg = SamplerConfig {
            seed: 21,
            ..SamplerConfig::default()
        };
        for trial in 0..10 {
            let ds = random_dataset(400 + trial, 120, 3, 0.2);
            let (orig_pos, _) = ds.count_labels();
            let outs = vec![
                rus(&ds, 0.7, trial).unwrap(),
                smote(&ds, 1.0, 5, trial).unwrap(),
                enn(&ds, 3).unwrap(),
                nc(&ds, 3).unwrap(),
                tomek(&ds).unwrap(),
                smote_enn(&ds, &cfg).unwrap(),
                smote_tomek(&ds, &cfg).unwrap(),
                smote_rus_nc(&ds, &cfg).unwrap(),
            ];
            for out in outs {
                let (pos, _) = out.data.count_labels();
                assert!(pos >= orig_pos, "minority shrank");
                assert_eq!(
                    out.data.n_rows(),
                    ds.n_rows() + out.synthesized_minority - out.removed_majority
                );
            }
        }
    }

    #[test]
    fn samplers_are_deterministic() {
        let ds = random_dataset(31, 100, 4, 0.25);
        let cfg = SamplerConfig {
            seed: 8,
            ..SamplerConfig::default()
        };
        let a = smote_rus_nc(&ds, &cfg).unwrap();
        let b = smote_rus_nc(&ds, &cfg).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.synthetics, b.synthetics);
        assert_eq!(a.stage_counts, b.stage_counts);
    }

    // ---- alpha grid ----

    #[test]
    fn alpha_grid_examples() {
        // n_min = 100, n_nc_maj = 400: alpha > 0.25.
        let grid = alpha_grid(100, 400, 0.1);
        let want = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        assert_eq!(grid.len(), want.len());
        for (g, w) in grid.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-9);
        }

        assert!(alpha_grid(50, 50, 0.1).is_empty());

        // The canonical illustration: [0.3, 0.4, 0.5, 0.6] all satisfy the
        // criterion when n_min / 0.3 < n_nc_maj.
        let grid = alpha_grid(30, 101, 0.1);
        assert!(grid.iter().any(|a| (a - 0.3).abs() < 1e-9));
        assert!(grid.iter().any(|a| (a - 0.6).abs() < 1e-9));
    }
}
