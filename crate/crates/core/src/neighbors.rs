//! Exact k-nearest-neighbor queries under Euclidean distance.
//!
//! Shared by the NC, ENN, Tomek and SMOTE samplers. Queries are exact
//! (approximate search would change removal sets) and fully deterministic:
//! distance ties break to the lower row index.

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

/// Immutable view over an n×d point set; safe to query concurrently.
pub struct NeighborIndex<'a> {
    points: &'a [f64],
    n: usize,
    d: usize,
}

fn d2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

impl<'a> NeighborIndex<'a> {
    pub fn new(points: &'a [f64], d: usize) -> Result<NeighborIndex<'a>> {
        if d == 0 || points.len() % d != 0 {
            return Err(Error::InvalidInput(format!(
                "point buffer of {} values is not a multiple of d = {}",
                points.len(),
                d
            )));
        }
        Ok(NeighborIndex {
            points,
            n: points.len() / d,
            d,
        })
    }

    pub fn from_dataset(data: &'a LabeledDataset) -> NeighborIndex<'a> {
        NeighborIndex {
            points: data.values(),
            n: data.n_rows(),
            d: data.n_features(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    /// The `k` nearest points to `query`, sorted by nondecreasing distance,
    /// ties broken by lower row index. `exclude` removes one row (a query
    /// point that is itself a member of the index) from eligibility.
    pub fn knn(
        &self,
        query: &[f64],
        k: usize,
        exclude: Option<usize>,
    ) -> Result<Vec<(usize, f64)>> {
        if query.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: query.len(),
            });
        }
        let eligible = self.n - usize::from(exclude.map_or(false, |e| e < self.n));
        if k == 0 || k > eligible {
            return Err(Error::KTooLarge { k, eligible });
        }

        // Bounded selection: keep the k best (distance², index) pairs.
        // `worst` is the max element under the same ordering used for output.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for i in 0..self.n {
            if exclude == Some(i) {
                continue;
            }
            let dist = d2(query, self.point(i));
            let cand = (dist, i);
            if best.len() < k {
                best.push(cand);
                if best.len() == k {
                    best.sort_by(cmp_pair);
                }
            } else if cmp_pair(&cand, best.last().unwrap()) == std::cmp::Ordering::Less {
                best.pop();
                let pos = best.partition_point(|b| cmp_pair(b, &cand) == std::cmp::Ordering::Less);
                best.insert(pos, cand);
            }
        }
        if best.len() < k {
            best.sort_by(cmp_pair);
        }
        Ok(best.into_iter().map(|(dist, i)| (i, dist.sqrt())).collect())
    }

    /// Majority label among the `k` nearest neighbors of row `query_row`
    /// (self always excluded). A binary tie on an even `k` returns the
    /// majority class; defaults keep `k` odd so ties cannot occur.
    pub fn label_vote(&self, labels: &[Label], query_row: usize, k: usize) -> Result<Label> {
        if query_row >= self.n {
            return Err(Error::IndexOutOfRange {
                index: query_row,
                len: self.n,
            });
        }
        if labels.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} points",
                labels.len(),
                self.n
            )));
        }
        let neighbors = self.knn(self.point(query_row), k, Some(query_row))?;
        let pos = neighbors
            .iter()
            .filter(|(i, _)| labels[*i].is_positive())
            .count();
        if pos * 2 > k {
            Ok(Label::Positive)
        } else {
            Ok(Label::Negative)
        }
    }
}

fn cmp_pair(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    // Data is finite by dataset invariant, so partial_cmp never fails.
    a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
}
