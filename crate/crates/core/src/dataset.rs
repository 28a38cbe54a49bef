//! Labeled binary-class datasets and file ingestion.
//!
//! The minority class is always mapped to [`Label::Positive`] at load time,
//! so downstream code never has to re-derive polarity. Feature matrices are
//! dense, row-major `f64` and must be finite after ingestion.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    /// The minority class.
    Positive,
    /// The majority class.
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

/// Class counts of a dataset, with `positive == minority` polarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    /// Number of positive (minority) samples.
    pub n_min: usize,
    /// Number of negative (majority) samples.
    pub n_maj: usize,
    /// Imbalance ratio `n_maj / n_min`.
    pub rho: f64,
}

impl ClassStats {
    pub fn new(n_min: usize, n_maj: usize) -> ClassStats {
        ClassStats {
            n_min,
            n_maj,
            rho: n_maj as f64 / n_min as f64,
        }
    }
}

/// An n×d real feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    values: Vec<f64>,
    n_features: usize,
    labels: Vec<Label>,
    feature_names: Vec<String>,
}

impl LabeledDataset {
    /// Build a dataset from a row-major value buffer.
    ///
    /// Validates shape and finiteness. Class-count invariants (two classes,
    /// n >= 2) are enforced by the loaders, not here: internal transforms
    /// such as bootstrapping may legitimately produce single-class subsets.
    pub fn new(
        values: Vec<f64>,
        n_features: usize,
        labels: Vec<Label>,
        feature_names: Vec<String>,
    ) -> Result<LabeledDataset> {
        if n_features == 0 {
            return Err(Error::InvalidInput("n_features must be >= 1".into()));
        }
        if labels.is_empty() {
            return Err(Error::InvalidInput("dataset must have at least one row".into()));
        }
        if values.len() != labels.len() * n_features {
            return Err(Error::InvalidInput(format!(
                "value buffer has {} entries, expected {} ({} rows x {} features)",
                values.len(),
                labels.len() * n_features,
                labels.len(),
                n_features
            )));
        }
        if feature_names.len() != n_features {
            return Err(Error::InvalidInput(format!(
                "{} feature names for {} features",
                feature_names.len(),
                n_features
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature value at row {}, column {}",
                i / n_features,
                i % n_features
            )));
        }
        Ok(LabeledDataset {
            values,
            n_features,
            labels,
            feature_names,
        })
    }

    /// Convenience constructor from per-row vectors.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<LabeledDataset> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        let names = (0..d).map(|i| format!("f{i}")).collect();
        let values = rows.into_iter().flatten().collect();
        LabeledDataset::new(values, d, labels, names)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// `(positive, negative)` counts.
    pub fn count_labels(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|l| l.is_positive()).count();
        (pos, self.labels.len() - pos)
    }

    /// Class statistics. Errors when a class is absent.
    pub fn class_stats(&self) -> Result<ClassStats> {
        let (pos, neg) = self.count_labels();
        if pos == 0 || neg == 0 {
            return Err(Error::InvalidInput(
                "class statistics require both classes present".into(),
            ));
        }
        Ok(ClassStats::new(pos, neg))
    }

    /// Copy the given rows (duplicates allowed) into a new dataset.
    pub fn subset(&self, row_indices: &[usize]) -> Result<LabeledDataset> {
        let n = self.n_rows();
        if row_indices.is_empty() {
            return Err(Error::InvalidInput("subset of zero rows".into()));
        }
        let mut values = Vec::with_capacity(row_indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(row_indices.len());
        for &i in row_indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Ok(LabeledDataset {
            values,
            n_features: self.n_features,
            labels,
            feature_names: self.feature_names.clone(),
        })
    }

    /// Append rows of `other` after the rows of `self`.
    pub(crate) fn append(&self, other_values: &[f64], other_labels: &[Label]) -> LabeledDataset {
        debug_assert_eq!(other_values.len(), other_labels.len() * self.n_features);
        let mut values = self.values.clone();
        values.extend_from_slice(other_values);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(other_labels);
        LabeledDataset {
            values,
            n_features: self.n_features,
            labels,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Z-score standardization per feature. Optional; the benchmark protocol
    /// runs on raw features.
    pub fn standardized(&self) -> LabeledDataset {
        let n = self.n_rows() as f64;
        let d = self.n_features;
        let mut mean = vec![0.0; d];
        let mut var = vec![0.0; d];
        for i in 0..self.n_rows() {
            for (j, v) in self.row(i).iter().enumerate() {
                mean[j] += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        for i in 0..self.n_rows() {
            for (j, v) in self.row(i).iter().enumerate() {
                var[j] += (v - mean[j]).powi(2);
            }
        }
        let sd: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
        let mut values = self.values.clone();
        for (idx, v) in values.iter_mut().enumerate() {
            let j = idx % d;
            *v -= mean[j];
            if sd[j] > 0.0 {
                *v /= sd[j];
            }
        }
        LabeledDataset {
            values,
            n_features: d,
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Write as CSV with a header row and a trailing `class` column holding
    /// `positive`/`negative`. Feature values round-trip bit-exactly.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
        let mut header: Vec<String> = self.feature_names.clone();
        header.push("class".into());
        w.write_record(&header).map_err(|e| io_err(path, e))?;
        for i in 0..self.n_rows() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            rec.push(
                match self.labels[i] {
                    Label::Positive => "positive",
                    Label::Negative => "negative",
                }
                .into(),
            );
            w.write_record(&rec).map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(())
    }
}

fn io_err(path: &Path, e: csv::Error) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Which column of a CSV file holds the class label.
#[derive(Debug, Clone)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

/// Raw rows as parsed from a file, before relabeling.
struct RawData {
    rows: Vec<Vec<f64>>,
    classes: Vec<String>,
    feature_names: Vec<String>,
}

/// Map the two observed class strings onto `positive`/`negative`.
///
/// Default polarity: the less frequent value becomes positive; exact ties
/// break to the lexicographically smaller value. An explicit
/// `positive_label` overrides minority detection (a conflict is a warning,
/// not an error).
fn relabel(raw: RawData, positive_label: Option<&str>, path: &Path) -> Result<LabeledDataset> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &raw.classes {
        *counts.entry(c.as_str()).or_insert(0) += 1;
    }
    if counts.len() != 2 {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!(
                "expected exactly 2 class values, found {}: [{}]",
                counts.len(),
                counts.keys().copied().collect::<Vec<_>>().join(", ")
            ),
        });
    }
    // BTreeMap iterates keys in lexicographic order, so on a tie the first
    // (smaller) key wins the minority slot.
    let (&first, &c_first) = counts.iter().next().unwrap();
    let (&second, &c_second) = counts.iter().nth(1).unwrap();
    let minority = if c_first <= c_second { first } else { second };

    let positive = match positive_label {
        Some(p) => {
            if !counts.contains_key(p) {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    message: format!("positive label {p:?} not present in class column"),
                });
            }
            if p != minority {
                log::warn!(
                    "{}: positive label {:?} is the majority class (minority is {:?})",
                    path.display(),
                    p,
                    minority
                );
            }
            p
        }
        None => minority,
    };

    let labels: Vec<Label> = raw
        .classes
        .iter()
        .map(|c| {
            if c == positive {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    let d = raw.feature_names.len();
    let values = raw.rows.into_iter().flatten().collect();
    LabeledDataset::new(values, d, labels, raw.feature_names)
}

fn parse_feature(token: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("non-numeric feature value {token:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("non-finite feature value {token:?}"),
        });
    }
    Ok(v)
}

/// Load a KEEL `.dat` file. Lines beginning `@` are header; `@data` starts
/// the body; the last attribute is the class.
pub fn load_keel(path: &Path) -> Result<LabeledDataset> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let reader = BufReader::new(file);

    let mut attr_names: Vec<String> = Vec::new();
    let mut categorical: Vec<bool> = Vec::new();
    let mut in_data = false;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut classes: Vec<String> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('@') {
            let lower = trimmed.to_ascii_lowercase();
            if lower.starts_with("@attribute") {
                let rest = trimmed["@attribute".len()..].trim();
                let name = rest
                    .split(|c: char| c.is_whitespace() || c == '{' || c == '[')
                    .next()
                    .unwrap_or("")
                    .trim()
                    .to_string();
                if name.is_empty() {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno,
                        message: "attribute declaration without a name".into(),
                    });
                }
                attr_names.push(name);
                categorical.push(rest.contains('{'));
            } else if lower.starts_with("@data") {
                // All attributes are declared by now; the last one is the
                // class. SMOTE interpolation is defined on reals only, so a
                // categorical feature attribute is rejected up front.
                if categorical.len() > 1 && categorical[..categorical.len() - 1].iter().any(|&c| c)
                {
                    return Err(Error::Schema {
                        path: path.to_path_buf(),
                        message: "categorical feature attributes are not supported".into(),
                    });
                }
                in_data = true;
            }
            // @relation, @inputs, @outputs carry no information we keep.
            continue;
        }
        if !in_data {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: "data row before @data section".into(),
            });
        }
        let tokens: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if !attr_names.is_empty() && tokens.len() != attr_names.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!(
                    "row has {} values, expected {}",
                    tokens.len(),
                    attr_names.len()
                ),
            });
        }
        if attr_names.is_empty() && !rows.is_empty() && tokens.len() != rows[0].len() + 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!(
                    "row has {} values, expected {}",
                    tokens.len(),
                    rows[0].len() + 1
                ),
            });
        }
        if tokens.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: "row needs at least one feature and a class".into(),
            });
        }
        let (feat, class) = tokens.split_at(tokens.len() - 1);
        let mut row = Vec::with_capacity(feat.len());
        for t in feat {
            row.push(parse_feature(t, path, lineno)?);
        }
        rows.push(row);
        classes.push(class[0].to_string());
    }

    if !in_data {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: "missing @data section".into(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: "empty @data section".into(),
        });
    }
    if rows.len() < 2 {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: "dataset needs at least 2 rows".into(),
        });
    }

    let d = rows[0].len();
    let feature_names = if attr_names.len() == d + 1 {
        attr_names[..d].to_vec()
    } else {
        (0..d).map(|i| format!("f{i}")).collect()
    };
    relabel(
        RawData {
            rows,
            classes,
            feature_names,
        },
        None,
        path,
    )
}

/// Load a CSV file with a mandatory header row.
pub fn load_csv(
    path: &Path,
    label_column: &LabelColumn,
    positive_label: Option<&str>,
) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;

    let headers = reader.headers().map_err(|e| io_err(path, e))?.clone();
    let label_idx = match label_column {
        LabelColumn::Name(name) => headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Schema {
                path: path.to_path_buf(),
                message: format!("label column {name:?} not found in header"),
            }
        })?,
        LabelColumn::Index(i) => {
            if *i >= headers.len() {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    message: format!(
                        "label column index {} out of range for {} columns",
                        i,
                        headers.len()
                    ),
                });
            }
            *i
        }
    };

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut rows = Vec::new();
    let mut classes = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| io_err(path, e))?;
        let lineno = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows.len() + 2);
        if record.len() != headers.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!(
                    "row has {} values, expected {}",
                    record.len(),
                    headers.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (i, token) in record.iter().enumerate() {
            if i == label_idx {
                classes.push(token.to_string());
            } else {
                row.push(parse_feature(token, path, lineno)?);
            }
        }
        rows.push(row);
    }

    if rows.len() < 2 {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: "dataset needs at least 2 rows".into(),
        });
    }
    relabel(
        RawData {
            rows,
            classes,
            feature_names,
        },
        positive_label,
        path,
    )
}
