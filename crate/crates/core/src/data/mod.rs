//! Datasets of categorical and numeric columns, builtin problems and CSV I/O.

mod builtin;
mod csv_io;

pub use builtin::*;
pub use csv_io::{load_csv, load_csv_str, load_joint_csv, load_joint_csv_str, write_csv, write_joint_csv};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::info::JointDistribution;

/// Categorical columns may not exceed this many categories.
pub const MAX_ARITY: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical { arity: usize },
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<f64>,
    /// Interior bin edges when the column was produced by [`quantize`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_edges: Option<Vec<f64>>,
}

impl Column {
    pub fn categorical(name: impl Into<String>, arity: usize, values: Vec<usize>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Categorical { arity },
            values: values.into_iter().map(|v| v as f64).collect(),
            bin_edges: None,
        }
    }

    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Numeric,
            values,
            bin_edges: None,
        }
    }

    pub fn arity(&self) -> Option<usize> {
        match self.kind {
            ColumnKind::Categorical { arity } => Some(arity),
            ColumnKind::Numeric => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }
}

/// Rectangular sample; the last column is the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    columns: Vec<Column>,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>, weights: Option<Vec<f64>>) -> Result<Self> {
        if columns.len() < 2 {
            return Err(Error::InvalidParameter(
                "a dataset needs at least one feature and an output".into(),
            ));
        }
        let n = columns[0].values.len();
        for c in &columns {
            if c.values.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "column `{}` has {} rows, expected {n}",
                    c.name,
                    c.values.len()
                )));
            }
            match c.kind {
                ColumnKind::Categorical { arity } => {
                    if arity > MAX_ARITY {
                        return Err(Error::ArityOverflow(c.name.clone()));
                    }
                    if let Some((row, v)) = c
                        .values
                        .iter()
                        .enumerate()
                        .find(|(_, v)| !(v.fract() == 0.0 && **v >= 0.0 && (**v as usize) < arity))
                    {
                        return Err(Error::Parse {
                            row,
                            column: 0,
                            message: format!("value {v} invalid for `{}` (arity {arity})", c.name),
                        });
                    }
                }
                ColumnKind::Numeric => {
                    if let Some(v) = c.values.iter().find(|v| !v.is_finite()) {
                        return Err(Error::InvalidParameter(format!("non-finite value {v} in `{}`", c.name)));
                    }
                }
            }
        }
        if let Some(w) = &weights {
            if w.len() != n {
                return Err(Error::ShapeMismatch(format!("{} weights for {n} rows", w.len())));
            }
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
            }
        }
        Ok(Dataset { columns, weights })
    }

    /// All-categorical dataset from row-major codes (last entry of each row is the output).
    pub fn from_rows(names: &[&str], arities: &[usize], rows: &[Vec<usize>]) -> Result<Self> {
        if names.len() != arities.len() {
            return Err(Error::ShapeMismatch("one arity per column name".into()));
        }
        let columns = names
            .iter()
            .zip(arities)
            .enumerate()
            .map(|(j, (name, &arity))| Column::categorical(*name, arity, rows.iter().map(|r| r[j]).collect()))
            .collect();
        Dataset::new(columns, None)
    }

    pub fn with_weights(self, weights: Vec<f64>) -> Result<Self> {
        Dataset::new(self.columns, Some(weights))
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn feature(&self, j: usize) -> &Column {
        &self.columns[j]
    }

    pub fn features(&self) -> &[Column] {
        &self.columns[..self.n_features()]
    }

    pub fn output(&self) -> &Column {
        &self.columns[self.n_features()]
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features().iter().map(|c| c.name.clone()).collect()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn total_weight(&self) -> f64 {
        match &self.weights {
            Some(w) => w.iter().sum(),
            None => self.n_rows() as f64,
        }
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col].values[row]
    }

    /// Feature values of row `i` (output excluded).
    pub fn instance(&self, i: usize) -> Vec<f64> {
        self.features().iter().map(|c| c.values[i]).collect()
    }

    pub fn instances(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows()).map(|i| self.instance(i)).collect()
    }

    pub fn is_all_categorical(&self) -> bool {
        self.columns.iter().all(Column::is_categorical)
    }

    /// Content hash over schema, values and weights (hex SHA-256).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.columns {
            h.update(c.name.as_bytes());
            h.update([0u8]);
            match c.kind {
                ColumnKind::Categorical { arity } => {
                    h.update(b"cat");
                    h.update((arity as u64).to_le_bytes());
                }
                ColumnKind::Numeric => h.update(b"num"),
            }
            for v in &c.values {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        if let Some(w) = &self.weights {
            h.update(b"weights");
            for v in w {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Rows restricted to `rows` (weights carried along).
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                values: rows.iter().map(|&i| c.values[i]).collect(),
                ..c.clone()
            })
            .collect();
        let weights = self.weights.as_ref().map(|w| rows.iter().map(|&i| w[i]).collect());
        Dataset::new(columns, weights)
    }
}

/// Plug-in joint distribution of an all-categorical dataset (weights honoured).
pub fn joint_from_samples(dataset: &Dataset) -> Result<JointDistribution> {
    if dataset.is_empty() || dataset.total_weight() <= 0.0 {
        return Err(Error::EmptyDataset);
    }
    let mut arities = Vec::with_capacity(dataset.columns.len());
    for c in &dataset.columns {
        match c.kind {
            ColumnKind::Categorical { arity } => arities.push(arity),
            ColumnKind::Numeric => return Err(Error::UnquantizedColumn(c.name.clone())),
        }
    }
    let cells = arities
        .iter()
        .try_fold(1usize, |acc, &a| {
            acc.checked_mul(a).filter(|&c| c <= crate::info::MAX_CELLS)
        })
        .ok_or_else(|| Error::InvalidJoint("dataset joint table too large".into()))?;
    let mut counts = vec![0.0; cells];
    for i in 0..dataset.n_rows() {
        let idx = dataset
            .columns
            .iter()
            .zip(&arities)
            .fold(0usize, |acc, (c, &a)| acc * a + c.values[i] as usize);
        counts[idx] += dataset.weight(i);
    }
    let total = dataset.total_weight();
    let probs = counts.into_iter().map(|c| c / total).collect();
    let names = dataset.columns.iter().map(|c| c.name.clone()).collect();
    JointDistribution::new(arities, probs)?.with_names(names)
}

/// Alias of [`joint_from_samples`].
pub fn dataset_to_joint(dataset: &Dataset) -> Result<JointDistribution> {
    joint_from_samples(dataset)
}

/// Weighted dataset with one row per positive-probability cell of `j`.
///
/// Growing trees on it reproduces the infinite-sample setting exactly.
pub fn population_dataset(j: &JointDistribution) -> Result<Dataset> {
    let width = j.arities().len();
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    let mut config = vec![0; width];
    for (idx, &q) in j.probs().iter().enumerate() {
        if q > crate::impurity::ZERO_PROB {
            j.decode(idx, &mut config);
            rows.push(config.clone());
            weights.push(q);
        }
    }
    let columns = (0..width)
        .map(|c| {
            Column::categorical(
                j.names()[c].clone(),
                j.arities()[c],
                rows.iter().map(|r| r[c]).collect(),
            )
        })
        .collect();
    Dataset::new(columns, Some(weights))
}

/// `n` i.i.d. draws from `j`.
pub fn sample_from_joint<R: Rng>(j: &JointDistribution, n: usize, rng: &mut R) -> Result<Dataset> {
    let mut cdf = Vec::with_capacity(j.probs().len());
    let mut acc = 0.0;
    for q in j.probs() {
        acc += q;
        cdf.push(acc);
    }
    let width = j.arities().len();
    let mut config = vec![0; width];
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        j.decode(idx, &mut config);
        rows.push(config.clone());
    }
    let columns = (0..width)
        .map(|c| {
            Column::categorical(
                j.names()[c].clone(),
                j.arities()[c],
                rows.iter().map(|r| r[c]).collect(),
            )
        })
        .collect();
    Dataset::new(columns, None)
}

/// Equal-width binning of a numeric column over its observed range.
///
/// Records the `bins - 1` interior edges; a constant column maps to bin 0.
pub fn quantize(dataset: &Dataset, column: usize, bins: usize) -> Result<Dataset> {
    if bins < 2 {
        return Err(Error::InvalidParameter("quantize needs at least 2 bins".into()));
    }
    let col = dataset
        .columns
        .get(column)
        .ok_or_else(|| Error::InvalidParameter(format!("no column {column}")))?;
    if bins > MAX_ARITY {
        return Err(Error::ArityOverflow(col.name.clone()));
    }
    if col.is_categorical() {
        return Err(Error::AlreadyCategorical(col.name.clone()));
    }
    let (lo, hi) = col
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut out = dataset.clone();
    let target = &mut out.columns[column];
    target.kind = ColumnKind::Categorical { arity: bins };
    if hi <= lo {
        target.values.iter_mut().for_each(|v| *v = 0.0);
        target.bin_edges = Some(Vec::new());
        return Ok(out);
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (1..bins).map(|k| lo + k as f64 * width).collect();
    for v in target.values.iter_mut() {
        *v = edges.partition_point(|&e| e <= *v) as f64;
    }
    target.bin_edges = Some(edges);
    Ok(out)
}

/// Quantizes every numeric feature column.
pub fn quantize_all(dataset: &Dataset, bins: usize) -> Result<Dataset> {
    let mut out = dataset.clone();
    for j in 0..dataset.n_features() {
        if !dataset.columns[j].is_categorical() {
            out = quantize(&out, j, bins)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_rows_normalize() {
        let d = Dataset::from_rows(&["x", "y"], &[2, 2], &[vec![0, 0], vec![1, 1]])
            .unwrap()
            .with_weights(vec![3.0, 1.0])
            .unwrap();
        let j = dataset_to_joint(&d).unwrap();
        assert_eq!(j.probs(), &[0.75, 0.0, 0.0, 0.25]);
    }

    #[test]
    fn single_row_is_point_mass() {
        let d = Dataset::from_rows(&["a", "b", "y"], &[2, 3, 2], &[vec![1, 2, 0]]).unwrap();
        let j = joint_from_samples(&d).unwrap();
        assert_eq!(j.probs().iter().filter(|&&q| q == 1.0).count(), 1);
        assert_eq!(j.prob(&[1, 2], 0), 1.0);
    }

    #[test]
    fn joint_rejects_numeric_and_empty() {
        let d = Dataset::new(
            vec![Column::numeric("x", vec![0.5]), Column::categorical("y", 2, vec![1])],
            None,
        )
        .unwrap();
        assert_eq!(joint_from_samples(&d), Err(Error::UnquantizedColumn("x".into())));
        let e = Dataset::from_rows(&["x", "y"], &[2, 2], &[]).unwrap();
        assert_eq!(joint_from_samples(&e), Err(Error::EmptyDataset));
    }

    #[test]
    fn rejects_out_of_range_codes() {
        assert!(Dataset::from_rows(&["x", "y"], &[2, 2], &[vec![2, 0]]).is_err());
    }

    #[test]
    fn quantize_pixel_range() {
        let vals: Vec<f64> = (0..=16).map(|v| v as f64).collect();
        let d = Dataset::new(
            vec![Column::numeric("px", vals), Column::categorical("y", 2, vec![0; 17])],
            None,
        )
        .unwrap();
        let q = quantize(&d, 0, 4).unwrap();
        let c = q.feature(0);
        assert_eq!(c.bin_edges.as_deref(), Some(&[4.0, 8.0, 12.0][..]));
        assert_eq!(c.arity(), Some(4));
        assert_eq!(c.values[0], 0.0);
        assert_eq!(c.values[3], 0.0);
        assert_eq!(c.values[4], 1.0);
        assert_eq!(c.values[16], 3.0);
        assert_eq!(q.n_rows(), 17);
        assert!(matches!(quantize(&q, 0, 4), Err(Error::AlreadyCategorical(_))));
    }

    #[test]
    fn quantize_constant_column() {
        let d = Dataset::new(
            vec![
                Column::numeric("c", vec![2.5; 5]),
                Column::categorical("y", 2, vec![0, 1, 0, 1, 0]),
            ],
            None,
        )
        .unwrap();
        let q = quantize(&d, 0, 4).unwrap();
        assert!(q.feature(0).is_constant());
        assert!(q.feature(0).values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn quantize_too_many_bins() {
        let d = Dataset::new(
            vec![
                Column::numeric("c", vec![0.0, 1.0]),
                Column::categorical("y", 2, vec![0, 1]),
            ],
            None,
        )
        .unwrap();
        assert!(matches!(quantize(&d, 0, 65), Err(Error::ArityOverflow(_))));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = Dataset::from_rows(&["x", "y"], &[2, 2], &[vec![0, 0], vec![1, 1]]).unwrap();
        let b = Dataset::from_rows(&["x", "y"], &[2, 2], &[vec![0, 0], vec![1, 0]]).unwrap();
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }
}
