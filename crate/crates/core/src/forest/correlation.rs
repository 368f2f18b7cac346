use serde::{Deserialize, Serialize};

use super::LocalImportanceMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMode {
    Raw,
    Absolute,
}

/// Pearson correlation; `None` when either vector is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n < 2 || b.len() != n {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Ranks starting at 1; ties get the average of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && v[idx[end + 1]] == v[idx[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &i in &idx[start..=end] {
            out[i] = avg;
        }
        start = end + 1;
    }
    out
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    pearson(&ranks(a), &ranks(b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Instances whose correlation is undefined (a constant score vector).
    pub undefined: usize,
    pub fraction_at_least_0_9: f64,
    pub fraction_at_least_0_75: f64,
}

impl CorrelationSummary {
    fn of(values: &[Option<f64>]) -> Self {
        let defined: Vec<f64> = values.iter().flatten().copied().collect();
        let undefined = values.len() - defined.len();
        if defined.is_empty() {
            return CorrelationSummary {
                mean: f64::NAN,
                std: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
                undefined,
                fraction_at_least_0_9: 0.0,
                fraction_at_least_0_75: 0.0,
            };
        }
        let n = defined.len() as f64;
        let mean = defined.iter().sum::<f64>() / n;
        let std = (defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        CorrelationSummary {
            mean,
            std,
            min: defined.iter().copied().fold(f64::INFINITY, f64::min),
            max: defined.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            undefined,
            fraction_at_least_0_9: defined.iter().filter(|&&v| v >= 0.9).count() as f64 / n,
            fraction_at_least_0_75: defined.iter().filter(|&&v| v >= 0.75).count() as f64 / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub mode: CorrelationMode,
    pub pearson: Vec<Option<f64>>,
    pub spearman: Vec<Option<f64>>,
    pub pearson_summary: CorrelationSummary,
    pub spearman_summary: CorrelationSummary,
}

/// Per-instance agreement between two attribution matrices.
pub fn correlation_report(
    a: &LocalImportanceMatrix,
    b: &LocalImportanceMatrix,
    mode: CorrelationMode,
) -> Result<CorrelationReport> {
    if a.scores.len() != b.scores.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} instances",
            a.scores.len(),
            b.scores.len()
        )));
    }
    let mut pv = Vec::with_capacity(a.scores.len());
    let mut sv = Vec::with_capacity(a.scores.len());
    for (ra, rb) in a.scores.iter().zip(&b.scores) {
        if ra.len() != rb.len() {
            return Err(Error::ShapeMismatch(format!("{} vs {} features", ra.len(), rb.len())));
        }
        let (xa, xb): (Vec<f64>, Vec<f64>) = match mode {
            CorrelationMode::Raw => (ra.clone(), rb.clone()),
            CorrelationMode::Absolute => (
                ra.iter().map(|v| v.abs()).collect(),
                rb.iter().map(|v| v.abs()).collect(),
            ),
        };
        pv.push(pearson(&xa, &xb));
        sv.push(spearman(&xa, &xb));
    }
    Ok(CorrelationReport {
        mode,
        pearson_summary: CorrelationSummary::of(&pv),
        spearman_summary: CorrelationSummary::of(&sv),
        pearson: pv,
        spearman: sv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::LocalMethod;

    fn matrix(scores: Vec<Vec<f64>>) -> LocalImportanceMatrix {
        LocalImportanceMatrix {
            method: LocalMethod::LocalMdi,
            instance_ids: (0..scores.len()).collect(),
            scores,
            classes: None,
            baseline: None,
            prediction: None,
        }
    }

    #[test]
    fn identical_matrices_correlate_perfectly() {
        let a = matrix(vec![vec![0.1, 0.5, -0.2], vec![1.0, 2.0, 0.0]]);
        let r = correlation_report(&a, &a, CorrelationMode::Raw).unwrap();
        assert!(r.pearson.iter().all(|v| (v.unwrap() - 1.0).abs() < 1e-12));
        assert!(r.spearman.iter().all(|v| (v.unwrap() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn negated_matrix_anticorrelates() {
        let a = matrix(vec![vec![0.1, 0.5, -0.2]]);
        let b = matrix(vec![vec![-0.1, -0.5, 0.2]]);
        let r = correlation_report(&a, &b, CorrelationMode::Raw).unwrap();
        assert!((r.pearson[0].unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_rows_are_undefined() {
        let a = matrix(vec![vec![1.0, 1.0], vec![0.0, 1.0]]);
        let b = matrix(vec![vec![0.0, 2.0], vec![0.0, 3.0]]);
        let r = correlation_report(&a, &b, CorrelationMode::Raw).unwrap();
        assert_eq!(r.pearson[0], None);
        assert_eq!(r.pearson_summary.undefined, 1);
        assert!((r.pearson_summary.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let a = matrix(vec![vec![1.0, 2.0]]);
        let b = matrix(vec![vec![1.0, 2.0, 3.0]]);
        assert!(correlation_report(&a, &b, CorrelationMode::Raw).is_err());
    }

    #[test]
    fn spearman_with_ties() {
        // ranks: [1.5, 1.5, 3] vs [1, 2, 3]
        let s = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((s - 0.866_025_403_784_438_6).abs() < 1e-12);
    }
}
