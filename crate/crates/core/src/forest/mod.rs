//! Ensembles of randomized trees and their finite-sample importance measures:
//! global MDI, local MDI (impurity changes collected along an instance's paths)
//! and the Saabas decomposition of predicted class probabilities.

mod correlation;

pub use correlation::{correlation_report, pearson, spearman, CorrelationMode, CorrelationReport, CorrelationSummary};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::impurity::Impurity;
use crate::tree::{build_tree, Tree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_trees: usize,
    pub k: usize,
    pub seed: u64,
    pub impurity: Impurity,
    pub dataset_fingerprint: String,
    pub n_features: usize,
    /// Number of output classes; `None` for numeric outputs.
    pub n_classes: Option<usize>,
    pub trees: Vec<Tree>,
}

/// RNG of tree `index`: the master seed selects the key, the index the stream.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Grows `n_trees` trees in parallel; the result does not depend on scheduling.
pub fn build_forest(dataset: &Dataset, k: usize, n_trees: usize, impurity: Impurity, seed: u64) -> Result<Forest> {
    if n_trees == 0 {
        return Err(Error::InvalidParameter("N_T must be at least 1".into()));
    }
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree_rng(seed, i);
            let mut t = build_tree(dataset, k, impurity, &mut rng)?;
            t.seed = seed;
            t.stream = i as u64;
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    let n_classes = match dataset.output().kind {
        ColumnKind::Categorical { arity } => Some(arity),
        ColumnKind::Numeric => None,
    };
    Ok(Forest {
        n_trees,
        k,
        seed,
        impurity,
        dataset_fingerprint: dataset.fingerprint(),
        n_features: dataset.n_features(),
        n_classes,
        trees,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalMethod {
    LocalMdi,
    Saabas,
}

impl LocalMethod {
    pub fn name(self) -> &'static str {
        match self {
            LocalMethod::LocalMdi => "local-mdi",
            LocalMethod::Saabas => "saabas",
        }
    }
}

impl std::str::FromStr for LocalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local-mdi" => Ok(LocalMethod::LocalMdi),
            "saabas" => Ok(LocalMethod::Saabas),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

/// Instance-by-feature attribution scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalImportanceMatrix {
    pub method: LocalMethod,
    pub instance_ids: Vec<usize>,
    pub scores: Vec<Vec<f64>>,
    /// Saabas only: explained class per instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<usize>>,
    /// Saabas only: root class probability averaged over trees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Vec<f64>>,
    /// Saabas only: final-node class probability averaged over trees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Vec<f64>>,
}

impl LocalImportanceMatrix {
    pub fn n_instances(&self) -> usize {
        self.scores.len()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.scores.iter().map(|r| r.iter().sum()).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClassSelector {
    /// Class with the largest forest-averaged probability (lowest index on ties).
    #[default]
    Predicted,
    Fixed(usize),
}

impl Forest {
    /// Mean of the per-tree MDI vectors.
    pub fn global_mdi(&self) -> Vec<f64> {
        let per_tree: Vec<Vec<f64>> = self.trees.par_iter().map(Tree::mdi).collect();
        let mut out = vec![0.0; self.n_features];
        for t in &per_tree {
            for (o, v) in out.iter_mut().zip(t) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= self.n_trees as f64);
        out
    }

    /// Average over trees of `i(root) - sum_leaves p(l) i(l)`.
    pub fn total_decrease(&self) -> f64 {
        self.trees.iter().map(Tree::total_decrease).sum::<f64>() / self.n_trees as f64
    }

    fn check_instance(&self, x: &[f64]) -> Result<()> {
        if x.len() < self.n_features {
            return Err(Error::MissingFeatureValue(x.len()));
        }
        if let Some(f) = x[..self.n_features].iter().position(|v| v.is_nan()) {
            return Err(Error::MissingFeatureValue(f));
        }
        Ok(())
    }

    fn local_mdi_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_instance(x)?;
        let mut out = vec![0.0; self.n_features];
        for t in &self.trees {
            let path = t.predict(x)?.path;
            for pair in path.windows(2) {
                let (node, child) = (t.node(pair[0]), t.node(pair[1]));
                let f = node.split.as_ref().expect("interior node").feature();
                out[f] += node.impurity - child.impurity;
            }
        }
        out.iter_mut().for_each(|v| *v /= self.n_trees as f64);
        Ok(out)
    }

    /// Local MDI of each instance: impurity decreases `i(t) - i(t_x)` collected at
    /// the nodes of its paths, per split feature, averaged over trees.
    pub fn local_mdi(&self, instances: &[Vec<f64>]) -> Result<LocalImportanceMatrix> {
        let scores = instances
            .par_iter()
            .map(|x| self.local_mdi_one(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(LocalImportanceMatrix {
            method: LocalMethod::LocalMdi,
            instance_ids: (0..instances.len()).collect(),
            scores,
            classes: None,
            baseline: None,
            prediction: None,
        })
    }

    /// Forest-averaged class probabilities at the final node of each path.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let k = self.n_classes.ok_or(Error::NotClassification)?;
        self.check_instance(x)?;
        let mut out = vec![0.0; k];
        for t in &self.trees {
            let node = t.node(t.predict(x)?.node());
            for (o, p) in out.iter_mut().zip(&node.distribution) {
                *o += p;
            }
        }
        out.iter_mut().for_each(|v| *v /= self.n_trees as f64);
        Ok(out)
    }

    /// Forest-averaged mean output at the final node of each path.
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_instance(x)?;
        let mut acc = 0.0;
        for t in &self.trees {
            acc += t.node(t.predict(x)?.node()).mean;
        }
        Ok(acc / self.n_trees as f64)
    }

    fn saabas_one(&self, x: &[f64], selector: ClassSelector) -> Result<(Vec<f64>, usize, f64, f64)> {
        let k = self.n_classes.ok_or(Error::NotClassification)?;
        let class = match selector {
            ClassSelector::Fixed(c) if c >= k => return Err(Error::ClassOutOfRange(c)),
            ClassSelector::Fixed(c) => c,
            ClassSelector::Predicted => {
                let proba = self.predict_proba(x)?;
                proba
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
                    )
                    .0
            }
        };
        self.check_instance(x)?;
        let mut out = vec![0.0; self.n_features];
        let (mut base, mut pred) = (0.0, 0.0);
        for t in &self.trees {
            let path = t.predict(x)?.path;
            base += t.root().distribution[class];
            pred += t.node(*path.last().expect("nonempty path")).distribution[class];
            for pair in path.windows(2) {
                let (node, child) = (t.node(pair[0]), t.node(pair[1]));
                let f = node.split.as_ref().expect("interior node").feature();
                out[f] += child.distribution[class] - node.distribution[class];
            }
        }
        let n = self.n_trees as f64;
        out.iter_mut().for_each(|v| *v /= n);
        Ok((out, class, base / n, pred / n))
    }

    /// Saabas attribution: changes in the selected class probability collected
    /// along each path, per split feature, averaged over trees.
    pub fn saabas(&self, instances: &[Vec<f64>], selector: ClassSelector) -> Result<LocalImportanceMatrix> {
        let rows = instances
            .par_iter()
            .map(|x| self.saabas_one(x, selector))
            .collect::<Result<Vec<_>>>()?;
        let mut scores = Vec::with_capacity(rows.len());
        let mut classes = Vec::with_capacity(rows.len());
        let mut baseline = Vec::with_capacity(rows.len());
        let mut prediction = Vec::with_capacity(rows.len());
        for (s, c, b, p) in rows {
            scores.push(s);
            classes.push(c);
            baseline.push(b);
            prediction.push(p);
        }
        Ok(LocalImportanceMatrix {
            method: LocalMethod::Saabas,
            instance_ids: (0..instances.len()).collect(),
            scores,
            classes: Some(classes),
            baseline: Some(baseline),
            prediction: Some(prediction),
        })
    }

    /// Number of structurally distinct trees.
    pub fn distinct_structures(&self) -> usize {
        let mut sigs: Vec<String> = self.trees.iter().map(Tree::structure_signature).collect();
        sigs.sort_unstable();
        sigs.dedup();
        sigs.len()
    }
}

/// Free-function form of [`Forest::global_mdi`].
pub fn global_mdi(forest: &Forest) -> Vec<f64> {
    forest.global_mdi()
}

/// Free-function form of [`Forest::local_mdi`].
pub fn local_mdi(forest: &Forest, instances: &[Vec<f64>]) -> Result<LocalImportanceMatrix> {
    forest.local_mdi(instances)
}

/// Free-function form of [`Forest::saabas`].
pub fn saabas(forest: &Forest, instances: &[Vec<f64>], selector: ClassSelector) -> Result<LocalImportanceMatrix> {
    forest.saabas(instances, selector)
}

/// Scales scores so their absolute values sum to one (zero vectors unchanged).
pub fn normalize(scores: &[f64]) -> Vec<f64> {
    let total: f64 = scores.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return scores.to_vec();
    }
    scores.iter().map(|v| v / total).collect()
}

/// Weighted training-set mean of local MDI rows.
pub fn training_mean(dataset: &Dataset, local: &LocalImportanceMatrix) -> Vec<f64> {
    let p = dataset.n_features();
    let mut out = vec![0.0; p];
    for (i, row) in local.scores.iter().enumerate() {
        let w = dataset.weight(i);
        for (o, v) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    let total = dataset.total_weight();
    out.iter_mut().for_each(|v| *v /= total);
    out
}
