//! Fully developed randomized decision trees.
//!
//! Categorical features are split exhaustively (one child per category, never
//! reused on a path); numeric features are split on the best midpoint threshold.
//! At each node `K` candidate features are drawn without replacement from the
//! admissible ones and the candidate with the largest impurity decrease wins.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::impurity::Impurity;

/// Nodes whose impurity falls below this are pure leaves.
pub const PURITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SplitRule {
    /// One child per category of `feature`.
    Exhaustive { feature: usize, arity: usize },
    /// Left child: `value <= threshold`.
    Threshold { feature: usize, threshold: f64 },
}

impl SplitRule {
    pub fn feature(&self) -> usize {
        match *self {
            SplitRule::Exhaustive { feature, .. } | SplitRule::Threshold { feature, .. } => feature,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub split: Option<SplitRule>,
    pub impurity: f64,
    /// Fraction of the training weight reaching the node.
    pub mass: f64,
    /// Class distribution at the node (empty for numeric outputs).
    pub distribution: Vec<f64>,
    /// Mean output value at the node.
    pub mean: f64,
    pub children: Vec<usize>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub k: usize,
    pub impurity: Impurity,
    pub n_samples: usize,
    pub n_features: usize,
    /// RNG seed and stream the tree was grown with.
    pub seed: u64,
    pub stream: u64,
}

/// Root-to-node sequence of node ids visited by an instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub path: Vec<usize>,
}

impl Prediction {
    pub fn node(&self) -> usize {
        *self.path.last().expect("paths start at the root")
    }
}

#[derive(Clone, Copy)]
enum OutputKind {
    Classes(usize),
    Numeric,
}

struct Builder<'a> {
    data: &'a Dataset,
    impurity: Impurity,
    k: usize,
    output: OutputKind,
    y: &'a [f64],
    class_values: Vec<f64>,
    total_weight: f64,
}

struct Candidate {
    gain: f64,
    rule: SplitRule,
}

impl Builder<'_> {
    fn weight(&self, i: usize) -> f64 {
        self.data.weight(i)
    }

    /// Impurity, weight, class distribution and mean of a sample set.
    fn summarize(&self, samples: &[usize]) -> (f64, f64, Vec<f64>, f64) {
        let w: f64 = samples.iter().map(|&i| self.weight(i)).sum();
        match self.output {
            OutputKind::Classes(k) => {
                let mut counts = vec![0.0; k];
                for &i in samples {
                    counts[self.y[i] as usize] += self.weight(i);
                }
                let imp = self.impurity.of_weights(&counts, &self.class_values);
                let dist: Vec<f64> = if w > 0.0 {
                    counts.iter().map(|c| c / w).collect()
                } else {
                    counts
                };
                let mean = dist.iter().zip(&self.class_values).map(|(p, v)| p * v).sum();
                (imp, w, dist, mean)
            }
            OutputKind::Numeric => {
                if w <= 0.0 {
                    return (0.0, 0.0, Vec::new(), 0.0);
                }
                let mean = samples.iter().map(|&i| self.weight(i) * self.y[i]).sum::<f64>() / w;
                let var = samples
                    .iter()
                    .map(|&i| self.weight(i) * (self.y[i] - mean).powi(2))
                    .sum::<f64>()
                    / w;
                (var.max(0.0), w, Vec::new(), mean)
            }
        }
    }

    fn impurity_of(&self, samples: &[usize]) -> (f64, f64) {
        let (imp, w, _, _) = self.summarize(samples);
        (imp, w)
    }

    fn best_exhaustive(&self, feature: usize, arity: usize, samples: &[usize], parent: (f64, f64)) -> Candidate {
        let parts = partition(self.data, feature, arity, samples);
        let (imp_t, w_t) = parent;
        let children: f64 = parts
            .iter()
            .map(|p| {
                let (i, w) = self.impurity_of(p);
                w / w_t * i
            })
            .sum();
        Candidate {
            gain: imp_t - children,
            rule: SplitRule::Exhaustive { feature, arity },
        }
    }

    fn best_threshold(&self, feature: usize, samples: &[usize], parent: (f64, f64)) -> Option<Candidate> {
        let col = &self.data.feature(feature).values;
        let mut order = samples.to_vec();
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let (imp_t, w_t) = parent;
        let mut best: Option<Candidate> = None;
        let mut acc = SideAccumulator::new(self.output);
        let mut total = SideAccumulator::new(self.output);
        for &i in &order {
            total.add(self.y[i], self.weight(i));
        }
        for pos in 0..order.len() - 1 {
            let i = order[pos];
            acc.add(self.y[i], self.weight(i));
            let (v, next) = (col[i], col[order[pos + 1]]);
            if v == next {
                continue;
            }
            let right = total.minus(&acc);
            let (il, wl) = acc.impurity(self.impurity, &self.class_values);
            let (ir, wr) = right.impurity(self.impurity, &self.class_values);
            let gain = imp_t - (wl / w_t) * il - (wr / w_t) * ir;
            let threshold = v + (next - v) / 2.0;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    gain,
                    rule: SplitRule::Threshold { feature, threshold },
                });
            }
        }
        best
    }
}

#[derive(Clone)]
enum SideAccumulator {
    Classes(Vec<f64>),
    Moments { w: f64, s: f64, ss: f64 },
}

impl SideAccumulator {
    fn new(kind: OutputKind) -> Self {
        match kind {
            OutputKind::Classes(k) => SideAccumulator::Classes(vec![0.0; k]),
            OutputKind::Numeric => SideAccumulator::Moments {
                w: 0.0,
                s: 0.0,
                ss: 0.0,
            },
        }
    }

    fn add(&mut self, y: f64, w: f64) {
        match self {
            SideAccumulator::Classes(c) => c[y as usize] += w,
            SideAccumulator::Moments { w: tw, s, ss } => {
                *tw += w;
                *s += w * y;
                *ss += w * y * y;
            }
        }
    }

    fn minus(&self, other: &Self) -> Self {
        match (self, other) {
            (SideAccumulator::Classes(a), SideAccumulator::Classes(b)) => {
                SideAccumulator::Classes(a.iter().zip(b).map(|(x, y)| (x - y).max(0.0)).collect())
            }
            (SideAccumulator::Moments { w, s, ss }, SideAccumulator::Moments { w: w2, s: s2, ss: ss2 }) => {
                SideAccumulator::Moments {
                    w: w - w2,
                    s: s - s2,
                    ss: ss - ss2,
                }
            }
            _ => unreachable!("accumulators share an output kind"),
        }
    }

    fn impurity(&self, impurity: Impurity, values: &[f64]) -> (f64, f64) {
        match self {
            SideAccumulator::Classes(c) => (impurity.of_weights(c, values), c.iter().sum()),
            SideAccumulator::Moments { w, s, ss } => {
                if *w <= 0.0 {
                    (0.0, 0.0)
                } else {
                    let m = s / w;
                    ((ss / w - m * m).max(0.0), *w)
                }
            }
        }
    }
}

fn partition(data: &Dataset, feature: usize, arity: usize, samples: &[usize]) -> Vec<Vec<usize>> {
    let col = &data.feature(feature).values;
    let mut parts = vec![Vec::new(); arity];
    for &i in samples {
        parts[col[i] as usize].push(i);
    }
    parts
}

fn is_constant(col: &[f64], samples: &[usize]) -> bool {
    samples.windows(2).all(|w| col[w[0]] == col[w[1]])
}

/// Grows one fully developed tree with `k` candidate features per node.
pub fn build_tree<R: Rng>(dataset: &Dataset, k: usize, impurity: Impurity, rng: &mut R) -> Result<Tree> {
    if dataset.is_empty() || dataset.total_weight() <= 0.0 {
        return Err(Error::EmptyDataset);
    }
    let p = dataset.n_features();
    if k == 0 || k > p {
        return Err(Error::InvalidParameter(format!("K must lie in 1..={p}, got {k}")));
    }
    let output = match dataset.output().kind {
        ColumnKind::Categorical { arity } => OutputKind::Classes(arity),
        ColumnKind::Numeric if impurity == Impurity::Variance => OutputKind::Numeric,
        ColumnKind::Numeric => return Err(Error::NotClassification),
    };
    let class_values = match output {
        OutputKind::Classes(a) => (0..a).map(|c| c as f64).collect(),
        OutputKind::Numeric => Vec::new(),
    };
    let b = Builder {
        data: dataset,
        impurity,
        k,
        output,
        y: &dataset.output().values,
        class_values,
        total_weight: dataset.total_weight(),
    };

    let all: Vec<usize> = (0..dataset.n_rows()).collect();
    let mut nodes: Vec<TreeNode> = Vec::new();
    let (imp, w, dist, mean) = b.summarize(&all);
    nodes.push(TreeNode {
        id: 0,
        split: None,
        impurity: imp,
        mass: w / b.total_weight,
        distribution: dist,
        mean,
        children: Vec::new(),
    });
    // (node id, samples, exhaustive features already used on the path)
    let mut stack: Vec<(usize, Vec<usize>, Vec<bool>)> = vec![(0, all, vec![false; p])];
    while let Some((id, samples, used)) = stack.pop() {
        let (imp_t, w_t) = (nodes[id].impurity, nodes[id].mass * b.total_weight);
        if imp_t < PURITY_TOLERANCE {
            continue;
        }
        let admissible: Vec<usize> = (0..p)
            .filter(|&j| {
                let c = dataset.feature(j);
                !(c.is_categorical() && used[j]) && !is_constant(&c.values, &samples)
            })
            .collect();
        if admissible.is_empty() {
            if id == 0 {
                return Err(Error::NoAdmissibleFeature);
            }
            continue;
        }
        let mut candidates: Vec<usize> = if admissible.len() <= b.k {
            admissible
        } else {
            sample(rng, admissible.len(), b.k)
                .into_iter()
                .map(|i| admissible[i])
                .collect()
        };
        candidates.sort_unstable();

        let mut best: Option<Candidate> = None;
        for &j in &candidates {
            let cand = match dataset.feature(j).kind {
                ColumnKind::Categorical { arity } => Some(b.best_exhaustive(j, arity, &samples, (imp_t, w_t))),
                ColumnKind::Numeric => b.best_threshold(j, &samples, (imp_t, w_t)),
            };
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|bst| c.gain > bst.gain) {
                    best = Some(c);
                }
            }
        }
        let Some(best) = best else { continue };

        let parts: Vec<Vec<usize>> = match best.rule {
            SplitRule::Exhaustive { feature, arity } => partition(dataset, feature, arity, &samples),
            SplitRule::Threshold { feature, threshold } => {
                let col = &dataset.feature(feature).values;
                let (l, r): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| col[i] <= threshold);
                vec![l, r]
            }
        };
        let mut child_used = used.clone();
        if let SplitRule::Exhaustive { feature, .. } = best.rule {
            child_used[feature] = true;
        }
        let parent_dist = nodes[id].distribution.clone();
        let parent_mean = nodes[id].mean;
        let first_child = nodes.len();
        let mut pending = Vec::new();
        for (c, part) in parts.into_iter().enumerate() {
            let cid = first_child + c;
            let (ci, cw, cd, cm) = b.summarize(&part);
            let node = if cw > 0.0 {
                pending.push((cid, part, child_used.clone()));
                TreeNode {
                    id: cid,
                    split: None,
                    impurity: ci,
                    mass: cw / b.total_weight,
                    distribution: cd,
                    mean: cm,
                    children: Vec::new(),
                }
            } else {
                TreeNode {
                    id: cid,
                    split: None,
                    impurity: 0.0,
                    mass: 0.0,
                    distribution: parent_dist.clone(),
                    mean: parent_mean,
                    children: Vec::new(),
                }
            };
            nodes.push(node);
        }
        nodes[id].children = (first_child..nodes.len()).collect();
        nodes[id].split = Some(best.rule);
        stack.extend(pending.into_iter().rev());
    }
    Ok(Tree {
        nodes,
        k,
        impurity,
        n_samples: dataset.n_rows(),
        n_features: p,
        seed: 0,
        stream: 0,
    })
}

impl Tree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf() && n.mass > 0.0).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, id: usize) -> usize {
            t.nodes[id].children.iter().map(|&c| 1 + go(t, c)).max().unwrap_or(0)
        }
        go(self, 0)
    }

    /// Follows `x` from the root. Stops early at an exhaustive split whose branch
    /// for `x` received no training mass (or whose category is out of range).
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let mut path = vec![0];
        let mut id = 0;
        while let Some(rule) = &self.nodes[id].split {
            let f = rule.feature();
            let v = *x.get(f).ok_or(Error::MissingFeatureValue(f))?;
            if v.is_nan() {
                return Err(Error::MissingFeatureValue(f));
            }
            let child = match *rule {
                SplitRule::Exhaustive { arity, .. } => {
                    if v < 0.0 || v.fract() != 0.0 || v as usize >= arity {
                        break;
                    }
                    self.nodes[id].children[v as usize]
                }
                SplitRule::Threshold { threshold, .. } => self.nodes[id].children[usize::from(v > threshold)],
            };
            if self.nodes[child].mass <= 0.0 {
                break;
            }
            path.push(child);
            id = child;
        }
        Ok(Prediction { path })
    }

    /// `Imp(X_m, T) = sum over nodes splitting on X_m of p(t) * decrease(t)`.
    pub fn mdi(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        for n in &self.nodes {
            if let Some(rule) = &n.split {
                let children: f64 = n
                    .children
                    .iter()
                    .map(|&c| self.nodes[c].mass * self.nodes[c].impurity)
                    .sum();
                out[rule.feature()] += n.mass * n.impurity - children;
            }
        }
        out
    }

    /// `i(root) - sum_leaves p(l) i(l)`.
    pub fn total_decrease(&self) -> f64 {
        let leaves: f64 = self
            .nodes
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.mass * n.impurity)
            .sum();
        self.root().mass * self.root().impurity - leaves
    }

    /// Canonical description of the split structure (ignores seeds and masses).
    pub fn structure_signature(&self) -> String {
        fn go(t: &Tree, id: usize, out: &mut String) {
            match &t.nodes[id].split {
                None => out.push('.'),
                Some(SplitRule::Exhaustive { feature, .. }) => {
                    out.push_str(&format!("(e{feature}"));
                    for &c in &t.nodes[id].children {
                        go(t, c, out);
                    }
                    out.push(')');
                }
                Some(SplitRule::Threshold { feature, threshold }) => {
                    out.push_str(&format!("(t{feature}@{threshold}"));
                    for &c in &t.nodes[id].children {
                        go(t, c, out);
                    }
                    out.push(')');
                }
            }
        }
        let mut s = String::new();
        go(self, 0, &mut s);
        s
    }
}

/// Convenience: per-feature MDI of a tree.
pub fn tree_mdi(tree: &Tree) -> Vec<f64> {
    tree.mdi()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{led_population, table1_dataset, Column, Dataset};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn table1_y1_greedy_tree() {
        let d = table1_dataset([0.1, 0.5, 0.9, 0.4]).unwrap();
        let t = build_tree(&d, 2, Impurity::Entropy, &mut rng(0)).unwrap();
        assert_eq!(t.root().split.as_ref().unwrap().feature(), 0);
        for &c in &t.root().children {
            assert_eq!(t.node(c).split.as_ref().unwrap().feature(), 1);
        }
        let mdi = t.mdi();
        assert!((mdi[0] - 0.0905164017397).abs() < 1e-10);
        assert!((mdi[1] - 0.1804440318948).abs() < 1e-10);
        let pred = t.predict(&[1.0, 0.0]).unwrap();
        assert!((t.node(pred.node()).distribution[1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn pure_output_is_single_leaf() {
        let d = Dataset::from_rows(&["a", "y"], &[2, 2], &[vec![0, 1], vec![1, 1]]).unwrap();
        let t = build_tree(&d, 1, Impurity::Entropy, &mut rng(1)).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert!(t.mdi().iter().all(|&v| v == 0.0));
        assert_eq!(t.predict(&[0.0]).unwrap().path, vec![0]);
    }

    #[test]
    fn constant_columns_only_is_an_error() {
        let d = Dataset::from_rows(&["a", "y"], &[2, 2], &[vec![0, 0], vec![0, 1]]).unwrap();
        assert_eq!(
            build_tree(&d, 1, Impurity::Entropy, &mut rng(1)),
            Err(Error::NoAdmissibleFeature)
        );
    }

    #[test]
    fn empty_dataset_and_bad_k() {
        let e = Dataset::from_rows(&["a", "y"], &[2, 2], &[]).unwrap();
        assert_eq!(
            build_tree(&e, 1, Impurity::Entropy, &mut rng(0)),
            Err(Error::EmptyDataset)
        );
        let d = led_population();
        assert!(build_tree(&d, 0, Impurity::Entropy, &mut rng(0)).is_err());
        assert!(build_tree(&d, 8, Impurity::Entropy, &mut rng(0)).is_err());
    }

    #[test]
    fn led_paths_use_distinct_segments() {
        let d = led_population();
        for seed in 0..20 {
            let t = build_tree(&d, 1, Impurity::Entropy, &mut rng(seed)).unwrap();
            assert!(t.depth() <= 7);
            fn walk(t: &Tree, id: usize, seen: &mut Vec<usize>) {
                if let Some(r) = &t.nodes[id].split {
                    assert!(!seen.contains(&r.feature()));
                    seen.push(r.feature());
                    for &c in &t.nodes[id].children {
                        walk(t, c, seen);
                    }
                    seen.pop();
                }
            }
            walk(&t, 0, &mut Vec::new());
            let total: f64 = t.mdi().iter().sum();
            assert!((total - 10f64.log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn led_digit_three_prediction() {
        let d = led_population();
        let t = build_tree(&d, 3, Impurity::Entropy, &mut rng(5)).unwrap();
        let x: Vec<f64> = d.instance(3);
        let leaf = t.node(t.predict(&x).unwrap().node());
        assert_eq!(leaf.distribution[3], 1.0);
    }

    #[test]
    fn mass_is_conserved() {
        let d = led_population();
        let t = build_tree(&d, 2, Impurity::Gini, &mut rng(9)).unwrap();
        assert_eq!(t.root().mass, 1.0);
        for n in &t.nodes {
            if !n.children.is_empty() {
                let s: f64 = n.children.iter().map(|&c| t.node(c).mass).sum();
                assert!((s - n.mass).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unseen_category_truncates_path() {
        // Category 2 of `a` never occurs.
        let d = Dataset::from_rows(&["a", "y"], &[3, 2], &[vec![0, 0], vec![1, 1]]).unwrap();
        let t = build_tree(&d, 1, Impurity::Entropy, &mut rng(0)).unwrap();
        assert_eq!(t.nodes.len(), 4);
        assert_eq!(t.node(3).mass, 0.0);
        assert_eq!(t.predict(&[2.0]).unwrap().path, vec![0]);
        assert_eq!(t.predict(&[1.0]).unwrap().path, vec![0, 2]);
        assert_eq!(t.predict(&[]), Err(Error::MissingFeatureValue(0)));
    }

    #[test]
    fn numeric_threshold_split() {
        let d = Dataset::new(
            vec![
                Column::numeric("v", vec![0.1, 0.4, 0.35, 0.9, 0.8]),
                Column::categorical("y", 2, vec![0, 0, 0, 1, 1]),
            ],
            None,
        )
        .unwrap();
        let t = build_tree(&d, 1, Impurity::Entropy, &mut rng(0)).unwrap();
        match t.root().split.as_ref().unwrap() {
            SplitRule::Threshold { threshold, .. } => assert!((threshold - 0.6).abs() < 1e-12),
            other => panic!("unexpected split {other:?}"),
        }
        assert_eq!(t.n_leaves(), 2);
    }

    #[test]
    fn regression_tree_on_numeric_output() {
        let d = Dataset::new(
            vec![
                Column::categorical("a", 2, vec![0, 0, 1, 1]),
                Column::numeric("y", vec![1.0, 1.0, 3.0, 5.0]),
            ],
            None,
        )
        .unwrap();
        let t = build_tree(&d, 1, Impurity::Variance, &mut rng(0)).unwrap();
        assert!((t.root().impurity - 2.75).abs() < 1e-12);
        assert!((t.mdi()[0] - t.total_decrease()).abs() < 1e-12);
        assert!(build_tree(&d, 1, Impurity::Entropy, &mut rng(0)).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let t = build_tree(&led_population(), 1, Impurity::Entropy, &mut rng(2)).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: Tree = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
