//! Exact entropies and (conditional) mutual informations over explicit joint
//! probability tables of categorical variables.
//!
//! A [`JointDistribution`] holds inputs `X_1..X_p` followed by the output `Y` as a
//! dense mixed-radix table (the output varies fastest). All quantities are in bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impurity::{Impurity, ZERO_PROB};

/// Largest dense table accepted by [`JointDistribution::new`].
pub const MAX_CELLS: usize = 1 << 27;

/// Tolerance on the total probability mass.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Negative information values smaller in magnitude than this are rounding noise.
pub const NEGATIVE_CLAMP: f64 = 1e-10;

/// Bitset over input-variable indices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VariableSubset(u32);

impl VariableSubset {
    pub const fn empty() -> Self {
        VariableSubset(0)
    }

    pub fn full(p: usize) -> Self {
        assert!(p <= 31, "at most 31 variables");
        VariableSubset(((1u64 << p) - 1) as u32)
    }

    pub fn from_bits(bits: u32) -> Self {
        VariableSubset(bits)
    }

    pub fn singleton(m: usize) -> Self {
        VariableSubset(1 << m)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        indices.iter().fold(Self::empty(), |s, &i| s.with(i))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, m: usize) -> bool {
        m < 32 && self.0 & (1 << m) != 0
    }

    pub fn with(self, m: usize) -> Self {
        VariableSubset(self.0 | (1 << m))
    }

    pub fn without(self, m: usize) -> Self {
        VariableSubset(self.0 & !(1 << m))
    }

    pub fn union(self, other: Self) -> Self {
        VariableSubset(self.0 | other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Set indices in increasing order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |i| bits & (1 << i) != 0)
    }

    /// Checks that no bit at or above `p` is set.
    pub fn check(self, p: usize) -> Result<()> {
        if p < 32 && self.0 >> p != 0 {
            return Err(Error::InvalidSubset(format!(
                "mask {:#b} references variables beyond p = {p}",
                self.0
            )));
        }
        Ok(())
    }
}

/// Values for the variables of a subset, listed in increasing variable index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    subset: VariableSubset,
    values: Vec<usize>,
}

impl Assignment {
    pub fn new(subset: VariableSubset, values: Vec<usize>) -> Result<Self> {
        if values.len() != subset.len() {
            return Err(Error::InvalidSubset(format!(
                "{} values for a subset of size {}",
                values.len(),
                subset.len()
            )));
        }
        Ok(Assignment { subset, values })
    }

    pub fn empty() -> Self {
        Assignment {
            subset: VariableSubset::empty(),
            values: Vec::new(),
        }
    }

    /// Restriction of a full instance `x` to `subset`.
    pub fn from_instance(subset: VariableSubset, x: &[usize]) -> Self {
        Assignment {
            subset,
            values: subset.indices().map(|i| x[i]).collect(),
        }
    }

    pub fn subset(&self) -> VariableSubset {
        self.subset
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.subset.indices().zip(self.values.iter().copied())
    }
}

/// Variable whose uncertainty is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Output,
    Input(usize),
}

/// Dense probability table over `X_1..X_p, Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    arities: Vec<usize>,
    probs: Vec<f64>,
    output_values: Vec<f64>,
    names: Vec<String>,
}

impl JointDistribution {
    /// `arities` lists the inputs followed by the output.
    pub fn new(arities: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if arities.len() < 2 {
            return Err(Error::InvalidJoint("need at least one input and one output".into()));
        }
        if arities.len() > 32 {
            return Err(Error::InvalidJoint("more than 31 input variables".into()));
        }
        if arities.contains(&0) {
            return Err(Error::InvalidJoint("zero arity".into()));
        }
        let cells = arities
            .iter()
            .try_fold(1usize, |acc, &a| acc.checked_mul(a).filter(|&c| c <= MAX_CELLS))
            .ok_or_else(|| Error::InvalidJoint(format!("table exceeds {MAX_CELLS} cells")))?;
        if probs.len() != cells {
            return Err(Error::InvalidJoint(format!(
                "table has {} entries, arities imply {cells}",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|q| !(q.is_finite() && **q >= 0.0)) {
            return Err(Error::InvalidJoint(format!("invalid probability {bad}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidJoint(format!("probabilities sum to {total}")));
        }
        let p = arities.len() - 1;
        let output_values = (0..arities[p]).map(|c| c as f64).collect();
        let mut names: Vec<String> = (1..=p).map(|i| format!("X{i}")).collect();
        names.push("Y".into());
        Ok(JointDistribution {
            arities,
            probs,
            output_values,
            names,
        })
    }

    /// Builds a joint from nonnegative weights, normalizing them to sum to one.
    pub fn from_weights(arities: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidJoint("weights must have positive finite total".into()));
        }
        Self::new(arities, weights.into_iter().map(|w| w / total).collect())
    }

    /// Real values attached to each output category (used by variance impurity).
    pub fn with_output_values(mut self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.output_arity() {
            return Err(Error::InvalidJoint(format!(
                "{} output values for {} categories",
                values.len(),
                self.output_arity()
            )));
        }
        self.output_values = values;
        Ok(self)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.arities.len() {
            return Err(Error::InvalidJoint("one name per variable required".into()));
        }
        self.names = names;
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.arities.len() - 1
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn input_arities(&self) -> &[usize] {
        &self.arities[..self.p()]
    }

    pub fn output_arity(&self) -> usize {
        self.arities[self.p()]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn output_values(&self) -> &[f64] {
        &self.output_values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Input variables with a single category (never useful for splitting).
    pub fn constant_inputs(&self) -> Vec<usize> {
        (0..self.p()).filter(|&i| self.arities[i] < 2).collect()
    }

    /// Flat table index of a full configuration `(x_1, ..., x_p, y)`.
    pub fn cell_index(&self, config: &[usize]) -> usize {
        config.iter().zip(&self.arities).fold(0, |acc, (&v, &a)| acc * a + v)
    }

    /// Inverse of [`JointDistribution::cell_index`].
    pub fn decode(&self, mut index: usize, config: &mut [usize]) {
        for (slot, &a) in config.iter_mut().zip(&self.arities).rev() {
            *slot = index % a;
            index /= a;
        }
    }

    /// Probability of `(x, y)`.
    pub fn prob(&self, x: &[usize], y: usize) -> f64 {
        let idx = x.iter().zip(&self.arities).fold(0, |acc, (&v, &a)| acc * a + v);
        self.probs[idx * self.output_arity() + y]
    }

    /// Marginal table over `vars` (indices in `0..=p`, `p` being the output), laid
    /// out mixed-radix in the listed order with the last variable fastest.
    pub fn marginal(&self, vars: &[usize]) -> Vec<f64> {
        let size: usize = vars.iter().map(|&v| self.arities[v]).product();
        let mut out = vec![0.0; size];
        let mut config = vec![0; self.arities.len()];
        for (idx, &q) in self.probs.iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            self.decode(idx, &mut config);
            let m = vars.iter().fold(0, |acc, &v| acc * self.arities[v] + config[v]);
            out[m] += q;
        }
        out
    }

    fn vars_of(&self, subset: VariableSubset, target: Option<Target>) -> Vec<usize> {
        let mut vars: Vec<usize> = subset.indices().collect();
        if let Some(t) = target {
            vars.push(self.target_index(t));
        }
        vars
    }

    fn target_index(&self, target: Target) -> usize {
        match target {
            Target::Output => self.p(),
            Target::Input(m) => m,
        }
    }

    fn target_values(&self, target: Target) -> Vec<f64> {
        match target {
            Target::Output => self.output_values.clone(),
            Target::Input(m) => (0..self.arities[m]).map(|c| c as f64).collect(),
        }
    }

    fn check_target(&self, target: Target, given: VariableSubset) -> Result<()> {
        given.check(self.p())?;
        if let Target::Input(m) = target {
            if m >= self.p() {
                return Err(Error::InvalidSubset(format!("input {m} out of range")));
            }
            if given.contains(m) {
                return Err(Error::InvalidSubset(format!(
                    "target X{} is part of the conditioning set",
                    m + 1
                )));
            }
        }
        Ok(())
    }

    fn check_assignment(&self, a: &Assignment) -> Result<()> {
        a.subset.check(self.p())?;
        for (var, val) in a.pairs() {
            if val >= self.arities[var] {
                return Err(Error::InvalidSubset(format!(
                    "value {val} out of range for X{}",
                    var + 1
                )));
            }
        }
        Ok(())
    }

    /// Joint entropy `H(S)` or `H(S, Y)`.
    pub fn entropy(&self, subset: VariableSubset, with_output: bool) -> f64 {
        let vars = self.vars_of(subset, with_output.then_some(Target::Output));
        let mut h = 0.0;
        for q in self.marginal(&vars) {
            if q > ZERO_PROB {
                h -= q * q.log2();
            }
        }
        h.max(0.0)
    }

    pub fn output_entropy(&self) -> f64 {
        self.entropy(VariableSubset::empty(), true)
    }

    /// `sum_b P(B=b) i(target | B=b)` for an arbitrary impurity.
    pub fn mean_impurity(&self, impurity: Impurity, target: Target, given: VariableSubset) -> Result<f64> {
        self.check_target(target, given)?;
        let vars = self.vars_of(given, Some(target));
        let table = self.marginal(&vars);
        let ta = self.arities[self.target_index(target)];
        let values = self.target_values(target);
        let mut acc = 0.0;
        for row in table.chunks(ta) {
            let mass: f64 = row.iter().sum();
            if mass > ZERO_PROB {
                acc += mass * impurity.of_weights(row, &values);
            }
        }
        Ok(acc)
    }

    /// Probability `P(S = x_S)`.
    pub fn assignment_prob(&self, a: &Assignment) -> f64 {
        let mut config = vec![0; self.arities.len()];
        let mut acc = 0.0;
        for (idx, &q) in self.probs.iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            self.decode(idx, &mut config);
            if a.pairs().all(|(v, val)| config[v] == val) {
                acc += q;
            }
        }
        acc
    }

    /// Unnormalized `P(target = t, S = x_S)` for each target category.
    pub fn target_weights_at(&self, target: Target, a: &Assignment) -> Result<Vec<f64>> {
        self.check_assignment(a)?;
        self.check_target(target, a.subset)?;
        let ti = self.target_index(target);
        let mut out = vec![0.0; self.arities[ti]];
        let mut config = vec![0; self.arities.len()];
        for (idx, &q) in self.probs.iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            self.decode(idx, &mut config);
            if a.pairs().all(|(v, val)| config[v] == val) {
                out[config[ti]] += q;
            }
        }
        Ok(out)
    }

    /// Impurity of the conditional distribution of `target` given `S = x_S`.
    pub fn impurity_at(&self, impurity: Impurity, target: Target, a: &Assignment) -> Result<f64> {
        let weights = self.target_weights_at(target, a)?;
        let mass: f64 = weights.iter().sum();
        if mass <= ZERO_PROB {
            return Err(Error::ZeroProbabilityContext);
        }
        Ok(impurity.of_weights(&weights, &self.target_values(target)))
    }

    /// Mean conditional entropy `H(target | given)`.
    pub fn cond_entropy_mean(&self, target: Target, given: VariableSubset) -> Result<f64> {
        self.mean_impurity(Impurity::Entropy, target, given)
    }

    /// Pointwise conditional entropy `H(target | S = x_S)`.
    pub fn cond_entropy_at(&self, target: Target, a: &Assignment) -> Result<f64> {
        self.impurity_at(Impurity::Entropy, target, a)
    }

    /// `I(target; S)`.
    pub fn mutual_info(&self, target: Target, subset: VariableSubset) -> Result<f64> {
        let h = self.cond_entropy_mean(target, VariableSubset::empty())?;
        let hc = self.cond_entropy_mean(target, subset)?;
        clamp_info(h - hc)
    }

    /// `I(target; X_m | B)`.
    pub fn cond_mutual_info(&self, target: Target, m: usize, given: VariableSubset) -> Result<f64> {
        if given.contains(m) {
            return Err(Error::InvalidSubset(format!(
                "X{} is already in the conditioning set",
                m + 1
            )));
        }
        let h = self.cond_entropy_mean(target, given)?;
        let hc = self.cond_entropy_mean(target, given.with(m))?;
        clamp_info(h - hc)
    }

    /// Probability of a full input configuration.
    pub fn instance_prob(&self, x: &[usize]) -> f64 {
        let k = self.output_arity();
        let base = x.iter().zip(&self.arities).fold(0, |acc, (&v, &a)| acc * a + v) * k;
        self.probs[base..base + k].iter().sum()
    }

    /// Input configurations with positive probability, in table order.
    pub fn input_support(&self) -> Vec<(Vec<usize>, f64)> {
        let k = self.output_arity();
        let p = self.p();
        let mut out = Vec::new();
        let mut config = vec![0; self.arities.len()];
        for (i, row) in self.probs.chunks(k).enumerate() {
            let mass: f64 = row.iter().sum();
            if mass > ZERO_PROB {
                self.decode(i * k, &mut config);
                out.push((config[..p].to_vec(), mass));
            }
        }
        out
    }

    /// Validates a full instance against the input arities.
    pub fn check_instance(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.p() {
            return Err(Error::ShapeMismatch(format!(
                "instance has {} values, joint has {} inputs",
                x.len(),
                self.p()
            )));
        }
        for (i, (&v, &a)) in x.iter().zip(self.input_arities()).enumerate() {
            if v >= a {
                return Err(Error::InvalidSubset(format!("value {v} out of range for X{}", i + 1)));
            }
        }
        Ok(())
    }
}

/// Clamps rounding-level negatives to zero and rejects larger ones.
pub fn clamp_info(value: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value > -NEGATIVE_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::NegativeInformation(value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table2() -> JointDistribution {
        // X1 uniform; P(Y=0|X1=0)=0.5, P(Y=0|X1=1)=1.
        JointDistribution::new(vec![2, 2], vec![0.25, 0.25, 0.5, 0.0]).unwrap()
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(JointDistribution::new(vec![2, 2], vec![0.5, 0.5]).is_err());
        assert!(JointDistribution::new(vec![2, 2], vec![0.5, 0.5, 0.1, 0.0]).is_err());
        assert!(JointDistribution::new(vec![2, 2], vec![1.5, -0.5, 0.0, 0.0]).is_err());
        assert!(JointDistribution::new(vec![2], vec![0.5, 0.5]).is_err());
        assert!(JointDistribution::new(vec![1 << 14, 1 << 14], vec![]).is_err());
    }

    #[test]
    fn subset_bits() {
        let s = VariableSubset::from_indices(&[0, 3]);
        assert_eq!(s.len(), 2);
        assert!(s.contains(3) && !s.contains(1));
        assert_eq!(s.indices().collect::<Vec<_>>(), vec![0, 3]);
        assert!(s.check(4).is_ok());
        assert!(s.check(3).is_err());
        assert!(VariableSubset::singleton(0).is_subset_of(s));
    }

    #[test]
    fn table2_entropies() {
        let j = table2();
        assert!((j.output_entropy() - 0.811_278_124_459_132_9).abs() < 1e-12);
        let h = j
            .cond_entropy_mean(Target::Output, VariableSubset::singleton(0))
            .unwrap();
        assert!((h - 0.5).abs() < 1e-12);
        let at0 = Assignment::new(VariableSubset::singleton(0), vec![0]).unwrap();
        assert!((j.cond_entropy_at(Target::Output, &at0).unwrap() - 1.0).abs() < 1e-12);
        let at1 = Assignment::new(VariableSubset::singleton(0), vec![1]).unwrap();
        assert_eq!(j.cond_entropy_at(Target::Output, &at1).unwrap(), 0.0);
    }

    #[test]
    fn empty_conditioning_is_plain_entropy() {
        let j = table2();
        let h = j.cond_entropy_mean(Target::Output, VariableSubset::empty()).unwrap();
        assert_eq!(h, j.output_entropy());
        assert_eq!(j.mutual_info(Target::Output, VariableSubset::empty()).unwrap(), 0.0);
    }

    #[test]
    fn zero_probability_context_is_an_error() {
        // X1 takes value 1 with probability zero.
        let j = JointDistribution::new(vec![2, 2], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let a = Assignment::new(VariableSubset::singleton(0), vec![1]).unwrap();
        assert_eq!(
            j.cond_entropy_at(Target::Output, &a),
            Err(Error::ZeroProbabilityContext)
        );
    }

    #[test]
    fn point_mass_has_zero_entropy() {
        let j = JointDistribution::new(vec![2, 2], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(j.output_entropy(), 0.0);
        assert_eq!(j.entropy(VariableSubset::full(1), true), 0.0);
    }

    #[test]
    fn target_in_conditioning_set_is_rejected() {
        let j = table2();
        assert!(j
            .cond_entropy_mean(Target::Input(0), VariableSubset::singleton(0))
            .is_err());
        assert!(j
            .cond_mutual_info(Target::Output, 0, VariableSubset::singleton(0))
            .is_err());
    }

    #[test]
    fn clamping() {
        assert_eq!(clamp_info(-1e-12).unwrap(), 0.0);
        assert!(clamp_info(-1e-6).is_err());
        assert_eq!(clamp_info(0.3).unwrap(), 0.3);
    }

    #[test]
    fn cell_index_roundtrip() {
        let j = JointDistribution::from_weights(vec![2, 3, 2], vec![1.0; 12]).unwrap();
        let mut c = vec![0; 3];
        for i in 0..12 {
            j.decode(i, &mut c);
            assert_eq!(j.cell_index(&c), i);
        }
        assert_eq!(j.input_support().len(), 6);
    }
}
