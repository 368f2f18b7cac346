//! Asymptotic MDI importances of totally randomized trees, evaluated directly on a
//! joint distribution: the global conditional-information sum and its pointwise
//! local counterpart, with the identities that tie them together.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{binomial_table, coalitions_without, MAX_PLAYERS};
use crate::impurity::{Impurity, ZERO_PROB};
use crate::info::{clamp_info, Assignment, JointDistribution, Target, VariableSubset};

/// Residual bound for the decomposition identities.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "scope", rename_all = "lowercase")]
pub enum Scope {
    Global,
    Local { instance: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PopulationImportance {
    pub scores: Vec<f64>,
    pub impurity: Impurity,
    #[serde(flatten)]
    pub scope: Scope,
}

impl PopulationImportance {
    pub fn total(&self) -> f64 {
        self.scores.iter().sum()
    }
}

/// Weight of a conditioning set of size `k`: `1 / (C(p, k) (p - k))`.
fn depth_weights(p: usize) -> Vec<f64> {
    let binom = binomial_table(p);
    (0..p).map(|k| 1.0 / (binom[p][k] as f64 * (p - k) as f64)).collect()
}

fn check_size(j: &JointDistribution) -> Result<()> {
    if j.p() > MAX_PLAYERS {
        return Err(Error::PlayerCountTooLarge(j.p()));
    }
    Ok(())
}

/// Mean conditional impurity `E_B i(Y | B)` for every subset `B`.
fn mean_impurity_table(j: &JointDistribution, impurity: Impurity) -> Result<Vec<f64>> {
    (0..1u32 << j.p())
        .into_par_iter()
        .map(|bits| j.mean_impurity(impurity, Target::Output, VariableSubset::from_bits(bits)))
        .collect()
}

/// Pointwise impurity `i(Y | B = x_B)` for every subset `B`.
fn local_impurity_table(j: &JointDistribution, x: &[usize], impurity: Impurity) -> Result<Vec<f64>> {
    (0..1u32 << j.p())
        .into_par_iter()
        .map(|bits| {
            let a = Assignment::from_instance(VariableSubset::from_bits(bits), x);
            j.impurity_at(impurity, Target::Output, &a)
        })
        .collect()
}

/// Global MDI of an infinite forest of totally randomized trees grown on the
/// population:
/// `Imp(X_m) = sum_k 1/(C(p,k)(p-k)) sum_{|B|=k, m not in B} [i(Y|B) - i(Y|B,X_m)]`,
/// where the bracket is the conditional mutual information under entropy.
pub fn pop_global_mdi(j: &JointDistribution, impurity: Impurity) -> Result<PopulationImportance> {
    check_size(j)?;
    let p = j.p();
    let weights = depth_weights(p);
    let mean = mean_impurity_table(j, impurity)?;
    let scores = (0..p)
        .map(|m| {
            coalitions_without(p, &[m]).try_fold(0.0, |acc, b| {
                let gain = clamp_info(mean[b.bits() as usize] - mean[b.with(m).bits() as usize])?;
                Ok(acc + weights[b.len()] * gain)
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PopulationImportance {
        scores,
        impurity,
        scope: Scope::Global,
    })
}

/// Local MDI at instance `x`:
/// `Imp(X_m, x) = sum_k 1/(C(p,k)(p-k)) sum_B [i(Y|B=x_B) - i(Y|B=x_B, X_m=x_m)]`.
///
/// Terms may be negative.
pub fn pop_local_mdi(j: &JointDistribution, x: &[usize], impurity: Impurity) -> Result<PopulationImportance> {
    check_size(j)?;
    j.check_instance(x)?;
    if j.instance_prob(x) <= ZERO_PROB {
        return Err(Error::ZeroProbabilityInstance);
    }
    let p = j.p();
    let weights = depth_weights(p);
    let at = local_impurity_table(j, x, impurity)?;
    let scores = (0..p)
        .map(|m| {
            coalitions_without(p, &[m])
                .map(|b| weights[b.len()] * (at[b.bits() as usize] - at[b.with(m).bits() as usize]))
                .sum()
        })
        .collect();
    Ok(PopulationImportance {
        scores,
        impurity,
        scope: Scope::Local { instance: x.to_vec() },
    })
}

/// Local importances at every positive-probability input configuration.
pub fn pop_local_all(
    j: &JointDistribution,
    impurity: Impurity,
) -> Result<Vec<(Vec<usize>, f64, PopulationImportance)>> {
    j.input_support()
        .into_iter()
        .map(|(x, px)| {
            let imp = pop_local_mdi(j, &x, impurity)?;
            Ok((x, px, imp))
        })
        .collect()
}

/// Total information the importances should distribute: `i(Y) - E_V i(Y | V)`.
pub fn total_gain(j: &JointDistribution, impurity: Impurity) -> Result<f64> {
    let root = j.mean_impurity(impurity, Target::Output, VariableSubset::empty())?;
    let leaf = j.mean_impurity(impurity, Target::Output, VariableSubset::full(j.p()))?;
    Ok(root - leaf)
}

/// Residuals of the feature, instance and double decompositions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub impurity: Impurity,
    pub total: f64,
    pub global: Vec<f64>,
    /// `|sum_m Imp(X_m) - total|`
    pub efficiency_residual: f64,
    /// Per feature `|Imp(X_m) - sum_x P(x) Imp(X_m, x)|`.
    pub instance_residuals: Vec<f64>,
    /// `|sum_m sum_x P(x) Imp(X_m, x) - total|`
    pub double_residual: f64,
}

impl DecompositionReport {
    pub fn max_instance_residual(&self) -> f64 {
        self.instance_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.efficiency_residual < tol && self.max_instance_residual() < tol && self.double_residual < tol
    }
}

pub fn check_decompositions(j: &JointDistribution, impurity: Impurity) -> Result<DecompositionReport> {
    let total = total_gain(j, impurity)?;
    let global = pop_global_mdi(j, impurity)?;
    let p = j.p();
    let mut weighted = vec![0.0; p];
    for (_, px, local) in pop_local_all(j, impurity)? {
        for (acc, s) in weighted.iter_mut().zip(&local.scores) {
            *acc += px * s;
        }
    }
    let instance_residuals = global
        .scores
        .iter()
        .zip(&weighted)
        .map(|(g, w)| (g - w).abs())
        .collect();
    Ok(DecompositionReport {
        impurity,
        total,
        efficiency_residual: (global.total() - total).abs(),
        instance_residuals,
        double_residual: (weighted.iter().sum::<f64>() - total).abs(),
        global: global.scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table2() -> JointDistribution {
        JointDistribution::new(vec![2, 2], vec![0.25, 0.25, 0.5, 0.0]).unwrap()
    }

    #[test]
    fn depth_weights_sum_to_one_over_subsets() {
        // Each feature sees C(p-1, k) subsets of size k; the weights form a distribution.
        for p in 1..8 {
            let w = depth_weights(p);
            let b = binomial_table(p);
            let total: f64 = (0..p).map(|k| w[k] * b[p - 1][k] as f64).sum();
            assert!((total - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn single_feature_is_mutual_information() {
        let imp = pop_global_mdi(&table2(), Impurity::Entropy).unwrap();
        assert!((imp.scores[0] - 0.311_278_124_459_132_9).abs() < 1e-12);
    }

    #[test]
    fn table2_negative_local_score() {
        let imp = pop_local_mdi(&table2(), &[0], Impurity::Entropy).unwrap();
        assert!((imp.scores[0] - (0.811_278_124_459_132_9 - 1.0)).abs() < 1e-12);
        let imp1 = pop_local_mdi(&table2(), &[1], Impurity::Entropy).unwrap();
        assert!((imp1.scores[0] - 0.811_278_124_459_132_9).abs() < 1e-12);
    }

    #[test]
    fn table2_instance_decomposition() {
        let r = check_decompositions(&table2(), Impurity::Entropy).unwrap();
        assert!(r.passes(1e-12));
        assert!((r.total - 0.311_278_124_459_132_9).abs() < 1e-12);
    }

    #[test]
    fn independent_output_has_zero_everything() {
        let j = JointDistribution::from_weights(vec![2, 3, 2], vec![1.0; 12]).unwrap();
        let r = check_decompositions(&j, Impurity::Entropy).unwrap();
        assert!(r.global.iter().all(|v| v.abs() < 1e-12));
        assert!(r.total.abs() < 1e-12);
    }

    #[test]
    fn zero_probability_instance_rejected() {
        let j = JointDistribution::new(vec![2, 2], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(
            pop_local_mdi(&j, &[1], Impurity::Entropy),
            Err(Error::ZeroProbabilityInstance)
        );
    }
}
