//! Exhaustive relevance oracles on probability tables: global (conditional
//! independence over every context) and local (fixed to one instance's values).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::MAX_PLAYERS;
use crate::impurity::{Impurity, ZERO_PROB};
use crate::info::{Assignment, JointDistribution, Target, VariableSubset};
use crate::population::{pop_global_mdi, pop_local_mdi};

/// Absolute tolerance on conditional-probability differences.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Local MDI below this counts as zero in the zero-score checks.
pub const ZERO_SCORE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "scope", rename_all = "kebab-case")]
pub enum RelevanceScope {
    Global,
    Local { instance: Vec<usize> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Irrelevant,
    Relevant,
    StronglyRelevant,
}

/// Where `P(y | x_m, b) != P(y | b)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub subset: Vec<usize>,
    pub context: Vec<usize>,
    pub feature_value: usize,
    pub output: usize,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelevanceVerdict {
    pub feature: usize,
    #[serde(flatten)]
    pub scope: RelevanceScope,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
}

impl RelevanceVerdict {
    pub fn is_irrelevant(&self) -> bool {
        self.verdict == Verdict::Irrelevant
    }
}

fn check(j: &JointDistribution, m: usize) -> Result<()> {
    if j.p() > MAX_PLAYERS {
        return Err(Error::PlayerCountTooLarge(j.p()));
    }
    if m >= j.p() {
        return Err(Error::InvalidSubset(format!("feature {m} out of range")));
    }
    Ok(())
}

/// Largest `|P(y | x_m, b) - P(y | b)|` over contexts `b` of `B` with positive mass.
fn max_gap_for_subset(j: &JointDistribution, m: usize, b: VariableSubset) -> Option<Witness> {
    let mut vars: Vec<usize> = b.indices().collect();
    vars.push(m);
    vars.push(j.p());
    let table = j.marginal(&vars);
    let am = j.arities()[m];
    let ky = j.output_arity();
    let b_arities: Vec<usize> = b.indices().map(|i| j.arities()[i]).collect();
    let mut best: Option<Witness> = None;
    for (ctx, block) in table.chunks(am * ky).enumerate() {
        let pb: f64 = block.iter().sum();
        if pb <= ZERO_PROB {
            continue;
        }
        let mut py_b = vec![0.0; ky];
        for row in block.chunks(ky) {
            for (acc, q) in py_b.iter_mut().zip(row) {
                *acc += q;
            }
        }
        for (xm, row) in block.chunks(ky).enumerate() {
            let pbx: f64 = row.iter().sum();
            if pbx <= ZERO_PROB {
                continue;
            }
            for y in 0..ky {
                let gap = (row[y] / pbx - py_b[y] / pb).abs();
                if best.as_ref().is_none_or(|w| gap > w.gap) {
                    best = Some(Witness {
                        subset: b.indices().collect(),
                        context: decode_context(ctx, &b_arities),
                        feature_value: xm,
                        output: y,
                        gap,
                    });
                }
            }
        }
    }
    best
}

fn decode_context(mut idx: usize, arities: &[usize]) -> Vec<usize> {
    let mut out = vec![0; arities.len()];
    for (slot, &a) in out.iter_mut().zip(arities).rev() {
        *slot = idx % a;
        idx /= a;
    }
    out
}

/// Irrelevant iff `Y` is independent of `X_m` given every subset `B` of the others.
pub fn is_irrelevant(j: &JointDistribution, m: usize, tol: f64) -> Result<RelevanceVerdict> {
    check(j, m)?;
    let p = j.p();
    let mut worst: Option<Witness> = None;
    for b in crate::game::coalitions_without(p, &[m]) {
        if let Some(w) = max_gap_for_subset(j, m, b) {
            if worst.as_ref().is_none_or(|cur| w.gap > cur.gap) {
                worst = Some(w);
            }
        }
    }
    let relevant = worst.as_ref().is_some_and(|w| w.gap >= tol);
    Ok(RelevanceVerdict {
        feature: m,
        scope: RelevanceScope::Global,
        verdict: if relevant {
            Verdict::Relevant
        } else {
            Verdict::Irrelevant
        },
        witness: if relevant { worst } else { None },
    })
}

/// Strongly relevant iff `Y` depends on `X_m` given all other inputs; otherwise
/// the verdict falls back to [`is_irrelevant`].
pub fn is_strongly_relevant(j: &JointDistribution, m: usize, tol: f64) -> Result<RelevanceVerdict> {
    check(j, m)?;
    let rest = VariableSubset::full(j.p()).without(m);
    if let Some(w) = max_gap_for_subset(j, m, rest) {
        if w.gap >= tol {
            return Ok(RelevanceVerdict {
                feature: m,
                scope: RelevanceScope::Global,
                verdict: Verdict::StronglyRelevant,
                witness: Some(w),
            });
        }
    }
    is_irrelevant(j, m, tol)
}

/// Locally irrelevant at `x` iff `P(y | x_m, x_B) = P(y | x_B)` for every `B` and `y`.
pub fn is_locally_irrelevant(j: &JointDistribution, m: usize, x: &[usize], tol: f64) -> Result<RelevanceVerdict> {
    check(j, m)?;
    j.check_instance(x)?;
    if j.instance_prob(x) <= ZERO_PROB {
        return Err(Error::ZeroProbabilityInstance);
    }
    let mut worst: Option<Witness> = None;
    for b in crate::game::coalitions_without(j.p(), &[m]) {
        let without = j.target_weights_at(Target::Output, &Assignment::from_instance(b, x))?;
        let with = j.target_weights_at(Target::Output, &Assignment::from_instance(b.with(m), x))?;
        let (pb, pbx): (f64, f64) = (without.iter().sum(), with.iter().sum());
        for y in 0..j.output_arity() {
            let gap = (with[y] / pbx - without[y] / pb).abs();
            if worst.as_ref().is_none_or(|w| gap > w.gap) {
                worst = Some(Witness {
                    subset: b.indices().collect(),
                    context: b.indices().map(|i| x[i]).collect(),
                    feature_value: x[m],
                    output: y,
                    gap,
                });
            }
        }
    }
    let relevant = worst.as_ref().is_some_and(|w| w.gap >= tol);
    Ok(RelevanceVerdict {
        feature: m,
        scope: RelevanceScope::Local { instance: x.to_vec() },
        verdict: if relevant {
            Verdict::Relevant
        } else {
            Verdict::Irrelevant
        },
        witness: if relevant { worst } else { None },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GlobalLocalAgreement {
    pub feature: usize,
    pub globally_irrelevant: bool,
    pub locally_irrelevant_everywhere: bool,
    pub agree: bool,
    /// Asymptotic global MDI under entropy; zero exactly for irrelevant features.
    pub global_mdi: f64,
}

/// Global irrelevance versus local irrelevance at every supported instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IrrelevanceAgreementReport {
    pub features: Vec<GlobalLocalAgreement>,
}

impl IrrelevanceAgreementReport {
    pub fn passes(&self) -> bool {
        self.features.iter().all(|f| f.agree)
    }
}

pub fn verify_thm3(j: &JointDistribution) -> Result<IrrelevanceAgreementReport> {
    let support = j.input_support();
    let global = pop_global_mdi(j, Impurity::Entropy)?;
    let features = (0..j.p())
        .map(|m| {
            let globally_irrelevant = is_irrelevant(j, m, DEFAULT_TOLERANCE)?.is_irrelevant();
            let mut everywhere = true;
            for (x, _) in &support {
                if !is_locally_irrelevant(j, m, x, DEFAULT_TOLERANCE)?.is_irrelevant() {
                    everywhere = false;
                    break;
                }
            }
            Ok(GlobalLocalAgreement {
                feature: m,
                globally_irrelevant,
                locally_irrelevant_everywhere: everywhere,
                agree: globally_irrelevant == everywhere,
                global_mdi: global.scores[m],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IrrelevanceAgreementReport { features })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalScoreCase {
    pub feature: usize,
    pub instance: Vec<usize>,
    pub score: f64,
}

/// Local irrelevance implies zero asymptotic local MDI.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroScoreReport {
    /// Every locally irrelevant `(m, x)` with its score.
    pub irrelevant_cases: Vec<LocalScoreCase>,
    pub max_irrelevant_score: f64,
    /// Locally relevant yet zero-scored pairs (allowed).
    pub relevant_with_zero_score: Vec<LocalScoreCase>,
    /// Globally relevant features with no nonzero local score anywhere (must be empty).
    pub relevant_features_without_nonzero_score: Vec<usize>,
}

impl ZeroScoreReport {
    pub fn passes(&self) -> bool {
        self.max_irrelevant_score < ZERO_SCORE_TOLERANCE && self.relevant_features_without_nonzero_score.is_empty()
    }
}

pub fn verify_thm4(j: &JointDistribution) -> Result<ZeroScoreReport> {
    let support = j.input_support();
    let mut irrelevant_cases = Vec::new();
    let mut relevant_with_zero_score = Vec::new();
    let mut nonzero_somewhere = vec![false; j.p()];
    for (x, _) in &support {
        let local = pop_local_mdi(j, x, Impurity::Entropy)?;
        for (m, &score) in local.scores.iter().enumerate() {
            if score.abs() >= ZERO_SCORE_TOLERANCE {
                nonzero_somewhere[m] = true;
            }
            let case = LocalScoreCase {
                feature: m,
                instance: x.clone(),
                score,
            };
            if is_locally_irrelevant(j, m, x, DEFAULT_TOLERANCE)?.is_irrelevant() {
                irrelevant_cases.push(case);
            } else if score.abs() < ZERO_SCORE_TOLERANCE {
                relevant_with_zero_score.push(case);
            }
        }
    }
    let mut relevant_features_without_nonzero_score = Vec::new();
    for (m, &nz) in nonzero_somewhere.iter().enumerate() {
        if !nz && !is_irrelevant(j, m, DEFAULT_TOLERANCE)?.is_irrelevant() {
            relevant_features_without_nonzero_score.push(m);
        }
    }
    let max_irrelevant_score = irrelevant_cases.iter().map(|c| c.score.abs()).fold(0.0, f64::max);
    Ok(ZeroScoreReport {
        irrelevant_cases,
        max_irrelevant_score,
        relevant_with_zero_score,
        relevant_features_without_nonzero_score,
    })
}
