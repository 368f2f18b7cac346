//! Node impurity functions shared by the tree builder and the population formulas.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Probabilities below this are treated as exact zeros.
pub const ZERO_PROB: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Impurity {
    /// Shannon entropy in bits.
    Entropy,
    Gini,
    /// Variance of the output, reading category codes (or numeric values) as reals.
    Variance,
}

impl Impurity {
    /// Impurity of an output distribution given as nonnegative weights per output value.
    ///
    /// `weights` need not be normalized. `values` gives the real value of each output
    /// category and is only consulted by [`Impurity::Variance`].
    pub fn of_weights(self, weights: &[f64], values: &[f64]) -> f64 {
        let total: f64 = weights.iter().sum();
        if total <= ZERO_PROB {
            return 0.0;
        }
        match self {
            Impurity::Entropy => {
                let mut h = 0.0;
                for &w in weights {
                    let p = w / total;
                    if p > ZERO_PROB {
                        h -= p * p.log2();
                    }
                }
                h.max(0.0)
            }
            Impurity::Gini => {
                let sq: f64 = weights.iter().map(|w| (w / total) * (w / total)).sum();
                (1.0 - sq).max(0.0)
            }
            Impurity::Variance => {
                let mean: f64 = weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / total;
                let var: f64 = weights
                    .iter()
                    .zip(values)
                    .map(|(w, v)| w * (v - mean) * (v - mean))
                    .sum::<f64>()
                    / total;
                var.max(0.0)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Impurity::Entropy => "entropy",
            Impurity::Gini => "gini",
            Impurity::Variance => "variance",
        }
    }
}

impl fmt::Display for Impurity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Impurity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "entropy" => Ok(Impurity::Entropy),
            "gini" => Ok(Impurity::Gini),
            "variance" => Ok(Impurity::Variance),
            other => Err(Error::InvalidParameter(format!("unknown impurity `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_of_uniform_and_point_mass() {
        let vals = [0.0, 1.0, 2.0, 3.0];
        assert!((Impurity::Entropy.of_weights(&[1.0; 4], &vals) - 2.0).abs() < 1e-15);
        assert_eq!(Impurity::Entropy.of_weights(&[0.0, 3.0, 0.0, 0.0], &vals), 0.0);
    }

    #[test]
    fn gini_and_variance_of_fair_coin() {
        let vals = [0.0, 1.0];
        assert!((Impurity::Gini.of_weights(&[2.0, 2.0], &vals) - 0.5).abs() < 1e-15);
        assert!((Impurity::Variance.of_weights(&[2.0, 2.0], &vals) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empty_weights_have_zero_impurity() {
        for imp in [Impurity::Entropy, Impurity::Gini, Impurity::Variance] {
            assert_eq!(imp.of_weights(&[0.0, 0.0], &[0.0, 1.0]), 0.0);
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("Gini".parse::<Impurity>().unwrap(), Impurity::Gini);
        assert!("mse".parse::<Impurity>().is_err());
    }
}
