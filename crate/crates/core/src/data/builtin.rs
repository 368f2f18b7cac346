use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{population_dataset, Column, Dataset};
use crate::error::{Error, Result};
use crate::info::JointDistribution;

/// Segment order used by the LED problem.
pub const LED_SEGMENTS: [&str; 7] = [
    "top",
    "top_left",
    "top_right",
    "middle",
    "bottom_left",
    "bottom_right",
    "bottom",
];

/// Lit segments of each digit, in [`LED_SEGMENTS`] order.
pub const LED_PATTERNS: [[u8; 7]; 10] = [
    [1, 1, 1, 0, 1, 1, 1], // 0
    [0, 0, 1, 0, 0, 1, 0], // 1
    [1, 0, 1, 1, 1, 0, 1], // 2
    [1, 0, 1, 1, 0, 1, 1], // 3
    [0, 1, 1, 1, 0, 1, 0], // 4
    [1, 1, 0, 1, 0, 1, 1], // 5
    [1, 1, 0, 1, 1, 1, 1], // 6
    [1, 0, 1, 0, 0, 1, 0], // 7
    [1, 1, 1, 1, 1, 1, 1], // 8
    [1, 1, 1, 1, 0, 1, 1], // 9
];

fn led_columns(digits: &[usize]) -> Vec<Column> {
    let mut cols: Vec<Column> = LED_SEGMENTS
        .iter()
        .enumerate()
        .map(|(s, name)| Column::categorical(*name, 2, digits.iter().map(|&d| LED_PATTERNS[d][s] as usize).collect()))
        .collect();
    cols.push(Column::categorical("digit", 10, digits.to_vec()));
    cols
}

/// One row per digit: the noiseless seven-segment population.
pub fn led_population() -> Dataset {
    Dataset::new(led_columns(&(0..10).collect::<Vec<_>>()), None).expect("static LED table")
}

/// `n` uniformly drawn digits with their exact segment patterns.
pub fn led_sampled(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("led_sampled needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let digits: Vec<usize> = (0..n).map(|_| rng.gen_range(0..10)).collect();
    Dataset::new(led_columns(&digits), None)
}

/// Exact LED joint: `P(V = pattern(d), Y = d) = 0.1`.
pub fn led_joint() -> JointDistribution {
    super::joint_from_samples(&led_population()).expect("static LED table")
}

/// Joint over two uniform binary inputs with `P(Y=1 | X1, X2)` given in the order
/// `(0,0), (0,1), (1,0), (1,1)`.
pub fn binary_pair_joint(p_one: [f64; 4]) -> JointDistribution {
    let mut probs = Vec::with_capacity(8);
    for q in p_one {
        probs.push(0.25 * (1.0 - q));
        probs.push(0.25 * q);
    }
    JointDistribution::new(vec![2, 2, 2], probs).expect("valid conditional table")
}

/// Appendix-style example where strong monotonicity fails for K = 2, output `Y1`.
pub fn table1_y1() -> JointDistribution {
    binary_pair_joint([0.1, 0.5, 0.9, 0.4])
}

/// Companion output `Y2` of [`table1_y1`].
pub fn table1_y2() -> JointDistribution {
    binary_pair_joint([0.1, 0.8, 0.7, 0.3])
}

/// Single binary input with `P(Y=0|X1=0) = 0.5` and `P(Y=0|X1=1) = 1`.
pub fn table2() -> JointDistribution {
    JointDistribution::new(vec![2, 2], vec![0.25, 0.25, 0.5, 0.0]).expect("valid table")
}

/// Unweighted 40-row sample realizing the table-1 conditionals exactly
/// (10 rows per input cell).
pub fn table1_dataset(p_one: [f64; 4]) -> Result<Dataset> {
    let mut rows = Vec::new();
    for (cell, q) in p_one.iter().enumerate() {
        let ones = (q * 10.0).round() as usize;
        for r in 0..10 {
            rows.push(vec![cell >> 1, cell & 1, usize::from(r < ones)]);
        }
    }
    Dataset::from_rows(&["X1", "X2", "Y"], &[2, 2, 2], &rows)
}

/// Unweighted 4-row realization of [`table2`].
pub fn table2_dataset() -> Dataset {
    Dataset::from_rows(&["X1", "Y"], &[2, 2], &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 0]]).expect("static table")
}

/// `Y = X1 xor X2` with uniform inputs.
pub fn xor_joint() -> JointDistribution {
    binary_pair_joint([0.0, 1.0, 1.0, 0.0])
}

/// `X2 = X1`, `Y = X1`, `X1` uniform.
pub fn duplicate_joint() -> JointDistribution {
    let mut w = vec![0.0; 8];
    w[0] = 0.5; // (0,0,0)
    w[7] = 0.5; // (1,1,1)
    JointDistribution::new(vec![2, 2, 2], w).expect("valid table")
}

/// `Y` depends on `X1` only when `X2 = 1`.
pub fn context_joint() -> JointDistribution {
    binary_pair_joint([0.5, 0.2, 0.5, 0.8])
}

/// Regression problem: numeric-coded output with values `[0, 1, 2.5, 4]`.
pub fn regression_joint() -> JointDistribution {
    let arities = vec![2, 3, 2, 4];
    let mut weights = Vec::with_capacity(48);
    for x1 in 0..2 {
        for x2 in 0..3 {
            for x3 in 0..2 {
                for y in 0..4 {
                    let signal = (x1 + x2) % 4;
                    let mut w = 1.0;
                    if y == signal {
                        w += 4.0;
                    }
                    if x3 == 1 && y == 3 {
                        w += 1.5;
                    }
                    weights.push(w);
                }
            }
        }
    }
    JointDistribution::from_weights(arities, weights)
        .and_then(|j| j.with_output_values(vec![0.0, 1.0, 2.5, 4.0]))
        .expect("valid regression table")
}

/// Random joint over `p` inputs with arities in `2..=max_arity` and an output of
/// arity in `2..=max_arity`; each cell is zeroed with probability `sparsity`.
pub fn random_joint<R: Rng>(p: usize, max_arity: usize, sparsity: f64, rng: &mut R) -> JointDistribution {
    assert!(p >= 1 && max_arity >= 2);
    loop {
        let arities: Vec<usize> = (0..=p).map(|_| rng.gen_range(2..=max_arity)).collect();
        let cells: usize = arities.iter().product();
        let weights: Vec<f64> = (0..cells)
            .map(|_| {
                if rng.gen::<f64>() < sparsity {
                    0.0
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        if weights.iter().any(|&w| w > 0.0) {
            return JointDistribution::from_weights(arities, weights).expect("positive weights");
        }
    }
}

/// Adds a uniform input of the given arity, independent of everything else,
/// as the last input.
pub fn append_independent_input(j: &JointDistribution, arity: usize) -> JointDistribution {
    let p = j.p();
    let ka = j.output_arity();
    let mut arities = j.input_arities().to_vec();
    arities.push(arity);
    arities.push(ka);
    let mut probs = Vec::with_capacity(j.probs().len() * arity);
    for row in j.probs().chunks(ka) {
        for _ in 0..arity {
            probs.extend(row.iter().map(|q| q / arity as f64));
        }
    }
    let mut names = j.names()[..p].to_vec();
    names.push(format!("X{}", p + 1));
    names.push(j.names()[p].clone());
    JointDistribution::from_weights(arities, probs)
        .and_then(|n| n.with_output_values(j.output_values().to_vec()))
        .and_then(|n| n.with_names(names))
        .expect("extension of a valid joint")
}

/// Builtin problem with its training dataset and, when available, exact joint.
pub struct Builtin {
    pub name: String,
    pub dataset: Dataset,
    pub joint: Option<JointDistribution>,
}

pub const BUILTIN_NAMES: [&str; 9] = [
    "led",
    "led-sampled",
    "table1-y1",
    "table1-y2",
    "table2",
    "xor",
    "duplicate",
    "context",
    "regression",
];

/// Looks up a builtin problem; `seed` and `n` only affect `led-sampled`.
pub fn builtin(name: &str, n: usize, seed: u64) -> Result<Builtin> {
    let (dataset, joint) = match name {
        "led" => (led_population(), Some(led_joint())),
        "led-sampled" => {
            let d = led_sampled(n, seed)?;
            let j = super::joint_from_samples(&d)?;
            (d, Some(j))
        }
        "table1-y1" => (table1_dataset([0.1, 0.5, 0.9, 0.4])?, Some(table1_y1())),
        "table1-y2" => (table1_dataset([0.1, 0.8, 0.7, 0.3])?, Some(table1_y2())),
        "table2" => (table2_dataset(), Some(table2())),
        "xor" => {
            let j = xor_joint();
            (population_dataset(&j)?, Some(j))
        }
        "duplicate" => {
            let j = duplicate_joint();
            (population_dataset(&j)?, Some(j))
        }
        "context" => {
            let j = context_joint();
            (population_dataset(&j)?, Some(j))
        }
        "regression" => {
            let j = regression_joint();
            (population_dataset(&j)?, Some(j))
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown builtin `{other}` (expected one of {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    Ok(Builtin {
        name: name.to_string(),
        dataset,
        joint,
    })
}
