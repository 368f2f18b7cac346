use impshap::data::{dataset_to_joint, random_joint, sample_from_joint, table1_y1, Dataset};
use impshap::{Assignment, Impurity, JointDistribution, Target, VariableSubset};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn joint_strategy() -> impl Strategy<Value = JointDistribution> {
    (1usize..=4, 2usize..=3, 0.0f64..0.5, any::<u64>()).prop_map(|(p, a, sparsity, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_joint(p, a, sparsity, &mut rng)
    })
}

/// Entropy computed from a flat list of probabilities, independent of the library.
fn h(ps: impl IntoIterator<Item = f64>) -> f64 {
    ps.into_iter().filter(|&q| q > 0.0).map(|q| -q * q.log2()).sum()
}

/// `H(Y | B)` by explicit grouping of the full table.
fn oracle_cond_entropy(j: &JointDistribution, b: VariableSubset) -> f64 {
    let p = j.p();
    let mut groups: std::collections::BTreeMap<Vec<usize>, Vec<f64>> = Default::default();
    let mut config = vec![0; p + 1];
    for (idx, &q) in j.probs().iter().enumerate() {
        j.decode(idx, &mut config);
        let key: Vec<usize> = b.indices().map(|i| config[i]).collect();
        let row = groups.entry(key).or_insert_with(|| vec![0.0; j.output_arity()]);
        row[config[p]] += q;
    }
    groups
        .values()
        .map(|row| {
            let pb: f64 = row.iter().sum();
            if pb == 0.0 {
                0.0
            } else {
                pb * h(row.iter().map(|q| q / pb))
            }
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_rule(j in joint_strategy(), bits in any::<u32>()) {
        let b = VariableSubset::from_bits(bits & ((1 << j.p()) - 1));
        let joint = j.entropy(b, true);
        let marginal = j.entropy(b, false);
        let cond = j.cond_entropy_mean(Target::Output, b).unwrap();
        prop_assert!((joint - marginal - cond).abs() < 1e-10);
        prop_assert!((cond - oracle_cond_entropy(&j, b)).abs() < 1e-10);
    }

    #[test]
    fn information_is_monotone(j in joint_strategy(), a in any::<u32>(), b in any::<u32>()) {
        let mask = (1u32 << j.p()) - 1;
        let s = VariableSubset::from_bits(a & mask);
        let t = VariableSubset::from_bits((a | b) & mask);
        let small = j.mutual_info(Target::Output, s).unwrap();
        let big = j.mutual_info(Target::Output, t).unwrap();
        prop_assert!(small >= 0.0);
        prop_assert!(big >= small - 1e-12);
        prop_assert!(big <= j.output_entropy() + 1e-12);
    }

    #[test]
    fn mean_is_average_of_pointwise(j in joint_strategy(), bits in any::<u32>()) {
        let b = VariableSubset::from_bits(bits & ((1 << j.p()) - 1));
        let mean = j.cond_entropy_mean(Target::Output, b).unwrap();
        let mut avg = 0.0;
        for (x, px) in j.input_support() {
            let a = Assignment::from_instance(b, &x);
            // Sum over full configurations: P(x) H(Y | x_B) averages to E_B H(Y | B).
            avg += px * j.cond_entropy_at(Target::Output, &a).unwrap();
        }
        prop_assert!((mean - avg).abs() < 1e-10);
    }

    #[test]
    fn conditional_mutual_information_chain(j in joint_strategy(), bits in any::<u32>()) {
        prop_assume!(j.p() >= 2);
        let b = VariableSubset::from_bits(bits & ((1 << j.p()) - 1)).without(0);
        let m = VariableSubset::singleton(0);
        let lhs = j.mutual_info(Target::Output, b.union(m)).unwrap();
        let rhs = j.mutual_info(Target::Output, b).unwrap()
            + j.cond_mutual_info(Target::Output, 0, b).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn impurities_are_nonnegative(j in joint_strategy()) {
        for imp in [Impurity::Entropy, Impurity::Gini, Impurity::Variance] {
            for bits in 0..(1u32 << j.p()) {
                let v = j.mean_impurity(imp, Target::Output, VariableSubset::from_bits(bits)).unwrap();
                prop_assert!(v >= -1e-12);
            }
        }
    }
}

#[test]
fn weighted_rows_normalize() {
    let d = Dataset::from_rows(&["x", "y"], &[2, 2], &[vec![0, 0], vec![1, 1]])
        .unwrap()
        .with_weights(vec![3.0, 1.0])
        .unwrap();
    let j = dataset_to_joint(&d).unwrap();
    assert!((j.prob(&[0], 0) - 0.75).abs() < 1e-15);
    assert!((j.prob(&[1], 1) - 0.25).abs() < 1e-15);
}

#[test]
fn sampling_roundtrip_converges() {
    // Expected L1 error grows like sqrt(cells / N); these tables have 8 and 16 cells.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for j in [table1_y1(), random_joint(3, 2, 0.2, &mut rng)] {
        let d = sample_from_joint(&j, 100_000, &mut rng).unwrap();
        let back = dataset_to_joint(&d).unwrap();
        assert_eq!(back.arities(), j.arities());
        let l1: f64 = back.probs().iter().zip(j.probs()).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 < 0.02, "L1 = {l1}");
    }
}
