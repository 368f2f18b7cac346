use impshap::data::{
    append_independent_input, led_population, population_dataset, random_joint, sample_from_joint, table1_dataset,
    table1_y1, table1_y2, table2_dataset, Dataset,
};
use impshap::forest::{build_forest, training_mean, ClassSelector};
use impshap::{Impurity, JointDistribution, Target, VariableSubset};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sampled_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..=4, 2usize..=3, 5usize..60, any::<u64>())
        .prop_map(|(p, a, n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = random_joint(p, a, 0.2, &mut rng);
            sample_from_joint(&j, n, &mut rng).unwrap()
        })
        .prop_filter("some input must vary", |d| {
            d.features().iter().any(|c| !c.is_constant())
        })
}

/// Weighted empirical impurity of the output column, computed from scratch.
fn empirical_output_impurity(d: &Dataset, imp: Impurity) -> f64 {
    let k = d.output().arity().unwrap();
    let mut w = vec![0.0; k];
    for i in 0..d.n_rows() {
        w[d.output().values[i] as usize] += d.weight(i);
    }
    let total: f64 = w.iter().sum();
    let ps: Vec<f64> = w.iter().map(|v| v / total).collect();
    match imp {
        Impurity::Entropy => ps.iter().filter(|&&q| q > 0.0).map(|q| -q * q.log2()).sum(),
        Impurity::Gini => 1.0 - ps.iter().map(|q| q * q).sum::<f64>(),
        Impurity::Variance => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn global_is_training_mean_of_local(d in sampled_dataset(), seed in any::<u64>()) {
        let p = d.n_features();
        for k in 1..=p {
            for imp in [Impurity::Entropy, Impurity::Gini] {
                let f = build_forest(&d, k, 8, imp, seed).unwrap();
                let local = f.local_mdi(&d.instances()).unwrap();
                prop_assert!(max_diff(&f.global_mdi(), &training_mean(&d, &local)) < 1e-10);
            }
        }
    }

    #[test]
    fn local_rows_telescope(d in sampled_dataset(), seed in any::<u64>(), k in 1usize..=4) {
        let k = k.min(d.n_features());
        let f = build_forest(&d, k, 6, Impurity::Entropy, seed).unwrap();
        let xs = d.instances();
        let local = f.local_mdi(&xs).unwrap();
        for (x, sum) in xs.iter().zip(local.row_sums()) {
            let expected = f.trees.iter().map(|t| {
                let last = t.node(t.predict(x).unwrap().node());
                t.root().impurity - last.impurity
            }).sum::<f64>() / f.n_trees as f64;
            prop_assert!((sum - expected).abs() < 1e-10);
        }
        let saabas = f.saabas(&xs, ClassSelector::Predicted).unwrap();
        let (base, pred) = (saabas.baseline.clone().unwrap(), saabas.prediction.clone().unwrap());
        for ((s, b), q) in saabas.row_sums().iter().zip(&base).zip(&pred) {
            prop_assert!((s - (q - b)).abs() < 1e-9);
        }
    }

    #[test]
    fn fully_grown_forest_efficiency(d in sampled_dataset(), seed in any::<u64>()) {
        let p = d.n_features();
        let sqrt_p = ((p as f64).sqrt().floor() as usize).max(1);
        let root = empirical_output_impurity(&d, Impurity::Entropy);
        for k in [1, sqrt_p, p] {
            let f = build_forest(&d, k, 5, Impurity::Entropy, seed).unwrap();
            let leaf: f64 = f.trees.iter().map(|t| {
                t.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.mass * n.impurity).sum::<f64>()
            }).sum::<f64>() / f.n_trees as f64;
            let total: f64 = f.global_mdi().iter().sum();
            prop_assert!((total - (root - leaf)).abs() < 1e-12, "{total} vs {}", root - leaf);
        }
    }
}

#[test]
fn same_seed_same_forest_regardless_of_threads() {
    let d = led_population();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| build_forest(&d, 2, 200, Impurity::Entropy, 11).unwrap());
    let b = four.install(|| build_forest(&d, 2, 200, Impurity::Entropy, 11).unwrap());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let ga = one.install(|| a.global_mdi());
    let gb = four.install(|| b.global_mdi());
    assert_eq!(ga, gb);
    let c = build_forest(&d, 2, 200, Impurity::Entropy, 12).unwrap();
    assert_ne!(
        serde_json::to_string(&a.trees).unwrap(),
        serde_json::to_string(&c.trees).unwrap()
    );
}

fn mi(j: &JointDistribution, m: usize, given: VariableSubset) -> f64 {
    j.cond_mutual_info(Target::Output, m, given).unwrap()
}

#[test]
fn k2_trees_on_table1_break_monotonicity() {
    let d1 = population_dataset(&table1_y1()).unwrap();
    let d2 = population_dataset(&table1_y2()).unwrap();
    let f1 = build_forest(&d1, 2, 10, Impurity::Entropy, 0).unwrap();
    let f2 = build_forest(&d2, 2, 10, Impurity::Entropy, 0).unwrap();
    assert_eq!(f1.distinct_structures(), 1);
    let (i1, i2) = (f1.global_mdi(), f2.global_mdi());
    assert!((i1[0] - 0.091).abs() < 5e-4 && (i1[1] - 0.180).abs() < 5e-4);
    assert!((i2[0] - 0.243).abs() < 5e-4 && (i2[1] - 0.016).abs() < 5e-4);
    // X1 carries more information about Y1 in every context yet ranks higher for Y2.
    let (j1, j2) = (table1_y1(), table1_y2());
    let ctx = [VariableSubset::empty(), VariableSubset::singleton(1)];
    assert!(ctx.iter().all(|&s| mi(&j1, 0, s) >= mi(&j2, 0, s)));
    assert!(i1[0] < i2[0]);
    let ctx = [VariableSubset::empty(), VariableSubset::singleton(0)];
    assert!(ctx.iter().all(|&s| mi(&j2, 1, s) >= mi(&j1, 1, s)));
    assert!(i2[1] < i1[1]);
}

#[test]
fn unweighted_and_weighted_population_agree() {
    let a = build_forest(
        &table1_dataset([0.1, 0.5, 0.9, 0.4]).unwrap(),
        2,
        4,
        Impurity::Entropy,
        3,
    )
    .unwrap();
    let b = build_forest(&population_dataset(&table1_y1()).unwrap(), 2, 4, Impurity::Entropy, 3).unwrap();
    assert!(max_diff(&a.global_mdi(), &b.global_mdi()) < 1e-12);
}

#[test]
fn irrelevant_feature_gets_nothing_for_every_k() {
    let j = append_independent_input(&table1_y1(), 3);
    let d = population_dataset(&j).unwrap();
    for k in 1..=3 {
        let f = build_forest(&d, k, 300, Impurity::Entropy, k as u64).unwrap();
        let g = f.global_mdi();
        assert!(g[2].abs() < 1e-12, "K={k}: {g:?}");
        let local = f.local_mdi(&d.instances()).unwrap();
        assert!(local.scores.iter().all(|r| r[2].abs() < 1e-12));
    }
}

#[test]
fn table2_local_mdi_is_negative() {
    let d = table2_dataset();
    let f = build_forest(&d, 1, 10, Impurity::Entropy, 0).unwrap();
    let local = f.local_mdi(&[vec![0.0]]).unwrap();
    assert!((local.scores[0][0] + 0.18872).abs() < 1e-4);
}

#[test]
fn led_totally_randomized_structures() {
    // Regression value for seed 0; every tree uses each segment at most once per path.
    let f = build_forest(&led_population(), 1, 1000, Impurity::Entropy, 0).unwrap();
    let distinct = f.distinct_structures();
    println!("distinct structures: {distinct}");
    assert_eq!(distinct, DISTINCT_LED_STRUCTURES);
    let total: f64 = f.global_mdi().iter().sum();
    assert!((total - 10f64.log2()).abs() < 1e-9);
}

const DISTINCT_LED_STRUCTURES: usize = 886;
