mod common;

use common::{arb_tree, mean_and_se, two_state_graph};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rdsgls::estimators::{
    auto_fgls, delta_fgls, lag_statistics, mean_estimator, oracle_gls, outcome_blocks, sbm_fgls,
    sbm_fgls_from_counts, Estimator,
};
use rdsgls::netmodel::{build_transition, spectral_decompose, WeightedGraph};
use rdsgls::referral::{complete_binary_tree, ReferralTree};
use rdsgls::rng::derive;
use rdsgls::sampler::{markov_walk, RdsSample};

fn binary_outcome(tree: &ReferralTree, seed: u64) -> Vec<f64> {
    let mut rng = derive(seed, 0);
    let mut y: Vec<f64> = (0..tree.len()).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect();
    if tree.len() > 1 {
        y[0] = 0.0;
        y[1] = 1.0;
    }
    y
}

fn three_cycle() -> WeightedGraph {
    WeightedGraph::from_edges(3, [(0, 0, 2.0), (0, 1, 1.0), (1, 2, 1.0), (0, 2, 0.5), (2, 2, 1.0)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_sum_to_one(tree in arb_tree(120), seed in any::<u64>()) {
        prop_assume!(tree.len() >= 3);
        let y = binary_outcome(&tree, seed);
        let (labels, k) = outcome_blocks(&y);
        for r in [auto_fgls(&tree, &y), delta_fgls(&tree, &y), sbm_fgls(&tree, &y, &labels, k), mean_estimator(&y)] {
            let r = match r {
                Ok(r) => r,
                Err(rdsgls::Error::InsufficientDepth { .. }) => continue,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            if let Some(w) = &r.weights {
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10, "{}", r.estimator);
            }
            prop_assert!(r.mu_hat.is_finite());
        }
    }

    #[test]
    fn lag_statistics_pair_counts(tree in arb_tree(150), seed in any::<u64>(), m in -1.0f64..2.0) {
        let y = binary_outcome(&tree, seed);
        let s = lag_statistics(&tree, &y, m).unwrap();
        let n = tree.len();
        prop_assert_eq!(s.pairs[0], n);
        prop_assert_eq!(s.pairs[1], 2 * (n - 1));
        prop_assert!(s.gamma0 >= 0.0);
        if let Some(d) = s.delta1 { prop_assert!(d >= 0.0); }
        if let Some(d) = s.delta2 { prop_assert!(d >= 0.0); }
    }

    #[test]
    fn sbm_counts_are_scale_free(tree in arb_tree(80), seed in any::<u64>(), c in 0.01f64..1000.0) {
        prop_assume!(tree.len() >= 4);
        let y = binary_outcome(&tree, seed);
        let (labels, k) = outcome_blocks(&y);
        let mut counts = DMatrix::zeros(k, k);
        for (p, ch) in tree.edges() {
            counts[(labels[p], labels[ch])] += 1.0;
        }
        let a = sbm_fgls_from_counts(&tree, &y, &labels, &counts).unwrap();
        let b = sbm_fgls_from_counts(&tree, &y, &labels, &(&counts * c)).unwrap();
        prop_assert!((a.mu_hat - b.mu_hat).abs() < 1e-9);
        for (x, z) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((x - z).abs() < 1e-12);
        }
    }

    #[test]
    fn location_covariance(tree in arb_tree(60), c in -5.0f64..5.0, seed in any::<u64>()) {
        let model = build_transition(&three_cycle()).unwrap();
        let spec = spectral_decompose(&model).unwrap();
        let nodes = markov_walk(&tree, &model, &mut derive(seed, 1)).unwrap();
        let y_pop = [0.3, -1.0, 2.0];
        let shifted: Vec<f64> = y_pop.iter().map(|v| v + c).collect();
        let a = oracle_gls(&tree, &nodes, &spec, &y_pop).unwrap();
        let b = oracle_gls(&tree, &nodes, &spec, &shifted).unwrap();
        prop_assert!((b.mu_hat - a.mu_hat - c).abs() < 1e-9);
        let y: Vec<f64> = nodes.iter().map(|&x| y_pop[x]).collect();
        let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
        let m = mean_estimator(&y).unwrap().mu_hat;
        prop_assert!((mean_estimator(&ys).unwrap().mu_hat - m - c).abs() < 1e-12);
    }

    #[test]
    fn constant_outcome_returns_constant(tree in arb_tree(60), c in -3.0f64..3.0) {
        let n = tree.len();
        let sample = RdsSample::new(tree, (0..n).collect(), vec![c; n], vec![2.0; n], Some(vec![0; n])).unwrap();
        for est in Estimator::ALL {
            prop_assert_eq!(est.run(&sample).unwrap().mu_hat, c);
        }
    }
}

#[test]
fn single_participant_returns_its_value() {
    let sample = RdsSample::new(ReferralTree::path(1).unwrap(), vec![4], vec![0.7], vec![3.0], Some(vec![1])).unwrap();
    for est in Estimator::ALL {
        assert_eq!(est.run(&sample).unwrap().mu_hat, 0.7, "{}", est.name());
    }
}

#[test]
fn oracle_special_cases() {
    let tree = complete_binary_tree(5).unwrap();
    let model = build_transition(&two_state_graph(0.8)).unwrap();
    let spec = spectral_decompose(&model).unwrap();
    let nodes = markov_walk(&tree, &model, &mut derive(41, 0)).unwrap();
    let y_pop = [0.0, 1.0];
    let oracle = oracle_gls(&tree, &nodes, &spec, &y_pop).unwrap();
    let y: Vec<f64> = nodes.iter().map(|&x| y_pop[x]).collect();
    let fast = rdsgls::covariance::ranktwo_gls(&tree, 0.25, 0.6, &y).unwrap();
    assert!((oracle.mu_hat - fast.estimate).abs() < 1e-10);

    let flat = build_transition(&two_state_graph(0.5)).unwrap();
    let spec = spectral_decompose(&flat).unwrap();
    let nodes = markov_walk(&tree, &flat, &mut derive(41, 1)).unwrap();
    let oracle = oracle_gls(&tree, &nodes, &spec, &y_pop).unwrap();
    let y: Vec<f64> = nodes.iter().map(|&x| y_pop[x]).collect();
    assert!((oracle.mu_hat - mean_estimator(&y).unwrap().mu_hat).abs() < 1e-12);
}

#[test]
fn clamping_is_rare_on_two_state_chain() {
    let tree = complete_binary_tree(8).unwrap();
    for p in [0.75, 0.95] {
        let model = build_transition(&two_state_graph(p)).unwrap();
        let mut clamped = 0;
        for seed in 0..500 {
            let nodes = markov_walk(&tree, &model, &mut derive(42, seed)).unwrap();
            let y: Vec<f64> = nodes.iter().map(|&x| x as f64).collect();
            if y.iter().all(|&v| v == y[0]) {
                continue;
            }
            let (labels, k) = outcome_blocks(&y);
            let reports = [
                sbm_fgls(&tree, &y, &labels, k).unwrap(),
                auto_fgls(&tree, &y).unwrap(),
                delta_fgls(&tree, &y).unwrap(),
            ];
            if reports.iter().any(|r| r.warnings.iter().any(|w| w.contains("clamped"))) {
                clamped += 1;
            }
        }
        assert!(clamped < 5, "p = {p}: {clamped} of 500 samples clamped");
    }
}

#[test]
fn auto_lambda_recovers_chain_eigenvalue() {
    let tree = complete_binary_tree(10).unwrap();
    let model = build_transition(&two_state_graph(0.9)).unwrap();
    let lambdas: Vec<f64> = (0..200)
        .map(|seed| {
            let nodes = markov_walk(&tree, &model, &mut derive(43, seed)).unwrap();
            let y: Vec<f64> = nodes.iter().map(|&x| x as f64).collect();
            let s = lag_statistics(&tree, &y, 0.5).unwrap();
            s.gamma1.unwrap() / s.gamma0
        })
        .collect();
    let (mean, se) = mean_and_se(&lambdas);
    assert!((mean - 0.8).abs() < 4.0 * se + 0.01, "{mean} ± {se}");
}

#[test]
fn auto_tracks_mean_for_independent_outcomes() {
    let tree = complete_binary_tree(9).unwrap();
    let mut diffs: Vec<f64> = (0..200)
        .map(|seed| {
            let mut rng = derive(44, seed);
            let y: Vec<f64> = (0..tree.len()).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
            (auto_fgls(&tree, &y).unwrap().mu_hat - mean_estimator(&y).unwrap().mu_hat).abs()
        })
        .collect();
    diffs.sort_by(f64::total_cmp);
    assert!(diffs[100] < 0.01, "median |diff| {}", diffs[100]);
}
