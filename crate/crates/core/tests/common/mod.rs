#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use rdsgls::referral::{galton_watson_tree, OffspringPmf, ReferralTree};

/// Random recursive trees: node `t` attaches to a parent drawn from `0..t`.
pub fn arb_tree(max_n: usize) -> impl Strategy<Value = ReferralTree> {
    (1..=max_n)
        .prop_flat_map(|n| proptest::collection::vec(any::<u32>(), n - 1))
        .prop_map(|draws| {
            let mut parents = vec![None];
            for (i, d) in draws.iter().enumerate() {
                parents.push(Some(*d as usize % (i + 1)));
            }
            ReferralTree::from_parents(parents).unwrap()
        })
}

pub fn gw_tree(rng: &mut impl Rng, max_n: usize) -> ReferralTree {
    let target = rng.random_range(2..=max_n);
    galton_watson_tree(&OffspringPmf::uniform_recruitment(), target, 1000, rng).unwrap().tree
}

pub fn two_state_graph(p: f64) -> rdsgls::netmodel::WeightedGraph {
    rdsgls::netmodel::WeightedGraph::from_edges(2, [(0, 0, p), (1, 1, p), (0, 1, 1.0 - p)]).unwrap()
}

pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
